import numpy as np
import pytest

from multivirus_defense.errors import StateSpaceTooLarge
from multivirus_defense.markov import monte_carlo
from multivirus_defense.master_equation import (
    generator,
    initial_distribution,
    joint_size,
    master_equation,
)
from multivirus_defense.meanfield import initial_state, simulate_subset
from multivirus_defense.network import complete, cycle, from_edge_list, path
from multivirus_defense.virus import coexisting, competing, from_rates


def test_single_host_matches_exponential():
    grid = np.linspace(0.0, 2.0, 5)
    result = master_equation(from_edge_list(1, []), from_rates([1.0]), [[1.0]], 1.5, horizon=2.0, grid=grid)
    assert result.host_sets[:, 0, 0] == pytest.approx(np.exp(-1.5 * grid), abs=1e-6)


def test_generator_rows_sum_to_zero():
    net = path(3)
    model = coexisting([1.0, 2.0])
    G = generator(net, model, np.full(3, 0.7), q=0.2)
    assert G.shape == (joint_size(net, model),) * 2
    assert np.allclose(np.asarray(G.sum(axis=1)).ravel(), 0.0)


def test_zero_rates_keep_distribution():
    net = path(2)
    model = from_rates([0.0], mu=[1.0])
    result = master_equation(net, model, 0.5, 0.0, horizon=1.0, grid=[0.0, 1.0])
    assert np.allclose(result.host_sets[0], result.host_sets[-1])


def test_initial_distribution_is_product():
    p = initial_distribution(path(2), competing([1.0, 1.0]), [0.2, 0.3])
    assert p.sum() == pytest.approx(1.0)
    # host 0 in digit 0: state (host0 = v1, host1 clean) has index 1
    assert p[1] == pytest.approx(0.2 * 0.5)


def test_mass_is_conserved():
    result = master_equation(path(3), competing([1.0, 2.0]), 0.6, 1.0, horizon=1.0)
    assert np.max(np.abs(result.mass - 1.0)) <= 1e-8


def test_state_space_limit():
    with pytest.raises(StateSpaceTooLarge):
        generator(complete(9), coexisting([1.0, 1.0]), np.ones(9))


@pytest.mark.parametrize("model", [coexisting([1.0, 2.0]), competing([1.0, 2.0])])
def test_monte_carlo_agrees_with_master_equation(model):
    net = path(2)
    grid = np.linspace(0.0, 1.0, 5)
    exact = master_equation(net, model, 0.6, 1.0, horizon=1.0, grid=grid).to_trajectory(
        model, np.ones(2), 0.0
    )
    mc = monte_carlo(net, model, 0.6, 1.0, trials=3000, horizon=1.0, grid=grid, seed=21)
    assert np.all(np.abs(mc.frac_any - exact.frac_any) <= 5 * mc.se_any + 1e-12)


def test_single_virus_meanfield_upper_bounds_exact():
    net = path(3)
    model = from_rates([2.0])
    grid = np.linspace(0.0, 2.0, 11)
    exact = master_equation(net, model, 0.5, 1.0, horizon=2.0, grid=grid)
    mf = simulate_subset(net, model, initial_state(net, model, 0.5), 1.0, horizon=2.0, grid=grid)
    assert np.all(mf.host_any >= exact.host_sets.sum(axis=2) - 1e-6)


@pytest.mark.parametrize(
    "net, model",
    [(path(3), competing([1.0, 2.0])), (cycle(3), coexisting([1.0, 2.0]))],
    ids=["path3-competing", "cycle3-coexisting"],
)
def test_monte_carlo_agrees_with_master_equation_on_three_hosts(net, model):
    grid = np.array([0.0, 0.5, 1.0])
    exact = master_equation(net, model, 0.6, 1.0, horizon=1.0, grid=grid).to_trajectory(
        model, np.ones(3), 0.0
    )
    mc = monte_carlo(net, model, 0.6, 1.0, trials=4000, horizon=1.0, grid=grid, seed=5)
    assert np.all(np.abs(mc.frac_any - exact.frac_any) <= 3 * mc.se_any + 1e-12)


@pytest.mark.parametrize("model", [coexisting([1.0, 2.0]), competing([1.0, 2.0])])
def test_multi_virus_meanfield_upper_bounds_exact(model):
    net = path(3)
    grid = np.linspace(0.0, 2.0, 11)
    exact = master_equation(net, model, 0.5, 1.0, horizon=2.0, grid=grid)
    mf = simulate_subset(net, model, initial_state(net, model, 0.5), 1.0, horizon=2.0, grid=grid)
    assert np.all(mf.host_any >= exact.host_sets.sum(axis=2) - 1e-6)
