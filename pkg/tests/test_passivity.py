import numpy as np
import pytest

from multivirus_defense.linalg import eig_sym
from multivirus_defense.network import cycle, from_edge_list, path
from multivirus_defense.passivity import (
    DECREMENT_TOL,
    CouplingForm,
    build_Q,
    build_Qbar,
    build_Qi,
    design_matrices,
    passivity_index_bound,
    random_valid_states,
    verify_storage_decrement,
)
from multivirus_defense.virus import VirusModel, coexisting, competing, from_rates


def test_Qi_coexisting_pair():
    assert build_Qi(3, coexisting([1.0, 2.0])).tolist() == pytest.approx([1.0, 2.0, 3.0])


def test_Qi_isolated_host_is_zero():
    assert not build_Qi(0, competing([1.0, 2.0])).any()


def _random_table_model(rng: np.random.Generator) -> VirusModel:
    m = int(rng.integers(1, 4))
    full = (1 << m) - 1
    rivals = rng.random() < 0.5
    overrides = {
        (S, v): float(rng.uniform())
        for S in range(1 << m)
        for v in range(m)
        if not S >> v & 1
    }
    return VirusModel(
        names=tuple(f"v{v + 1}" for v in range(m)),
        mu=rng.uniform(0.1, 5.0, size=m),
        compete=tuple((full & ~(1 << v)) if rivals else 0 for v in range(m)),
        p_default=rng.uniform(size=m),
        overrides=overrides,
    )


def test_Q_is_positive_semidefinite_on_random_tables():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        Q = build_Q(_random_table_model(rng))
        assert eig_sym(Q)[0] >= -1e-10 * max(1.0, float(np.abs(Q).max()))


@pytest.mark.parametrize("factor", [0.5, 2.0, 3.7])
def test_rho_scales_with_rates(factor):
    net = path(4)
    model = coexisting([1.0, 2.0])
    rho = passivity_index_bound(net, model)
    assert passivity_index_bound(net, model.scaled(factor)) == pytest.approx(factor * rho, rel=1e-10)


def test_zero_rates_give_zero_index():
    model = from_rates([0.0, 0.0], mu=[1.0, 1.0])
    assert not build_Q(model).any()
    assert passivity_index_bound(cycle(4), model) == 0.0


def test_Qbar_is_symmetric():
    for form in CouplingForm:
        Qbar = build_Qbar(path(3), coexisting([1.0, 2.0]), form)
        assert Qbar.shape == (9, 9)
        assert np.array_equal(Qbar, Qbar.T)


def test_regular_graph_hosts_share_bound():
    matrices = design_matrices(cycle(5), coexisting([1.0, 2.0]))
    assert np.allclose(matrices.host_bounds, matrices.rho)
    assert matrices.top_eigenvalue > 0


def test_competing_index_not_above_coexisting():
    net = cycle(4)
    assert passivity_index_bound(net, competing([1.0, 2.0])) <= passivity_index_bound(
        net, coexisting([1.0, 2.0])
    ) + 1e-12


def test_zero_state_meets_decrement():
    states = np.zeros((1, 3, 3))
    assert verify_storage_decrement(states, 1.0, path(3), coexisting([1.0, 2.0])) == 0.0


def test_lemma_form_fails_on_half_infected_edge():
    # W' = 2 x^2 (1 - x) = 0.25 while the lemma quadratic form gives x^2 / 2 = 0.125
    net = from_edge_list(2, [(0, 1)])
    states = np.full((1, 2, 1), 0.5)
    excess = verify_storage_decrement(states, 0.0, net, from_rates([1.0]))
    assert excess == pytest.approx(0.125)


@pytest.mark.parametrize("model", [coexisting([1.0, 2.0]), competing([1.0, 2.0])])
def test_conservative_form_holds_on_random_states(model):
    net = cycle(4)
    rng = np.random.default_rng(5)
    states = random_valid_states(2000, net.n, len(model.realizable_sets()), rng)
    excess = verify_storage_decrement(states, 3.0, net, model, CouplingForm.CONSERVATIVE)
    assert excess <= DECREMENT_TOL


def test_random_valid_states_are_valid():
    states = random_valid_states(100, 3, 2, np.random.default_rng(0))
    assert states.shape == (100, 3, 2)
    assert np.all(states >= 0)
    assert np.all(states.sum(axis=2) <= 1.0)
