import numpy as np
import pytest

from multivirus_defense.control import ControllerConfig, ControllerKind, DetectionController
from multivirus_defense.errors import Extinct
from multivirus_defense.markov import (
    EventKind,
    SystemState,
    _rate_vector,
    event_rates,
    gillespie_step,
    monte_carlo,
    seed_infections,
)
from multivirus_defense.network import cycle, from_edge_list, path
from multivirus_defense.utils import THREADS_ENV
from multivirus_defense.virus import coexisting, competing, from_rates


def test_event_rates_single_edge():
    net = path(2)
    model = from_rates([1.0, 2.0], mu=[2.0, 4.0], competing=True)
    state = SystemState(np.array([1, 0]), np.array([3.0, 3.0]), q=0.5)
    events = event_rates(state, net, model)
    kinds = sorted((e.kind.value, e.host, e.virus, e.rate) for e in events)
    assert kinds == [
        ("filter_detect", 0, 0, 1.0),
        ("infection", 1, 0, 1.0),
        ("patch", 0, None, 3.0),
    ]


def test_clean_inspections_add_patch_events():
    state = SystemState(np.array([0, 0]), np.array([1.0, 1.0]))
    assert event_rates(state, path(2), from_rates([1.0])) == []
    assert len(event_rates(state, path(2), from_rates([1.0]), clean_inspections=True)) == 2


def test_rate_vector_matches_event_list():
    rng = np.random.default_rng(4)
    net = cycle(6)
    model = coexisting([1.0, 2.0])
    state = SystemState(rng.integers(0, 4, size=6), rng.uniform(0.5, 2.0, size=6), q=0.3)
    rates, _ = _rate_vector(state, net, model, False)
    assert rates.sum() == pytest.approx(sum(e.rate for e in event_rates(state, net, model)))


def test_gillespie_step_patches_then_extinct():
    net = from_edge_list(1, [])
    model = from_rates([1.0])
    state = SystemState(np.array([1]), np.array([2.0]))
    rng = np.random.default_rng(0)
    event, dt = gillespie_step(state, net, model, None, rng)
    assert event.kind is EventKind.PATCH
    assert dt > 0
    assert state.sets.tolist() == [0]
    with pytest.raises(Extinct):
        gillespie_step(state, net, model, None, rng)


def test_competing_infection_replaces():
    net = path(2)
    model = competing([1.0, 1.0])
    state = SystemState(np.array([1, 2]), np.zeros(2))
    rng = np.random.default_rng(1)
    event, _ = gillespie_step(state, net, model, None, rng)
    assert event.kind is EventKind.INFECTION
    assert sorted(state.sets.tolist()) in ([1, 1], [2, 2])


def test_monotone_controller_raises_beta_on_detection():
    controller = DetectionController(ControllerConfig(ControllerKind.MONOTONE, alpha=50.0))
    state = SystemState(np.array([1]), np.array([10.0]))
    gillespie_step(state, from_edge_list(1, []), from_rates([1.0]), controller, np.random.default_rng(0))
    assert state.beta[0] == pytest.approx(15.0)


def test_seed_infections_extremes():
    rng = np.random.default_rng(2)
    net = cycle(5)
    model = coexisting([1.0, 2.0])
    assert seed_infections(net, model, 0.0, rng).tolist() == [0] * 5
    sets = seed_infections(net, model, 1.0, rng)
    assert set(sets.tolist()) <= {1, 2}


def test_isolated_host_matches_exponential():
    net = from_edge_list(1, [])
    traj = monte_carlo(net, from_rates([1.0]), [[1.0]], 1.0, trials=2000, horizon=1.0, grid=[0.0, 1.0], seed=3)
    assert traj.frac_any[0] == 1.0
    assert abs(traj.frac_any[1] - np.exp(-1.0)) <= 4 * traj.se_any[1]


def test_monte_carlo_is_reproducible():
    kwargs = dict(trials=20, horizon=1.0, grid=np.linspace(0, 1, 6), seed=9)
    a = monte_carlo(cycle(4), coexisting([1.0, 2.0]), 0.4, 2.0, **kwargs)
    b = monte_carlo(cycle(4), coexisting([1.0, 2.0]), 0.4, 2.0, **kwargs)
    assert np.array_equal(a.host_virus, b.host_virus)
    assert np.array_equal(a.se_any, b.se_any)


def test_monte_carlo_independent_of_thread_count(monkeypatch):
    kwargs = dict(trials=12, horizon=1.0, grid=np.linspace(0, 1, 6), seed=5)
    serial = monte_carlo(cycle(4), competing([1.0, 2.0]), 0.4, 1.0, **kwargs)
    monkeypatch.setenv(THREADS_ENV, "3")
    threaded = monte_carlo(cycle(4), competing([1.0, 2.0]), 0.4, 1.0, **kwargs)
    assert np.array_equal(serial.host_any, threaded.host_any)


def test_monte_carlo_occupancy_sums_to_any():
    traj = monte_carlo(cycle(4), coexisting([1.0, 2.0]), 0.6, 1.0, trials=10, horizon=1.0, seed=1)
    assert traj.host_sets is not None
    assert np.allclose(traj.host_sets.sum(axis=2), traj.host_any)


def test_monte_carlo_rejects_zero_trials():
    with pytest.raises(ValueError):
        monte_carlo(path(2), from_rates([1.0]), 0.5, 1.0, trials=0)
