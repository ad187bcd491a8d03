"""
Exact stochastic simulation of the multi-virus SIS chain.

Every trial owns a :class:`SystemState` and a generator. Monte-Carlo runs
derive trial ``k``'s generator from ``(seed, k)``, run trials on up to
``EXPCTL_THREADS`` worker threads and reduce the results in trial order.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np

from .errors import Extinct
from .meanfield import seeding_matrix
from .network import Network
from .trajectory import Trajectory, check_grid, default_grid
from .utils import thread_count, trial_rng
from .virus import VirusModel

logger = logging.getLogger(__name__)


class EventKind(Enum):
    INFECTION = "infection"
    FILTER_DETECT = "filter_detect"
    PATCH = "patch"


@dataclass(frozen=True)
class Event:
    """
    One enabled transition of the chain.

    Attributes:
        kind: Transition type
        host: Host whose infection set changes (or is inspected)
        virus: Virus involved (None for patching)
        peer: Neighbour that sent the infecting packet (infection) or the
              neighbour the detected packet was addressed to (filtering)
        rate: Transition rate
    """

    kind: EventKind
    host: int
    virus: Optional[int] = None
    peer: Optional[int] = None
    rate: float = 0.0


@dataclass
class SystemState:
    """
    Attributes:
        sets: Infection set of every host (bitmask, 0 when clean)
        beta: Per-host patch rates
        q: Filter probability
        t: Current time
    """

    sets: np.ndarray
    beta: np.ndarray
    q: float = 0.0
    t: float = 0.0

    def copy(self) -> "SystemState":
        return SystemState(self.sets.copy(), self.beta.copy(), self.q, self.t)

    def indicators(self, m: int) -> np.ndarray:
        """``(n, m)`` 0-1 matrix of ``v in S_i``."""
        return (self.sets[:, None] >> np.arange(m)) & 1


class EventHook(Protocol):
    """Parameter update rule driven by detections."""

    clean_inspections: bool

    def on_patch(self, state: SystemState, host: int, infected: bool) -> None: ...

    def on_filter(self, state: SystemState, host: int, virus: int) -> None: ...


def event_rates(
    state: SystemState, net: Network, model: VirusModel, clean_inspections: bool = False
) -> List[Event]:
    """
    Enumerate every enabled transition with its rate.

    One infection event per (host, virus it lacks, infected neighbour) at rate
    ``lam[S_i, v]``; one filter event per (host, virus it holds, neighbour
    lacking that virus) at rate ``q mu^v``; one patch event per infected host
    at rate ``beta_i``, and per clean host as well when ``clean_inspections``.
    """
    events: List[Event] = []
    for i in range(net.n):
        S = int(state.sets[i])
        for j in net.neighbors(i):
            Sj = int(state.sets[j])
            for v in range(model.m):
                has_i, has_j = S >> v & 1, Sj >> v & 1
                if not has_i and has_j and model.lam[S, v] > 0:
                    events.append(Event(EventKind.INFECTION, i, v, int(j), float(model.lam[S, v])))
                if has_i and not has_j and state.q > 0:
                    events.append(
                        Event(EventKind.FILTER_DETECT, i, v, int(j), state.q * float(model.mu[v]))
                    )
        if state.beta[i] > 0 and (S or clean_inspections):
            events.append(Event(EventKind.PATCH, i, rate=float(state.beta[i])))
    return events


def _rate_vector(
    state: SystemState, net: Network, model: VirusModel, clean_inspections: bool
) -> Tuple[np.ndarray, np.ndarray]:
    """Rates aggregated per (host, virus) for infection and filtering, then per host for patching."""
    I = state.indicators(model.m)
    infected_nbrs = net.adjacency @ I
    infection = model.lam[state.sets] * infected_nbrs
    filtering = state.q * model.mu * I * (net.degrees[:, None] - infected_nbrs)
    active = (state.sets != 0) | clean_inspections
    patch = np.where(active, state.beta, 0.0)
    return np.concatenate([infection.ravel(), filtering.ravel(), patch]), I


def gillespie_step(
    state: SystemState,
    net: Network,
    model: VirusModel,
    controller: Optional[EventHook],
    rng: np.random.Generator,
) -> Tuple[Event, float]:
    """
    Advance ``state`` in place by one transition.

    Rates are summed per (host, virus) and the responsible neighbour is then
    drawn uniformly among the qualifying ones, which samples the same law as
    racing the individual per-edge events.

    Returns:
        The event applied and the waiting time before it

    Raises:
        Extinct: If no transition is enabled
    """
    clean_inspections = bool(controller is not None and controller.clean_inspections)
    rates, I = _rate_vector(state, net, model, clean_inspections)
    total = float(rates.sum())
    if total <= 0.0:
        raise Extinct(f"no enabled event at t={state.t}")

    dt = float(rng.exponential(1.0 / total))
    cumulative = np.cumsum(rates)
    k = int(np.searchsorted(cumulative, rng.random() * total, side="right"))
    k = min(k, len(rates) - 1)
    while rates[k] <= 0.0:
        k -= 1

    n, m = net.n, model.m
    state.t += dt
    if k < 2 * n * m:
        i, v = divmod(k % (n * m), m)
        wanted = 1 if k < n * m else 0
        peers = [j for j in net.neighbors(i) if I[j, v] == wanted]
        peer = int(peers[int(rng.integers(len(peers)))])
        if k < n * m:
            S = int(state.sets[i])
            state.sets[i] = model.infect_target(S, v)
            assert model.is_realizable(int(state.sets[i])), "competing viruses share a host"
            event = Event(EventKind.INFECTION, i, v, peer, float(rates[k]))
        else:
            state.sets[i] = 0
            event = Event(EventKind.FILTER_DETECT, i, v, peer, float(rates[k]))
            if controller is not None:
                controller.on_filter(state, i, v)
    else:
        i = k - 2 * n * m
        infected = bool(state.sets[i])
        event = Event(EventKind.PATCH, i, rate=float(rates[k]))
        if controller is not None:
            controller.on_patch(state, i, infected)
        state.sets[i] = 0
    return event, dt


def seed_infections(
    net: Network, model: VirusModel, probabilities, rng: np.random.Generator
) -> np.ndarray:
    """
    Draw initial infection sets: host ``i`` starts with virus ``v`` alone
    with probability ``probabilities[i, v]`` and clean otherwise.
    """
    probs = seeding_matrix(net.n, model.m, probabilities)
    u = rng.random(net.n)
    edges = np.cumsum(probs, axis=1)
    choice = (u[:, None] >= edges).sum(axis=1)
    sets = np.zeros(net.n, dtype=np.int64)
    infected = choice < model.m
    sets[infected] = 1 << choice[infected]
    return sets


@dataclass
class TrialRecord:
    """Per-grid snapshots of one trial."""

    set_index: np.ndarray
    indicators: np.ndarray
    beta: np.ndarray
    q: np.ndarray


def simulate(
    net: Network,
    model: VirusModel,
    state: SystemState,
    grid: np.ndarray,
    rng: np.random.Generator,
    controller: Optional[EventHook] = None,
) -> TrialRecord:
    """
    Run one trial from ``state`` and snapshot it at every grid time.

    The state at a grid time is the state after the last event at or before it.
    """
    sets = [0] + model.realizable_sets()
    lookup = np.full(1 << model.m, -1, dtype=np.int64)
    lookup[sets] = np.arange(len(sets))

    K = len(grid)
    record = TrialRecord(
        set_index=np.zeros((K, net.n), dtype=np.int64),
        indicators=np.zeros((K, net.n, model.m), dtype=np.int8),
        beta=np.zeros((K, net.n)),
        q=np.zeros(K),
    )
    g = 0
    events = 0
    while g < K:
        try:
            snapshot = state.copy()
            _, dt = gillespie_step(state, net, model, controller, rng)
            events += 1
        except Extinct:
            snapshot, dt = state, np.inf
        t_next = snapshot.t + dt
        while g < K and grid[g] < t_next:
            record.set_index[g] = lookup[snapshot.sets]
            record.indicators[g] = snapshot.indicators(model.m)
            record.beta[g] = snapshot.beta
            record.q[g] = snapshot.q
            g += 1
    logger.debug("trial finished after %d events", events)
    return record


def monte_carlo(
    net: Network,
    model: VirusModel,
    seeding,
    beta0: Union[float, Sequence[float]],
    q0: float = 0.0,
    controller: Optional[EventHook] = None,
    trials: int = 100,
    horizon: float = 1.0,
    grid: Optional[Sequence[float]] = None,
    seed: int = 0,
) -> Trajectory:
    """
    Average independent trials into mean trajectories with standard errors.

    Args:
        net: Host network
        model: Virus model
        seeding: Initial infection law (see :func:`seeding_matrix`)
        beta0: Initial patch rate, scalar or per host
        q0: Initial filter probability
        controller: Optional detection-driven update rule
        trials: Number of trials (>= 1)
        horizon: Final time
        grid: Sample times; 101 evenly spaced points by default
        seed: Master seed; trial ``k`` uses the stream derived from ``(seed, k)``

    Returns:
        Trajectory: Means over trials, standard errors over trials of the
        host-averaged fractions, and per-host per-set occupation frequencies
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    grid = check_grid(default_grid(horizon) if grid is None else np.asarray(grid), horizon)
    beta0 = np.broadcast_to(np.asarray(beta0, dtype=float), (net.n,)).copy()

    def run(k: int) -> TrialRecord:
        rng = trial_rng(seed, k)
        state = SystemState(seed_infections(net, model, seeding, rng), beta0.copy(), q0)
        return simulate(net, model, state, grid, rng, controller)

    workers = min(thread_count(), trials)
    logger.info("monte carlo: %d trials on %d thread(s), seed %d", trials, workers, seed)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run, range(trials)))
    else:
        records = [run(k) for k in range(trials)]

    K, n, R = len(grid), net.n, len(model.realizable_sets())
    ind = np.stack([r.indicators for r in records]).astype(float)
    any_inf = np.stack([r.set_index > 0 for r in records]).astype(float)
    occupancy = np.zeros((K, n, R))
    for r in records:
        for k in range(R):
            occupancy[:, :, k] += r.set_index == k + 1
    occupancy /= trials

    def stderr(samples: np.ndarray) -> np.ndarray:
        if trials < 2:
            return np.zeros(samples.shape[1:])
        return samples.std(axis=0, ddof=1) / np.sqrt(trials)

    return Trajectory(
        t=grid,
        host_virus=ind.mean(axis=0),
        host_any=any_inf.mean(axis=0),
        beta=np.stack([r.beta for r in records]).mean(axis=0),
        q=np.stack([r.q for r in records]).mean(axis=0),
        se_any=stderr(any_inf.mean(axis=2)),
        se_virus=stderr(ind.mean(axis=2)),
        host_sets=occupancy,
        trials=trials,
    )


__all__ = [
    "Event",
    "EventHook",
    "EventKind",
    "SystemState",
    "TrialRecord",
    "event_rates",
    "gillespie_step",
    "monte_carlo",
    "seed_infections",
    "simulate",
]
