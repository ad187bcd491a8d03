"""
Mean-field dynamics under the independence approximation.

The subset dynamics track ``x[i, k]``, the probability that host ``i`` holds
exactly the ``k``-th realizable set. The aggregate dynamics track only the
probability ``xbar[i]`` that host ``i`` is infected at all and upper-bound the
summed subset dynamics.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import InvalidProbability, StepTooLarge
from .network import Network
from .trajectory import Trajectory, check_grid, default_grid
from .virus import VirusModel

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-3
BOX_SLACK = 0.01
SUM_TOL = 1e-9

Field = Callable[[float, np.ndarray], np.ndarray]


class AggregateClosure(Enum):
    """
    How the aggregate dynamics see the neighbours' per-virus marginals.

    Attributes:
        MARGINAL: Use the per-virus marginals ``xbar_j^v`` as given
        CLOSED: Replace ``xbar_j^v`` by its upper bound ``xbar_j``
    """

    MARGINAL = "marginal"
    CLOSED = "closed"


class Dynamics(Enum):
    SUBSET = "subset"
    AGGREGATE = "aggregate"


@dataclass
class MeanFieldState:
    """
    Attributes:
        x: Per-host probabilities over the realizable sets, shape ``(n, |R|)``
        t: Time
    """

    x: np.ndarray
    t: float = 0.0

    @property
    def xbar(self) -> np.ndarray:
        return self.x.sum(axis=1)

    def is_valid(self) -> bool:
        return bool(
            np.all(self.x >= 0)
            and np.all(self.x <= 1)
            and np.all(self.xbar <= 1 + SUM_TOL)
        )


def marginals(state: Union[MeanFieldState, np.ndarray], model: VirusModel) -> np.ndarray:
    """Per-host per-virus marginals ``xbar[i, v]``, shape ``(n, m)``."""
    x = state.x if isinstance(state, MeanFieldState) else state
    return x @ model.membership()


class SubsetStructure:
    """
    Precomputed index tables for evaluating the subset dynamics of one model.

    Attributes:
        sets: Realizable sets, in the row order of ``x``
        H: Membership matrix, shape ``(|R|, m)``
        outflow: ``outflow[k, v] = lam[S_k, v]`` for ``v`` not in ``S_k``
    """

    def __init__(self, model: VirusModel):
        self.model = model
        self.sets = model.realizable_sets()
        self.K = len(self.sets)
        index = {S: k for k, S in enumerate(self.sets)}
        index[0] = self.K  # clean state lives in the extra column
        self.H = model.membership()
        self.outflow = np.array([model.lam[S] for S in self.sets])
        self.filter_weight = self.H * model.mu

        src, vir, dst, rate = [], [], [], []
        for k, S in enumerate(self.sets):
            for T, v in model.predecessors(S):
                src.append(index[T])
                vir.append(v)
                dst.append(k)
                rate.append(model.lam[T, v])
        self.pred_src = np.array(src, dtype=int)
        self.pred_virus = np.array(vir, dtype=int)
        self.pred_rate = np.array(rate)
        self.pred_scatter = np.zeros((len(dst), self.K))
        self.pred_scatter[np.arange(len(dst)), dst] = 1.0

    def derivative(
        self, x: np.ndarray, A: np.ndarray, degrees: np.ndarray, beta: np.ndarray, q: float
    ) -> np.ndarray:
        clean = 1.0 - x.sum(axis=1, keepdims=True)
        X = np.hstack([x, clean])
        F = A @ (x @ self.H)

        inflow = (X[:, self.pred_src] * F[:, self.pred_virus] * self.pred_rate) @ self.pred_scatter
        outflow = x * (F @ self.outflow.T)
        dx = inflow - outflow - np.asarray(beta, dtype=float)[:, None] * x
        if q:
            uninfected = degrees[:, None] - F
            dx -= q * x * (uninfected @ self.filter_weight.T)
        return dx


def subset_derivative(
    state: Union[MeanFieldState, np.ndarray],
    net: Network,
    model: VirusModel,
    beta: Union[float, np.ndarray],
    q: float = 0.0,
) -> np.ndarray:
    """
    Time derivative of every ``x[i, k]``.

    The four contributions are inflow from predecessor sets, outflow to
    supersets or competitor swaps, outflow by packet filtering at rate
    ``q mu^v`` toward neighbours not holding ``v``, and outflow by patching.
    The neighbour sums use the collapsed marginals ``xbar_j^v``.

    Examples:
        >>> net = from_edge_list(2, [(0, 1)])
        >>> subset_derivative(np.array([[1.0], [0.0]]), net, from_rates([1.0]), 0.0)
        array([[0.],
               [1.]])
    """
    x = state.x if isinstance(state, MeanFieldState) else np.asarray(state, dtype=float)
    structure = SubsetStructure(model)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (net.n,))
    return structure.derivative(
        x, net.adjacency.astype(float), net.degrees.astype(float), beta, q
    )


def aggregate_derivative(
    xbar: np.ndarray,
    xbar_v: Optional[np.ndarray],
    net: Network,
    model: VirusModel,
    beta: Union[float, np.ndarray],
    closure: AggregateClosure = AggregateClosure.MARGINAL,
) -> np.ndarray:
    """
    Aggregate infection dynamics ``(1 - xbar_i) sum_j sum_v lam^{0,v} xbar_j^v - beta_i xbar_i``.

    With ``AggregateClosure.CLOSED`` the marginals are bounded by ``xbar_j``,
    giving ``(1 - xbar_i) lam_hat sum_j xbar_j - beta_i xbar_i``; ``xbar_v``
    may then be None.
    """
    xbar = np.asarray(xbar, dtype=float)
    A = net.adjacency.astype(float)
    if closure is AggregateClosure.CLOSED or xbar_v is None:
        pressure = model.lam_hat * (A @ xbar)
    else:
        pressure = (A @ np.asarray(xbar_v, dtype=float)) @ model.lam[0]
    return (1.0 - xbar) * pressure - np.asarray(beta, dtype=float) * xbar


def _rk4_step(field: Field, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = field(t, y)
    k2 = field(t + h / 2, y + h / 2 * k1)
    k3 = field(t + h / 2, y + h / 2 * k2)
    k4 = field(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(
    y0: np.ndarray,
    field: Field,
    horizon: float,
    h: float = DEFAULT_STEP,
    grid: Optional[Sequence[float]] = None,
    box: Optional[np.ndarray] = None,
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Fixed-step RK4 with clamping, sampled onto ``grid`` by linear interpolation.

    The step is shrunk to ``horizon / ceil(horizon / h)`` so the last step
    lands exactly on the horizon.

    Args:
        y0: Initial state (any shape)
        field: ``field(t, y) -> dy/dt`` with the shape of ``y``
        horizon: Final time (> 0)
        h: Nominal step size (> 0)
        grid: Sample times within ``[0, horizon]``; 101 points by default
        box: Boolean mask of the coordinates that are probabilities; these
             are clamped to ``[0, 1]`` after every step (all by default)
        project: Optional map applied after clamping (rate floors, row sums)

    Returns:
        ``(grid, samples)`` with ``samples.shape == (len(grid), *y0.shape)``

    Raises:
        StepTooLarge: If a boxed coordinate leaves ``[-0.01, 1.01]`` before clamping
    """
    if h <= 0:
        raise ValueError(f"step size must be positive, got {h}")
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    grid = check_grid(default_grid(horizon) if grid is None else np.asarray(grid), horizon)

    y = np.array(y0, dtype=float)
    if box is None:
        box = np.ones(y.shape, dtype=bool)
    steps = max(1, int(np.ceil(horizon / h - 1e-9)))
    h_eff = horizon / steps

    samples = np.empty((len(grid), *y.shape))
    g = 0
    while g < len(grid) and grid[g] <= 0.0:
        samples[g] = y
        g += 1

    t = 0.0
    for step in range(1, steps + 1):
        y_next = _rk4_step(field, t, y, h_eff)
        boxed = y_next[box]
        if boxed.size and (boxed.min() < -BOX_SLACK or boxed.max() > 1 + BOX_SLACK):
            raise StepTooLarge(
                f"state left [-0.01, 1.01] at t={t + h_eff:.6g} with h={h_eff:.3g}; halve h"
            )
        y_next[box] = np.clip(boxed, 0.0, 1.0)
        if project is not None:
            y_next = project(y_next)
        t_next = step * h_eff
        while g < len(grid) and grid[g] <= t_next + 1e-12:
            w = (grid[g] - t) / h_eff
            samples[g] = (1 - w) * y + w * y_next
            g += 1
        y, t = y_next, t_next

    logger.debug("rk4 finished %d steps of %.3g up to t=%g", steps, h_eff, horizon)
    return grid, samples


def cap_row_sums(x: np.ndarray) -> np.ndarray:
    """Rescale host rows whose set probabilities sum above one."""
    totals = x.sum(axis=1, keepdims=True)
    return np.where(totals > 1.0, x / np.maximum(totals, 1.0), x)


def seeding_matrix(
    n: int, m: int, probabilities: Union[float, Sequence[float], np.ndarray]
) -> np.ndarray:
    """
    Normalize an initial-infection law to an ``(n, m)`` matrix.

    A scalar is the probability that a host starts infected, split evenly
    over the viruses; a length-``m`` vector gives per-virus probabilities
    shared by all hosts; an ``(n, m)`` matrix is taken as is. Every host
    starts with at most one virus, so row sums must not exceed one.
    """
    probs = np.asarray(probabilities, dtype=float)
    if probs.ndim == 0:
        probs = np.full((n, m), float(probs) / m)
    elif probs.ndim == 1:
        probs = np.tile(probs, (n, 1))
    if probs.shape != (n, m):
        raise ValueError(f"seeding law must broadcast to ({n}, {m}), got {probs.shape}")
    if np.any(probs < 0) or np.any(probs.sum(axis=1) > 1 + SUM_TOL):
        raise InvalidProbability("seeding probabilities must be >= 0 with row sums <= 1")
    return probs


def initial_state(
    net: Network, model: VirusModel, probabilities: Union[float, Sequence[float], np.ndarray]
) -> np.ndarray:
    """Mean-field initial condition: the seeding mass sits on the singleton sets."""
    probs = seeding_matrix(net.n, model.m, probabilities)
    sets = model.realizable_sets()
    x = np.zeros((net.n, len(sets)))
    for v in range(model.m):
        x[:, sets.index(1 << v)] = probs[:, v]
    return x


def simulate_subset(
    net: Network,
    model: VirusModel,
    x0: np.ndarray,
    beta: Union[float, np.ndarray],
    q: float = 0.0,
    horizon: float = 1.0,
    h: float = DEFAULT_STEP,
    grid: Optional[Sequence[float]] = None,
) -> Trajectory:
    """Integrate the subset dynamics with static ``beta`` and ``q``."""
    structure = SubsetStructure(model)
    A = net.adjacency.astype(float)
    degrees = net.degrees.astype(float)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (net.n,)).copy()

    def field(t: float, x: np.ndarray) -> np.ndarray:
        return structure.derivative(x, A, degrees, beta, q)

    t, xs = integrate(x0, field, horizon, h, grid, project=cap_row_sums)
    host_virus = xs @ structure.H
    K = len(t)
    return Trajectory(
        t=t,
        host_virus=host_virus,
        host_any=xs.sum(axis=2),
        beta=np.tile(beta, (K, 1)),
        q=np.full(K, float(q)),
        se_any=np.zeros(K),
        se_virus=np.zeros((K, model.m)),
        host_sets=xs,
    )


def simulate_aggregate(
    net: Network,
    model: VirusModel,
    xbar0: np.ndarray,
    beta: Union[float, np.ndarray],
    horizon: float = 1.0,
    h: float = DEFAULT_STEP,
    grid: Optional[Sequence[float]] = None,
) -> Trajectory:
    """
    Integrate the closed aggregate dynamics.

    Per-virus columns of the result are filled with the aggregate value,
    which bounds every per-virus marginal.
    """
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (net.n,)).copy()

    def field(t: float, xbar: np.ndarray) -> np.ndarray:
        return aggregate_derivative(xbar, None, net, model, beta, AggregateClosure.CLOSED)

    t, xb = integrate(np.asarray(xbar0, dtype=float), field, horizon, h, grid)
    K = len(t)
    return Trajectory(
        t=t,
        host_virus=np.repeat(xb[:, :, None], model.m, axis=2),
        host_any=xb,
        beta=np.tile(beta, (K, 1)),
        q=np.zeros(K),
        se_any=np.zeros(K),
        se_virus=np.zeros((K, model.m)),
    )
