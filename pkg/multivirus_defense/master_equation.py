"""
Exact forward equation of the joint chain for tiny networks.

Joint states encode one local state per host in base ``K = |R| + 1``
(digit 0 is the clean state, digit ``k`` the ``k``-th realizable set).
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse

from .errors import StateSpaceTooLarge
from .meanfield import DEFAULT_STEP, integrate, seeding_matrix
from .network import Network
from .trajectory import Trajectory
from .virus import VirusModel

logger = logging.getLogger(__name__)

MAX_JOINT_STATES = 100_000
MASS_TOL = 1e-8


@dataclass
class MasterEquationResult:
    """
    Attributes:
        t: Sample times
        host_sets: Exact ``P(S_i = k-th set)``, shape ``(K, n, |R|)``
        mass: Total probability at every sample (one up to integration error)
    """

    t: np.ndarray
    host_sets: np.ndarray
    mass: np.ndarray

    def to_trajectory(self, model: VirusModel, beta: np.ndarray, q: float) -> Trajectory:
        H = model.membership()
        K = len(self.t)
        return Trajectory(
            t=self.t,
            host_virus=self.host_sets @ H,
            host_any=self.host_sets.sum(axis=2),
            beta=np.tile(beta, (K, 1)),
            q=np.full(K, float(q)),
            se_any=np.zeros(K),
            se_virus=np.zeros((K, model.m)),
            host_sets=self.host_sets,
        )


def joint_size(net: Network, model: VirusModel) -> int:
    return (len(model.realizable_sets()) + 1) ** net.n


def generator(
    net: Network, model: VirusModel, beta: np.ndarray, q: float = 0.0
) -> scipy.sparse.csr_matrix:
    """
    Sparse generator ``G`` of the joint chain (rows sum to zero).

    Raises:
        StateSpaceTooLarge: If the joint chain has more than 10^5 states
    """
    size = joint_size(net, model)
    if size > MAX_JOINT_STATES:
        raise StateSpaceTooLarge(
            f"{size} joint states exceed the limit of {MAX_JOINT_STATES}"
        )
    sets = [0] + model.realizable_sets()
    K, n, m = len(sets), net.n, model.m
    local_index = {S: k for k, S in enumerate(sets)}
    holds = np.array([[S >> v & 1 for v in range(m)] for S in sets])

    states = np.arange(size)
    powers = K ** np.arange(n)
    digits = (states[None, :] // powers[:, None]) % K
    carrying = holds[digits]  # (n, size, m)
    neighbours_with = np.einsum("ij,jsv->isv", net.adjacency, carrying)

    rows, cols, vals = [], [], []

    def add(mask: np.ndarray, rate: np.ndarray, shift: np.ndarray) -> None:
        mask = mask & (rate > 0)
        src = states[mask]
        rows.append(src)
        cols.append(src + shift[mask])
        vals.append(rate[mask])

    for i in range(n):
        d = digits[i]
        for a, S in enumerate(sets):
            here = d == a
            for v in range(m):
                if not S >> v & 1:
                    b = local_index[model.infect_target(S, v)]
                    rate = model.lam[S, v] * neighbours_with[i, :, v]
                    add(here, rate, np.full(size, (b - a) * powers[i]))
                elif q > 0:
                    lacking = net.degrees[i] - neighbours_with[i, :, v]
                    rate = q * model.mu[v] * lacking
                    add(here, rate, np.full(size, -a * powers[i]))
            if a and beta[i] > 0:
                add(here, np.full(size, float(beta[i])), np.full(size, -a * powers[i]))

    if rows:
        r, c, w = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    else:
        r = c = np.zeros(0, dtype=int)
        w = np.zeros(0)
    off = scipy.sparse.coo_matrix((w, (r, c)), shape=(size, size)).tocsr()
    out = np.asarray(off.sum(axis=1)).ravel()
    return (off - scipy.sparse.diags(out)).tocsr()


def initial_distribution(net: Network, model: VirusModel, seeding) -> np.ndarray:
    """Product distribution of independent per-host seeding (one virus at most per host)."""
    probs = seeding_matrix(net.n, model.m, seeding)
    sets = [0] + model.realizable_sets()
    K = len(sets)
    local = np.zeros((net.n, K))
    local[:, 0] = 1.0 - probs.sum(axis=1)
    for v in range(model.m):
        local[:, sets.index(1 << v)] = probs[:, v]
    p = np.ones(1)
    # host 0 is the least significant digit, so it varies fastest
    for i in range(net.n):
        p = np.outer(local[i], p).ravel()
    return p


def master_equation(
    net: Network,
    model: VirusModel,
    seeding,
    beta: Union[float, np.ndarray],
    q: float = 0.0,
    horizon: float = 1.0,
    grid: Optional[Sequence[float]] = None,
    h: float = DEFAULT_STEP,
    p0: Optional[np.ndarray] = None,
) -> MasterEquationResult:
    """
    Integrate ``dp/dt = p G`` with RK4 and marginalize per host.

    Args:
        net: Host network (tiny)
        model: Virus model
        seeding: Initial infection law, ignored when ``p0`` is given
        beta: Static patch rates
        q: Static filter probability
        horizon: Final time
        grid: Sample times
        h: RK4 step
        p0: Explicit initial joint distribution

    Raises:
        StateSpaceTooLarge: If the joint chain has more than 10^5 states
    """
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (net.n,)).copy()
    G_T = generator(net, model, beta, q).T.tocsr()
    p_init = initial_distribution(net, model, seeding) if p0 is None else np.asarray(p0, float)

    def field(t: float, p: np.ndarray) -> np.ndarray:
        return G_T @ p

    t, ps = integrate(p_init, field, horizon, h, grid)
    mass = ps.sum(axis=1)
    if np.max(np.abs(mass - 1.0)) > MASS_TOL:
        logger.warning("master equation mass drifted to %.3g", np.max(np.abs(mass - 1.0)))

    K = len(model.realizable_sets()) + 1
    powers = K ** np.arange(net.n)
    digits = (np.arange(len(p_init))[None, :] // powers[:, None]) % K
    host_sets = np.zeros((len(t), net.n, K - 1))
    for i in range(net.n):
        for k in range(1, K):
            host_sets[:, i, k - 1] = ps[:, digits[i] == k].sum(axis=1)
    logger.info("master equation: %d joint states, %d samples", len(p_init), len(t))
    return MasterEquationResult(t=t, host_sets=host_sets, mass=mass)
