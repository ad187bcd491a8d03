"""
Design matrices of the passivity analysis and storage-function checks.

All matrices are indexed by the realizable sets in ascending bitmask order;
the stacked state of the whole network is host-major, so host ``i`` owns the
block ``[i*|R|, (i+1)*|R|)`` of ``Qbar``.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Union

import numpy as np

from .linalg import eig_sym
from .meanfield import SubsetStructure
from .network import Network
from .virus import VirusModel, bits, submasks

logger = logging.getLogger(__name__)

DECREMENT_TOL = 1e-8


class CouplingForm(Enum):
    """
    Which quadratic form bounds the storage derivative.

    Attributes:
        LEMMA: ``Qbar = A (x) Q + blockdiag(Q_i)`` with the closed-form
               diagonal ``Q_i`` and ``Q = H Lambda H^T``
        CONSERVATIVE: ``Qbar = A (x) sym(C H^T)`` where ``C[S, v]`` sums the
                      inflow rates into ``S`` through virus ``v``; dominates
                      the storage derivative on every valid state
    """

    LEMMA = "lemma"
    CONSERVATIVE = "conservative"


def build_Qi(degree: int, model: VirusModel) -> np.ndarray:
    """
    Diagonal of ``Q_i`` over the realizable sets.

    ``Q_i(S, S) = (|N_i| / 6) sum_{v in S} sum_{R subset C_v} 2^{|V \\ C_v| - 1} lam^{S \\ v | R, v}``.

    Examples:
        >>> build_Qi(3, coexisting([1.0, 2.0]))
        array([1., 2., 3.])
    """
    m = model.m
    diag = []
    for S in model.realizable_sets():
        total = 0.0
        for v in bits(S):
            weight = 2.0 ** (m - bin(model.compete[v]).count("1") - 1)
            base = S & ~(1 << v)
            total += weight * sum(model.lam[base | R, v] for R in submasks(model.compete[v]))
        diag.append(degree / 6.0 * total)
    return np.array(diag)


def lambda_weights(model: VirusModel) -> np.ndarray:
    """``Lambda_vv = (1/12) sum_{S : v not in S} lam^{S, v}`` over all subsets ``S``."""
    return np.array(
        [
            sum(model.lam[S, v] for S in range(1 << model.m) if not S >> v & 1) / 12.0
            for v in range(model.m)
        ]
    )


def build_Q(model: VirusModel) -> np.ndarray:
    """``Q = H Lambda H^T``, positive semidefinite."""
    H = model.membership()
    return H @ np.diag(lambda_weights(model)) @ H.T


def inflow_weights(model: VirusModel) -> np.ndarray:
    """``C[S, v] = [v in S] sum_{R subset C_v} lam^{S \\ v | R, v}`` over realizable ``S``."""
    sets = model.realizable_sets()
    C = np.zeros((len(sets), model.m))
    for k, S in enumerate(sets):
        for v in bits(S):
            base = S & ~(1 << v)
            C[k, v] = sum(model.lam[base | R, v] for R in submasks(model.compete[v]))
    return C


def build_Qbar(
    net: Network, model: VirusModel, form: CouplingForm = CouplingForm.LEMMA
) -> np.ndarray:
    """Network-wide coupling matrix of the requested form, size ``n |R|``."""
    A = net.adjacency.astype(float)
    if form is CouplingForm.CONSERVATIVE:
        M = inflow_weights(model) @ model.membership().T
        return np.kron(A, 0.5 * (M + M.T))
    per_degree: Dict[int, np.ndarray] = {}
    blocks = []
    for d in net.degrees:
        d = int(d)
        if d not in per_degree:
            per_degree[d] = build_Qi(d, model)
        blocks.append(per_degree[d])
    return np.kron(A, build_Q(model)) + np.diag(np.concatenate(blocks))


@dataclass
class DesignMatrices:
    """
    Attributes:
        sets: Realizable sets indexing every per-host block
        Qi: Diagonals of the ``Q_i``, shape ``(n, |R|)``
        H: Membership matrix ``(|R|, m)``
        Lambda: Diagonal of ``Lambda``
        Q: ``H Lambda H^T``
        Qbar: Network coupling matrix of the chosen form
        form: Form used for ``Qbar``
        rho: ``max_i mu_1(Q_i + |N_i| Q)``
        host_bounds: ``mu_1(Q_i + |N_i| Q)`` per host
    """

    sets: list
    Qi: np.ndarray
    H: np.ndarray
    Lambda: np.ndarray
    Q: np.ndarray
    Qbar: np.ndarray
    form: CouplingForm
    rho: float
    host_bounds: np.ndarray

    @property
    def top_eigenvalue(self) -> float:
        """``mu_1(Qbar)``."""
        return float(eig_sym(self.Qbar)[-1]) if self.Qbar.size else 0.0


def host_bounds(net: Network, model: VirusModel) -> np.ndarray:
    Q = build_Q(model)
    cache: Dict[int, float] = {}
    out = np.zeros(net.n)
    for i, d in enumerate(net.degrees):
        d = int(d)
        if d not in cache:
            cache[d] = float(eig_sym(np.diag(build_Qi(d, model)) + d * Q)[-1])
        out[i] = cache[d]
    return out


def passivity_index_bound(net: Network, model: VirusModel) -> float:
    """
    ``rho = max_i mu_1(Q_i + |N_i| Q)``.

    Hosts of equal degree share one eigenproblem.
    """
    return float(host_bounds(net, model).max()) if net.n else 0.0


def design_matrices(
    net: Network, model: VirusModel, form: CouplingForm = CouplingForm.LEMMA
) -> DesignMatrices:
    bounds = host_bounds(net, model)
    return DesignMatrices(
        sets=model.realizable_sets(),
        Qi=np.array([build_Qi(int(d), model) for d in net.degrees]),
        H=model.membership(),
        Lambda=lambda_weights(model),
        Q=build_Q(model),
        Qbar=build_Qbar(net, model, form),
        form=form,
        rho=float(bounds.max()) if net.n else 0.0,
        host_bounds=bounds,
    )


def storage_rate(
    states: np.ndarray, net: Network, model: VirusModel, beta: Union[float, np.ndarray]
) -> np.ndarray:
    """
    ``dW/dt`` of ``W = 1/2 |x|^2`` along the unfiltered subset dynamics.

    Args:
        states: Stack of states, shape ``(T, n, |R|)``
    """
    structure = SubsetStructure(model)
    A = net.adjacency.astype(float)
    degrees = net.degrees.astype(float)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (net.n,))
    return np.array(
        [float(np.sum(x * structure.derivative(x, A, degrees, beta, 0.0))) for x in states]
    )


def verify_storage_decrement(
    states: np.ndarray,
    beta: Union[float, np.ndarray],
    net: Network,
    model: VirusModel,
    form: CouplingForm = CouplingForm.LEMMA,
    Qbar: Optional[np.ndarray] = None,
) -> float:
    """
    Largest excess of ``dW/dt`` over ``x^T Qbar x + u^T x`` with ``u_i = -beta_i x_i``.

    The decrement holds when the returned value is at most ``DECREMENT_TOL``.

    Args:
        states: Stack of states ``(T, n, |R|)``, e.g. ``Trajectory.host_sets``
        beta: Patch rates used for the dynamics and the input ``u``
        net: Host network
        model: Virus model
        form: Coupling form for ``Qbar``
        Qbar: Precomputed coupling matrix (skips the assembly)
    """
    states = np.asarray(states, dtype=float)
    if Qbar is None:
        Qbar = build_Qbar(net, model, form)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (net.n,))
    flat = states.reshape(len(states), -1)
    quadratic = np.einsum("ta,ab,tb->t", flat, Qbar, flat)
    supply = -np.einsum("i,tik->t", beta, states**2)
    excess = storage_rate(states, net, model, beta) - (quadratic + supply)
    worst = float(excess.max()) if excess.size else 0.0
    logger.debug("storage decrement (%s): worst excess %.3g", form.value, worst)
    return worst


def random_valid_states(
    count: int, n: int, sets: int, rng: np.random.Generator
) -> np.ndarray:
    """
    Uniform samples of valid states (nonnegative, per-host sums at most one).

    Each host draws a point of the simplex over its sets plus the clean state.
    """
    draws = rng.dirichlet(np.ones(sets + 1), size=(count, n))
    return draws[:, :, :sets]
