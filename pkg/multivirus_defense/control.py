"""
Adaptive patching and filtering laws.

Each law exists in two forms. The ODE form drives the co-simulation with the
mean-field dynamics and is what the stability certificates analyse. The event
form is a detection-driven update applied by the Gillespie engine; it only
ever sees inspections and filter detections, never the latent probabilities.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import MultiVirusUnsupported
from .linalg import hurwitz
from .markov import SystemState
from .meanfield import (
    DEFAULT_STEP,
    AggregateClosure,
    Dynamics,
    SubsetStructure,
    aggregate_derivative,
    cap_row_sums,
    integrate,
)
from .network import Network
from .trajectory import Trajectory
from .virus import VirusModel

logger = logging.getLogger(__name__)

DEFAULT_BETA_FLOOR = 1e-3
CERTIFICATE_TOL = 1e-8


class ControllerKind(Enum):
    NONE = "none"
    MONOTONE = "monotone"
    NONMONOTONE = "nonmonotone"
    FILTER = "filter"
    JOINT = "joint"

    @property
    def patches(self) -> bool:
        return self in (ControllerKind.MONOTONE, ControllerKind.NONMONOTONE, ControllerKind.JOINT)

    @property
    def filters(self) -> bool:
        return self in (ControllerKind.FILTER, ControllerKind.JOINT)


@dataclass(frozen=True)
class ControllerConfig:
    """
    Gains and limits of an adaptive law.

    Attributes:
        kind: Which law runs
        alpha: Patch gain (> 0 for patching laws)
        gamma: Decrement gain of the non-monotone law, or filter gain
        beta_floor: Smallest patch rate the laws may reach (> 0)
        q_cap: Largest filter probability
        positive_part: Clamp the non-monotone ODE drift at zero
    """

    kind: ControllerKind = ControllerKind.NONE
    alpha: float = 0.0
    gamma: float = 0.0
    beta_floor: float = DEFAULT_BETA_FLOOR
    q_cap: float = 1.0
    positive_part: bool = True

    def __post_init__(self):
        if self.kind.patches and self.alpha <= 0:
            raise ValueError(f"{self.kind.value} patching needs alpha > 0, got {self.alpha}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")
        if self.beta_floor <= 0:
            raise ValueError(f"beta_floor must be positive, got {self.beta_floor}")
        if not 0 < self.q_cap <= 1:
            raise ValueError(f"q_cap must lie in (0, 1], got {self.q_cap}")

    def check_model(self, model: VirusModel) -> None:
        """
        Raises:
            MultiVirusUnsupported: If the non-monotone law meets several viruses
        """
        if self.kind is ControllerKind.NONMONOTONE and model.m != 1:
            raise MultiVirusUnsupported(
                f"the non-monotone law is single-virus, model has {model.m}"
            )

    def check_initial(self, beta0: np.ndarray, q0: float) -> None:
        if self.kind.patches and np.any(beta0 < self.beta_floor):
            raise ValueError("initial patch rates must be at least beta_floor")
        if self.kind.filters and not 0 < q0 <= self.q_cap:
            raise ValueError("filter laws need 0 < q(0) <= q_cap")


def monotone_patch_deriv(xbar: Union[float, np.ndarray], alpha: float):
    """``dbeta_i/dt = alpha xbar_i``."""
    return alpha * np.asarray(xbar, dtype=float) if np.ndim(xbar) else alpha * float(xbar)


def nonmonotone_patch_deriv(
    x: Union[float, np.ndarray], alpha: float, gamma: float, positive_part: bool = True
):
    """
    ``dbeta_i/dt = {alpha x_i - gamma (1 - x_i)}_+``.

    With ``positive_part=False`` the drift is left unclamped, which is the
    mean effect of the event rule (``+alpha/beta`` at rate ``beta x``,
    ``-gamma/beta`` at rate ``beta (1 - x)``).
    """
    drift = alpha * np.asarray(x, dtype=float) - gamma * (1.0 - np.asarray(x, dtype=float))
    if positive_part:
        drift = np.maximum(drift, 0.0)
    return drift if np.ndim(x) else float(drift)


def fixed_point(alpha: float, gamma: float, lam: float, degree: Union[int, np.ndarray]):
    """
    Interior equilibrium of the single-virus non-monotone law.

    Returns:
        ``(x*, beta*)`` with ``x* = gamma / (alpha + gamma)`` and
        ``beta* = alpha / (alpha + gamma) |N_i| lam``
    """
    x_star = gamma / (alpha + gamma)
    return x_star, alpha / (alpha + gamma) * np.asarray(degree) * lam


def filter_deriv(
    xbar_v: np.ndarray, net: Network, model: VirusModel, gamma: float, q: float = 0.0
) -> float:
    """
    ``dq/dt = gamma sum_{(i,j) in E} sum_v mu^v (x_i^v (1 - x_j^v) + x_j^v (1 - x_i^v))``
    while ``q < 1``, zero once filtering is complete.
    """
    if q >= 1.0:
        return 0.0
    xbar_v = np.asarray(xbar_v, dtype=float)
    A = net.adjacency.astype(float)
    per_virus = np.einsum("iv,ij,jv->v", xbar_v, A, 1.0 - xbar_v)
    return float(gamma * per_virus @ model.mu)


def monotone_patch_on_event(beta_i: float, alpha: float, infected: bool) -> float:
    """Inspection update: ``beta_i + alpha / beta_i`` when an infection is found."""
    return beta_i + alpha / beta_i if infected else beta_i


def nonmonotone_patch_on_event(
    beta_i: float, alpha: float, gamma: float, infected: bool, beta_floor: float
) -> float:
    """Infected inspection adds ``alpha / beta_i``; clean inspection removes ``gamma / beta_i``."""
    if infected:
        return beta_i + alpha / beta_i
    return max(beta_i - gamma / beta_i, beta_floor)


def filter_on_event(q: float, gamma: float, q_cap: float = 1.0) -> float:
    """Detection update ``min(q + gamma / q, q_cap)``."""
    return min(q + gamma / q, q_cap)


class DetectionController:
    """
    Event form of a :class:`ControllerConfig`, pluggable into the Gillespie engine.

    The controller holds no trial state: it updates the rates stored in the
    :class:`SystemState` it is handed, so one instance serves every trial.
    """

    def __init__(self, config: ControllerConfig):
        self.config = config
        self.clean_inspections = config.kind is ControllerKind.NONMONOTONE

    def on_patch(self, state: SystemState, host: int, infected: bool) -> None:
        cfg = self.config
        if cfg.kind in (ControllerKind.MONOTONE, ControllerKind.JOINT):
            state.beta[host] = monotone_patch_on_event(state.beta[host], cfg.alpha, infected)
        elif cfg.kind is ControllerKind.NONMONOTONE:
            state.beta[host] = nonmonotone_patch_on_event(
                state.beta[host], cfg.alpha, cfg.gamma, infected, cfg.beta_floor
            )

    def on_filter(self, state: SystemState, host: int, virus: int) -> None:
        if self.config.kind.filters:
            state.q = filter_on_event(state.q, self.config.gamma, self.config.q_cap)


def make_controller(config: ControllerConfig, model: VirusModel) -> Optional[DetectionController]:
    config.check_model(model)
    return None if config.kind is ControllerKind.NONE else DetectionController(config)


def _patch_drift(config: ControllerConfig, xbar: np.ndarray) -> np.ndarray:
    if config.kind in (ControllerKind.MONOTONE, ControllerKind.JOINT):
        return monotone_patch_deriv(xbar, config.alpha)
    if config.kind is ControllerKind.NONMONOTONE:
        return nonmonotone_patch_deriv(xbar, config.alpha, config.gamma, config.positive_part)
    return np.zeros_like(xbar)


def simulate_adaptive(
    net: Network,
    model: VirusModel,
    config: ControllerConfig,
    x0: np.ndarray,
    beta0: Union[float, np.ndarray],
    q0: float = 0.0,
    horizon: float = 1.0,
    h: float = DEFAULT_STEP,
    grid: Optional[Sequence[float]] = None,
    dynamics: Dynamics = Dynamics.SUBSET,
) -> Trajectory:
    """
    Co-integrate the mean-field dynamics with the ODE form of the law.

    Args:
        x0: Initial per-host per-set probabilities ``(n, |R|)``
        beta0: Initial patch rates
        q0: Initial filter probability
        dynamics: SUBSET integrates ``(x, beta, q)``; AGGREGATE integrates
                  ``(xbar, beta)`` with the closed aggregate dynamics and
                  supports the patching laws only

    Raises:
        MultiVirusUnsupported: Non-monotone law with several viruses
        ValueError: Filter laws on the aggregate dynamics
    """
    config.check_model(model)
    n = net.n
    beta0 = np.broadcast_to(np.asarray(beta0, dtype=float), (n,)).copy()
    config.check_initial(beta0, q0)
    floor = config.beta_floor if config.kind.patches else 0.0

    if dynamics is Dynamics.AGGREGATE:
        if config.kind.filters:
            raise ValueError("filter laws need per-virus marginals: use the subset dynamics")
        y0 = np.concatenate([np.asarray(x0, dtype=float).sum(axis=1), beta0])

        def field(t: float, y: np.ndarray) -> np.ndarray:
            xbar, beta = y[:n], y[n:]
            dx = aggregate_derivative(xbar, None, net, model, beta, AggregateClosure.CLOSED)
            return np.concatenate([dx, _patch_drift(config, xbar)])

        def project(y: np.ndarray) -> np.ndarray:
            y[n:] = np.maximum(y[n:], floor)
            return y

        box = np.zeros(2 * n, dtype=bool)
        box[:n] = True
        t, ys = integrate(y0, field, horizon, h, grid, box=box, project=project)
        xbar, beta = ys[:, :n], ys[:, n:]
        K = len(t)
        return Trajectory(
            t=t,
            host_virus=np.repeat(xbar[:, :, None], model.m, axis=2),
            host_any=xbar,
            beta=beta,
            q=np.full(K, float(q0)),
            se_any=np.zeros(K),
            se_virus=np.zeros((K, model.m)),
        )

    structure = SubsetStructure(model)
    A = net.adjacency.astype(float)
    degrees = net.degrees.astype(float)
    R = structure.K
    split = n * R

    def field(t: float, y: np.ndarray) -> np.ndarray:
        x = y[:split].reshape(n, R)
        beta, q = y[split : split + n], float(y[-1])
        dx = structure.derivative(x, A, degrees, beta, q)
        dq = 0.0
        if config.kind.filters and q < config.q_cap:
            dq = filter_deriv(x @ structure.H, net, model, config.gamma, q)
        return np.concatenate([dx.ravel(), _patch_drift(config, x.sum(axis=1)), [dq]])

    def project(y: np.ndarray) -> np.ndarray:
        y[:split] = cap_row_sums(y[:split].reshape(n, R)).ravel()
        y[split : split + n] = np.maximum(y[split : split + n], floor)
        y[-1] = min(y[-1], config.q_cap)
        return y

    y0 = np.concatenate([np.asarray(x0, dtype=float).ravel(), beta0, [q0]])
    box = np.zeros(y0.shape, dtype=bool)
    box[:split] = True
    box[-1] = True
    t, ys = integrate(y0, field, horizon, h, grid, box=box, project=project)
    xs = ys[:, :split].reshape(len(t), n, R)
    K = len(t)
    logger.info("adaptive %s co-simulation finished at t=%g", config.kind.value, horizon)
    return Trajectory(
        t=t,
        host_virus=xs @ structure.H,
        host_any=xs.sum(axis=2),
        beta=ys[:, split : split + n],
        q=ys[:, -1],
        se_any=np.zeros(K),
        se_virus=np.zeros((K, model.m)),
        host_sets=xs,
    )


def linearized_jacobian(
    net: Network, alpha: float, gamma: float, lam: float, drop_isolated: bool = True
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Jacobian of the unclamped single-virus non-monotone system at its interior fixed point.

    State order is ``(x_1..x_n, beta_1..beta_n)``; the matrix is
    ``[[Abar, -gamma/(alpha+gamma) I], [(alpha+gamma) I, 0]]`` with
    ``Abar_ii = -|N_i| lam`` and ``Abar_ij = lam alpha / (alpha+gamma)`` on edges.
    Isolated hosts have no interior equilibrium and are left out when
    ``drop_isolated`` is set.

    Returns:
        ``(jacobian, hosts)`` where ``hosts`` lists the hosts kept, in order
    """
    hosts = np.flatnonzero(net.degrees > 0) if drop_isolated else np.arange(net.n)
    A = net.adjacency[np.ix_(hosts, hosts)].astype(float)
    k = len(hosts)
    Abar = lam * alpha / (alpha + gamma) * A - np.diag(net.degrees[hosts] * lam)
    eye = np.eye(k)
    J = np.block([[Abar, -gamma / (alpha + gamma) * eye], [(alpha + gamma) * eye, np.zeros((k, k))]])
    if k < net.n:
        logger.info("linearization drops %d isolated host(s)", net.n - k)
    return J, hosts


def fixed_point_is_stable(net: Network, alpha: float, gamma: float, lam: float) -> bool:
    """Lyapunov-equation certificate that the linearization is Hurwitz."""
    J, _ = linearized_jacobian(net, alpha, gamma, lam)
    return hurwitz(J)


def _aggregate_rates(
    xbar: np.ndarray, beta: np.ndarray, net: Network, model: VirusModel
) -> np.ndarray:
    return np.array(
        [
            aggregate_derivative(x, None, net, model, b, AggregateClosure.CLOSED)
            for x, b in zip(xbar, beta)
        ]
    )


def aggregate_passivity_certificate(
    xbar: np.ndarray, beta: np.ndarray, net: Network, model: VirusModel
) -> float:
    """
    Largest excess of ``d/dt (1/2 |xbar|^2)`` over ``sum_i (|N_i| lam_hat - beta_i) xbar_i^2``
    at the sampled states ``xbar, beta`` of shape ``(K, n)``.
    """
    rates = _aggregate_rates(xbar, beta, net, model)
    lhs = np.sum(xbar * rates, axis=1)
    rhs = np.sum((net.degrees * model.lam_hat - beta) * xbar**2, axis=1)
    return float(np.max(lhs - rhs))


def storage_gradient(beta: np.ndarray, net: Network, model: VirusModel, alpha: float) -> np.ndarray:
    """``Gamma_i'(beta_i)``: ``-(|N_i| lam_hat - beta_i) / alpha`` below ``|N_i| lam_hat``, else 0."""
    gap = net.degrees * model.lam_hat - beta
    return np.where(gap > 0, -gap / alpha, 0.0)


def lasalle_certificate(
    xbar: np.ndarray, beta: np.ndarray, net: Network, model: VirusModel, alpha: float
) -> float:
    """
    Largest value of ``dW/dt`` for ``W = 1/2 |xbar|^2 + sum_i Gamma_i(beta_i)``
    along the monotone law; nonpositive up to ``CERTIFICATE_TOL`` when it holds.
    """
    rates = _aggregate_rates(xbar, beta, net, model)
    dW = np.sum(xbar * rates, axis=1) + np.sum(
        storage_gradient(beta, net, model, alpha) * alpha * xbar, axis=1
    )
    return float(np.max(dW))
