"""
Minimum-cost static patching rates under the semidefinite removal condition.

A rate vector ``beta`` removes every virus at exponential rate ``eps`` when
``B - Qbar - eps I`` is positive semidefinite, with ``B`` the block-diagonal
matrix repeating ``beta_i`` over host ``i``'s block. The single constraint
``g(beta) = mu_1(Qbar + eps I - B) <= 0`` is handled by an exact penalty
minimized with projected subgradient steps.
"""

import logging
import tomllib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError, DomainError, NotConverged
from .linalg import eig_sym, top_eig
from .meanfield import DEFAULT_STEP, simulate_subset
from .network import Network
from .passivity import CouplingForm, build_Qbar
from .trajectory import check_grid, default_grid
from .utils import reject_unknown_keys
from .virus import VirusModel

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9
CONSTRAINT_TOL = 1e-6
COST_RTOL = 1e-6
STALL_WINDOW = 50
ENVELOPE_RTOL = 1e-6


class LinearCost:
    """``c(beta) = sum_i c_i beta_i``."""

    def __init__(self, coefficients: Sequence[float]):
        self.coefficients = np.asarray(coefficients, dtype=float)
        if np.any(self.coefficients < 0):
            raise ValueError("cost coefficients must be nonnegative")

    def value(self, beta: np.ndarray) -> float:
        return float(self.coefficients @ beta)

    def slope(self, beta: np.ndarray) -> np.ndarray:
        return self.coefficients.copy()

    def max_slope(self) -> np.ndarray:
        return self.coefficients


class PiecewiseLinearCost:
    """
    Convex increasing piecewise-linear cost shared by all hosts.

    ``slopes[k]`` applies on ``[breakpoints[k], breakpoints[k+1])`` and the
    last slope continues to infinity. ``weights`` scales each host's cost.
    """

    def __init__(
        self,
        breakpoints: Sequence[float],
        slopes: Sequence[float],
        weights: Optional[Sequence[float]] = None,
    ):
        self.breakpoints = np.asarray(breakpoints, dtype=float)
        self.slopes = np.asarray(slopes, dtype=float)
        if len(self.breakpoints) != len(self.slopes) or self.breakpoints[0] != 0.0:
            raise ValueError("need one slope per breakpoint, starting at 0")
        if np.any(np.diff(self.breakpoints) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(self.slopes < 0) or np.any(np.diff(self.slopes) < 0):
            raise ValueError("slopes must be nonnegative and nondecreasing")
        self.weights = None if weights is None else np.asarray(weights, dtype=float)

    def _scale(self, n: int) -> np.ndarray:
        return np.ones(n) if self.weights is None else self.weights

    def _per_host(self, beta: np.ndarray) -> np.ndarray:
        ends = np.append(self.breakpoints[1:], np.inf)
        covered = np.clip(beta[:, None] - self.breakpoints, 0.0, ends - self.breakpoints)
        return covered @ self.slopes

    def value(self, beta: np.ndarray) -> float:
        return float(self._scale(len(beta)) @ self._per_host(beta))

    def slope(self, beta: np.ndarray) -> np.ndarray:
        piece = np.searchsorted(self.breakpoints, beta, side="right") - 1
        return self._scale(len(beta)) * self.slopes[np.clip(piece, 0, None)]

    def max_slope(self) -> np.ndarray:
        return self.slopes[-1] * (1.0 if self.weights is None else self.weights)


Cost = Union[LinearCost, PiecewiseLinearCost]


@dataclass
class DesignProblem:
    """
    Attributes:
        Qbar: Network coupling matrix (host-major blocks)
        n: Number of hosts
        eps: Required decay rate (> 0)
        cost: Per-host convex increasing cost; unit linear cost when None

    Raises:
        DomainError: If ``eps <= 0``
    """

    Qbar: np.ndarray
    n: int
    eps: float
    cost: Optional[Cost] = None

    def __post_init__(self):
        if self.eps <= 0:
            raise DomainError(f"decay rate must be positive, got {self.eps}")
        if self.cost is None:
            self.cost = LinearCost(np.ones(self.n))

    @property
    def block(self) -> int:
        return self.Qbar.shape[0] // self.n

    @classmethod
    def from_model(
        cls,
        net: Network,
        model: VirusModel,
        eps: float,
        cost: Optional[Cost] = None,
        form: CouplingForm = CouplingForm.LEMMA,
    ) -> "DesignProblem":
        return cls(build_Qbar(net, model, form), net.n, eps, cost)


@dataclass
class DesignResult:
    beta: np.ndarray
    cost: float
    margin: float
    iterations: int
    converged: bool


def _expand(beta: np.ndarray, block: int) -> np.ndarray:
    return np.repeat(beta, block)


def margin(beta: np.ndarray, eps: float, Qbar: np.ndarray) -> float:
    """``lambda_min(B - Qbar - eps I)``."""
    block = Qbar.shape[0] // len(beta)
    M = np.diag(_expand(np.asarray(beta, dtype=float), block)) - Qbar
    return float(eig_sym(M)[0]) - eps


def feasible(beta: np.ndarray, eps: float, Qbar: np.ndarray) -> Tuple[bool, float]:
    """
    Certify ``B - Qbar - eps I >= 0``.

    Returns:
        ``(feasible, margin)`` with feasibility meaning ``margin >= -1e-9``
    """
    m = margin(beta, eps, Qbar)
    return m >= -FEASIBILITY_TOL, m


def uniform_rate(
    net: Network, model: VirusModel, eps: float, form: CouplingForm = CouplingForm.LEMMA
) -> float:
    """Smallest feasible uniform rate ``mu_1(Qbar) + eps``."""
    Qbar = build_Qbar(net, model, form)
    return float(eig_sym(Qbar)[-1]) + eps


def _constraint(beta: np.ndarray, problem: DesignProblem) -> Tuple[float, np.ndarray]:
    """``g(beta)`` and one subgradient."""
    block = problem.block
    M = problem.Qbar - np.diag(_expand(beta, block))
    value, vector = top_eig(M)
    weights = (vector**2).reshape(problem.n, block).sum(axis=1)
    return value + problem.eps, -weights


def _polish(beta: np.ndarray, problem: DesignProblem, floor: np.ndarray) -> np.ndarray:
    """Lower each rate in turn by bisection while the design stays feasible."""
    beta = beta.copy()
    for i in range(problem.n):
        lo, hi = floor[i], beta[i]
        if hi - lo <= 1e-12:
            continue
        trial = beta.copy()
        trial[i] = lo
        if margin(trial, problem.eps, problem.Qbar) >= 0.0:
            beta[i] = lo
            continue
        while hi - lo > 1e-10 * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            trial[i] = mid
            if margin(trial, problem.eps, problem.Qbar) >= 0.0:
                hi = mid
            else:
                lo = mid
        beta[i] = hi
    return beta


def design_min_cost(problem: DesignProblem, max_iters: int = 2000) -> DesignResult:
    """
    Minimize ``cost(beta)`` subject to ``mu_1(Qbar + eps I - B) <= 0`` and ``beta >= 0``.

    Starts from the smallest feasible uniform rate, takes Polyak-type projected
    subgradient steps on ``cost + kappa max(g, 0)`` toward a diagonal lower
    bound of the optimum, keeps the cheapest feasible iterate, then lowers
    each host's rate by bisection and, if needed, shifts all rates up to
    restore a certified margin.

    Raises:
        NotConverged: If no feasible iterate was ever found
    """
    cost = problem.cost
    assert cost is not None
    n, block = problem.n, problem.block
    diag = np.diag(problem.Qbar).reshape(n, block).max(axis=1) if n else np.zeros(0)
    floor = np.maximum(diag + problem.eps, 0.0)
    kappa = 2.0 * float(np.sum(cost.max_slope())) or 1.0
    target = cost.value(floor)

    top = float(eig_sym(problem.Qbar)[-1]) if problem.Qbar.size else 0.0
    beta = np.full(n, max(top + problem.eps, 0.0))
    best: Optional[np.ndarray] = None
    best_cost = np.inf
    history = []
    converged = False

    it = 0
    for it in range(1, max_iters + 1):
        g, g_sub = _constraint(beta, problem)
        value = cost.value(beta)
        if g <= CONSTRAINT_TOL and value < best_cost:
            best, best_cost = beta.copy(), value
        history.append(best_cost)
        if len(history) > STALL_WINDOW:
            old = history[-STALL_WINDOW - 1]
            if np.isfinite(old) and abs(old - best_cost) <= COST_RTOL * max(abs(best_cost), 1.0):
                converged = True
                break

        sub = cost.slope(beta) + (kappa * g_sub if g > 0 else 0.0)
        norm2 = float(sub @ sub)
        if norm2 == 0.0:
            converged = True
            break
        objective = value + kappa * max(g, 0.0)
        step = max(objective - target, 1e-3 * max(objective, 1.0) / np.sqrt(it)) / norm2
        beta = np.maximum(beta - step * sub, 0.0)

    if best is None:
        raise NotConverged(f"no feasible design found in {max_iters} iterations")
    if not converged:
        logger.warning("static design stopped at max_iters=%d; returning best feasible", max_iters)

    beta = _polish(best, problem, np.minimum(floor, best))
    ok, m = feasible(beta, problem.eps, problem.Qbar)
    if m < 0.0:
        beta = beta + (-m)
        ok, m = feasible(beta, problem.eps, problem.Qbar)
    logger.info(
        "static design: cost %.6g after %d iterations (margin %.3g)", cost.value(beta), it, m
    )
    return DesignResult(
        beta=beta, cost=cost.value(beta), margin=m, iterations=it, converged=converged
    )


@dataclass
class DecayCheck:
    passed: bool
    worst_ratio: float
    t: np.ndarray
    norms: np.ndarray
    envelope: np.ndarray


def verify_exponential_decay(
    beta: Union[float, np.ndarray],
    eps: float,
    net: Network,
    model: VirusModel,
    x0: np.ndarray,
    horizon: float,
    grid: Optional[Sequence[float]] = None,
    h: float = DEFAULT_STEP,
) -> DecayCheck:
    """
    Integrate the unfiltered subset dynamics and compare ``|x(t)|_2`` with
    ``sqrt(n) exp(-eps t)`` at every grid point.
    """
    grid = check_grid(default_grid(horizon) if grid is None else np.asarray(grid), horizon)
    traj = simulate_subset(net, model, x0, beta, 0.0, horizon, h, grid)
    assert traj.host_sets is not None
    norms = np.sqrt((traj.host_sets**2).sum(axis=(1, 2)))
    envelope = np.sqrt(net.n) * np.exp(-eps * traj.t) * (1 + ENVELOPE_RTOL)
    ratio = norms / envelope
    worst = float(ratio.max())
    return DecayCheck(worst <= 1.0, worst, traj.t, norms, envelope)


_COST_KEYS = {"coefficients", "breakpoints", "slopes", "weights"}


def parse_costs(text: str, n: int) -> Cost:
    """
    Read a cost file: either ``coefficients = [...]`` (linear, one per host)
    or ``breakpoints``/``slopes`` with optional ``weights`` (piecewise).
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML: {e}") from e
    reject_unknown_keys(data, _COST_KEYS, text)
    try:
        if "coefficients" in data:
            coefficients = np.asarray(data["coefficients"], dtype=float)
            if coefficients.shape != (n,):
                raise ConfigError(f"expected {n} coefficients", field="coefficients")
            return LinearCost(coefficients)
        if "breakpoints" in data and "slopes" in data:
            return PiecewiseLinearCost(data["breakpoints"], data["slopes"], data.get("weights"))
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), field="costs") from e
    raise ConfigError("cost file needs coefficients or breakpoints and slopes", field="costs")


def load_costs(spec: Union[str, Path], n: int) -> Cost:
    """``"uniform"`` gives unit linear costs; anything else is a cost file path."""
    if str(spec) == "uniform":
        return LinearCost(np.ones(n))
    return parse_costs(Path(spec).read_text(), n)
