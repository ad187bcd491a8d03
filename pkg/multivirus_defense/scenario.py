"""
Scenario files, the built-in experiment suite and its orchestration.

A scenario is a TOML document with a ``name`` and five tables:
``[network]``, ``[model]``, ``[seeding]``, ``[defense]`` and ``[run]``.
Every key is optional except ``name``; the dataclasses below hold the
defaults. ``run.kind`` selects what :func:`run_scenario` does:

- ``static``: mean-field, aggregate and Monte-Carlo runs under fixed rates,
  with the domination and storage-decrement checks
- ``adaptive``: co-simulation of an adaptive law, swept over one gain
- ``design``: minimum-cost static design for every decay rate in ``defense.eps``
- ``oracle``: Monte-Carlo against the exact master equation on a tiny network
"""

import json
import logging
import tomllib
import typing
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from . import network as netmod
from .bounds import check_filter_rate, check_final_patch_sum, check_patch_rate_curve, check_q_final
from .control import (
    CERTIFICATE_TOL,
    ControllerConfig,
    ControllerKind,
    fixed_point,
    fixed_point_is_stable,
    lasalle_certificate,
    make_controller,
    aggregate_passivity_certificate,
    simulate_adaptive,
)
from .design import (
    DesignProblem,
    design_min_cost,
    feasible,
    load_costs,
    uniform_rate,
    verify_exponential_decay,
)
from .errors import ConfigError, SingularLyapunov
from .markov import monte_carlo
from .master_equation import MASS_TOL, master_equation
from .meanfield import (
    Dynamics,
    initial_state,
    seeding_matrix,
    simulate_aggregate,
    simulate_subset,
)
from .network import Network
from .passivity import (
    DECREMENT_TOL,
    CouplingForm,
    build_Qbar,
    passivity_index_bound,
    random_valid_states,
    verify_storage_decrement,
)
from .reports import ScenarioReport
from .trajectory import default_grid
from .utils import locate_key, reject_unknown_keys, trial_rng, write_csv
from .virus import VirusModel, from_rates, load_model

logger = logging.getLogger(__name__)

REMOVAL_LEVEL = 1e-3
DOMINATION_TOL = 1e-6
FIXED_POINT_TOL = 0.02
SE_FACTOR = 3.0

# Streams for scenario-level draws; trial k uses stream k.
SETUP_STREAM = 2**32 - 1
STATES_STREAM = 2**32 - 2

NETWORK_KINDS = ("erdos_renyi", "complete", "cycle", "path", "file")
SEEDING_LAWS = ("fixed", "uniform")
RUN_KINDS = ("static", "adaptive", "design", "oracle")


@dataclass
class NetworkSpec:
    kind: str = "erdos_renyi"
    n: int = 100
    p: float = 0.2
    seed: int = 1
    file: Optional[str] = None


@dataclass
class ModelSpec:
    """Either a model ``file`` or set-independent ``lambdas`` with optional ``mu``."""

    file: Optional[str] = None
    lambdas: List[float] = field(default_factory=lambda: [1.0, 2.0])
    mu: Optional[List[float]] = None
    competing: bool = False


@dataclass
class SeedingSpec:
    """
    Initial infection law.

    ``fixed``: every host starts infected with probability ``prob``, split
    evenly over the viruses. ``uniform``: host ``i`` draws its probability
    from ``U[0, prob]``.
    """

    law: str = "fixed"
    prob: float = 0.4


@dataclass
class DefenseSpec:
    """
    Static rates, the adaptive law and the design targets.

    ``beta_law = "uniform"`` draws ``beta_i(0)`` from ``U[beta_floor, beta_max]``.
    ``sweep`` lists values of the swept gain (``gamma`` for the filter law,
    ``alpha`` otherwise).
    """

    beta: float = 10.0
    beta_law: str = "fixed"
    beta_max: Optional[float] = None
    q: float = 0.0
    controller: str = "none"
    alpha: float = 0.0
    gamma: float = 0.0
    beta_floor: float = 1e-3
    positive_part: bool = True
    sweep: List[float] = field(default_factory=list)
    eps: List[float] = field(default_factory=list)
    costs: str = "uniform"
    form: str = "lemma"
    negative_clique: int = 10


@dataclass
class RunSpec:
    """``dynamics`` left unset picks aggregate for the monotone law and subset otherwise."""

    kind: str = "static"
    horizon: float = 10.0
    grid_points: int = 101
    h: float = 1e-3
    seed: int = 0
    trials: int = 100
    monte_carlo: bool = True
    dynamics: Optional[str] = None
    random_states: int = 10000


@dataclass
class Scenario:
    name: str
    description: str = ""
    network: NetworkSpec = field(default_factory=NetworkSpec)
    model: ModelSpec = field(default_factory=ModelSpec)
    seeding: SeedingSpec = field(default_factory=SeedingSpec)
    defense: DefenseSpec = field(default_factory=DefenseSpec)
    run: RunSpec = field(default_factory=RunSpec)
    source_dir: Optional[Path] = field(default=None, compare=False, repr=False)

    @property
    def grid(self) -> np.ndarray:
        return default_grid(self.run.horizon, self.run.grid_points)


_SECTIONS = {
    "network": NetworkSpec,
    "model": ModelSpec,
    "seeding": SeedingSpec,
    "defense": DefenseSpec,
    "run": RunSpec,
}
_TOP_KEYS = {"name", "description", *_SECTIONS}


def _coerce(value: Any, annotation: Any, path: str, text: str) -> Any:
    def fail(expected: str):
        key = path.rsplit(".", 1)[-1]
        raise ConfigError(
            f"expected {expected}, got {type(value).__name__}",
            field=path,
            line=locate_key(text, key),
        )

    if typing.get_origin(annotation) is Union:
        inner = [a for a in typing.get_args(annotation) if a is not type(None)]
        return _coerce(value, inner[0], path, text)
    if typing.get_origin(annotation) is list:
        if not isinstance(value, list):
            fail("a list")
        (item,) = typing.get_args(annotation)
        return [_coerce(v, item, path, text) for v in value]
    if annotation is bool:
        if not isinstance(value, bool):
            fail("a boolean")
        return value
    if annotation is int:
        if isinstance(value, bool) or not isinstance(value, int):
            fail("an integer")
        return value
    if annotation is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            fail("a number")
        return float(value)
    if annotation is str:
        if not isinstance(value, str):
            fail("a string")
        return value
    raise TypeError(f"unsupported field type {annotation}")


def _section(cls, data: Dict[str, Any], prefix: str, text: str):
    if not isinstance(data, dict):
        raise ConfigError("expected a table", field=prefix, line=locate_key(text, prefix))
    allowed = {f.name: f for f in fields(cls)}
    reject_unknown_keys(data, allowed, text, prefix=prefix)
    hints = typing.get_type_hints(cls)
    values = {
        key: _coerce(value, hints[key], f"{prefix}.{key}", text) for key, value in data.items()
    }
    return cls(**values)


def _require(condition: bool, message: str, path: str, text: str) -> None:
    if not condition:
        key = path.rsplit(".", 1)[-1]
        raise ConfigError(message, field=path, line=locate_key(text, key))


def _validate(s: Scenario, text: str) -> None:
    net, mod, seed, dfn, run = s.network, s.model, s.seeding, s.defense, s.run
    _require(net.kind in NETWORK_KINDS, f"unknown network kind '{net.kind}'", "network.kind", text)
    _require(net.kind != "file" or net.file is not None, "file networks need 'file'", "network.file", text)
    _require(net.n >= 1, "host count must be positive", "network.n", text)
    _require(0.0 <= net.p <= 1.0, "edge probability must lie in [0, 1]", "network.p", text)
    _require(mod.file is not None or len(mod.lambdas) > 0, "lambdas must not be empty", "model.lambdas", text)
    _require(all(v >= 0 for v in mod.lambdas), "infection rates must be nonnegative", "model.lambdas", text)
    _require(
        mod.mu is None or len(mod.mu) == len(mod.lambdas),
        "mu needs one entry per virus",
        "model.mu",
        text,
    )
    _require(seed.law in SEEDING_LAWS, f"unknown seeding law '{seed.law}'", "seeding.law", text)
    _require(0.0 <= seed.prob <= 1.0, "probability must lie in [0, 1]", "seeding.prob", text)
    _require(dfn.beta >= 0, "patch rate must be nonnegative", "defense.beta", text)
    _require(dfn.beta_law in SEEDING_LAWS, f"unknown rate law '{dfn.beta_law}'", "defense.beta_law", text)
    _require(
        dfn.beta_law != "uniform" or (dfn.beta_max is not None and dfn.beta_max >= dfn.beta_floor),
        "uniform rates need beta_max >= beta_floor",
        "defense.beta_max",
        text,
    )
    _require(0.0 <= dfn.q <= 1.0, "probability must lie in [0, 1]", "defense.q", text)
    kinds = [k.value for k in ControllerKind]
    _require(dfn.controller in kinds, f"unknown controller '{dfn.controller}'", "defense.controller", text)
    forms = [f.value for f in CouplingForm]
    _require(dfn.form in forms, f"unknown coupling form '{dfn.form}'", "defense.form", text)
    _require(all(e > 0 for e in dfn.eps), "decay rates must be positive", "defense.eps", text)
    _require(run.kind in RUN_KINDS, f"unknown run kind '{run.kind}'", "run.kind", text)
    _require(run.horizon > 0, "horizon must be positive", "run.horizon", text)
    _require(run.grid_points >= 2, "grid needs at least two points", "run.grid_points", text)
    _require(run.h > 0, "step must be positive", "run.h", text)
    _require(run.trials >= 1, "trials must be positive", "run.trials", text)
    _require(
        run.dynamics is None or run.dynamics in [d.value for d in Dynamics],
        f"unknown dynamics '{run.dynamics}'",
        "run.dynamics",
        text,
    )
    if run.kind == "adaptive":
        controller = ControllerKind(dfn.controller)
        _require(controller is not ControllerKind.NONE, "adaptive runs need a controller", "defense.controller", text)
        _require(not controller.filters or dfn.q > 0, "filter laws need q > 0", "defense.q", text)
    if run.kind == "design":
        _require(len(dfn.eps) > 0, "design runs need at least one decay rate", "defense.eps", text)


def parse_scenario(text: str, source_dir: Optional[Union[str, Path]] = None) -> Scenario:
    """
    Parse and validate a scenario document.

    Args:
        text: TOML source
        source_dir: Directory that relative ``file`` entries are resolved against

    Raises:
        ConfigError: On invalid TOML, unknown keys, wrong value types or
                     out-of-range values; the error names the field and line

    Examples:
        >>> parse_scenario('name = "tiny"\\n[run]\\nhorizon = 2.0').run.trials
        100
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML: {e}") from e
    reject_unknown_keys(data, _TOP_KEYS, text)
    if "name" not in data:
        raise ConfigError("missing key", field="name")
    scenario = Scenario(
        name=_coerce(data["name"], str, "name", text),
        description=_coerce(data.get("description", ""), str, "description", text),
        source_dir=Path(source_dir) if source_dir is not None else None,
        **{key: _section(cls, data.get(key, {}), key, text) for key, cls in _SECTIONS.items()},
    )
    _validate(scenario, text)
    return scenario


def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, list):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot write {type(value).__name__} as TOML")


def serialize_scenario(scenario: Scenario) -> str:
    """TOML text that :func:`parse_scenario` reads back into an equal scenario."""
    lines = [f"name = {_toml_value(scenario.name)}"]
    if scenario.description:
        lines.append(f"description = {_toml_value(scenario.description)}")
    for key in _SECTIONS:
        spec = getattr(scenario, key)
        lines.extend(["", f"[{key}]"])
        for f in fields(spec):
            value = getattr(spec, f.name)
            if value is not None:
                lines.append(f"{f.name} = {_toml_value(value)}")
    return "\n".join(lines) + "\n"


def load_scenario(ref: Union[str, Path]) -> Scenario:
    """A built-in scenario by name, or a scenario file."""
    if str(ref) in ScenarioRegistry.names():
        return ScenarioRegistry.get(str(ref))
    path = Path(ref)
    if not path.is_file():
        raise ConfigError(f"no built-in scenario or file named '{ref}'", field="scenario")
    return parse_scenario(path.read_text(), source_dir=path.parent)


class ScenarioRegistry:
    """
    Named scenario documents.

    Entries are stored as TOML text and parsed on every lookup, so callers
    always get a fresh, mutable :class:`Scenario`.
    """

    _scenarios: Dict[str, str] = {}

    @classmethod
    def register(cls, name: str, text: str) -> None:
        """
        Register a scenario document; an existing name is replaced with a warning.

        Raises:
            ConfigError: If the document does not parse
        """
        parse_scenario(text)
        if name in cls._scenarios:
            warnings.warn(f"Scenario '{name}' already exists, replacing it")
        cls._scenarios[name] = text

    @classmethod
    def get(cls, name: str) -> Scenario:
        if name not in cls._scenarios:
            raise ConfigError(f"unknown scenario '{name}'", field="scenario")
        return parse_scenario(cls._scenarios[name])

    @classmethod
    def text(cls, name: str) -> str:
        return cls._scenarios[name]

    @classmethod
    def names(cls) -> List[str]:
        return sorted(cls._scenarios)


@dataclass
class ScenarioSetup:
    """Everything a run needs, built once from a scenario."""

    scenario: Scenario
    net: Network
    model: VirusModel
    seeding: np.ndarray
    beta0: np.ndarray
    grid: np.ndarray

    @property
    def x0(self) -> np.ndarray:
        return initial_state(self.net, self.model, self.seeding)


def _resolve(name: str, scenario: Scenario) -> Path:
    path = Path(name)
    if not path.is_absolute() and scenario.source_dir is not None:
        path = scenario.source_dir / path
    return path


def build_network(scenario: Scenario) -> Network:
    spec = scenario.network
    if spec.kind == "erdos_renyi":
        return netmod.erdos_renyi(spec.n, spec.p, spec.seed)
    if spec.kind == "complete":
        return netmod.complete(spec.n)
    if spec.kind == "cycle":
        return netmod.cycle(spec.n)
    if spec.kind == "path":
        return netmod.path(spec.n)
    assert spec.file is not None
    path = _resolve(spec.file, scenario)
    if not path.is_file():
        raise ConfigError(f"edge-list file '{path}' not found", field="network.file")
    return netmod.read_edge_list(path)


def build_model(scenario: Scenario) -> VirusModel:
    spec = scenario.model
    if spec.file is not None:
        path = _resolve(spec.file, scenario)
        if not path.is_file():
            raise ConfigError(f"model file '{path}' not found", field="model.file")
        return load_model(path)
    return from_rates(spec.lambdas, spec.mu, competing=spec.competing)


def prepare(scenario: Scenario) -> ScenarioSetup:
    """Build the network, the model and the scenario-level random draws."""
    net = build_network(scenario)
    model = build_model(scenario)
    rng = trial_rng(scenario.run.seed, SETUP_STREAM)
    if scenario.seeding.law == "uniform":
        per_host = rng.uniform(0.0, scenario.seeding.prob, size=net.n)
        seeding = np.repeat(per_host[:, None] / model.m, model.m, axis=1)
    else:
        seeding = seeding_matrix(net.n, model.m, scenario.seeding.prob)
    dfn = scenario.defense
    if dfn.beta_law == "uniform":
        assert dfn.beta_max is not None
        beta0 = rng.uniform(dfn.beta_floor, dfn.beta_max, size=net.n)
    else:
        beta0 = np.full(net.n, dfn.beta)
    return ScenarioSetup(scenario, net, model, seeding, beta0, scenario.grid)


@dataclass
class ScenarioOutcome:
    """
    Attributes:
        report: Checks, bound reports and summary numbers of the run
        frames: Trajectory and result tables keyed by label
    """

    report: ScenarioReport
    frames: Dict[str, pd.DataFrame]

    @property
    def passed(self) -> bool:
        return self.report.passed

    def write(self, out_dir: Union[str, Path]) -> List[Path]:
        """Write one CSV per frame and the JSON report; returns the paths written."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        name = self.report.name
        written = []
        for label, frame in self.frames.items():
            path = out / f"{name}-{label}.csv"
            write_csv(frame, path)
            written.append(path)
        path = out / f"{name}.json"
        path.write_text(json.dumps(self.report.to_dict(), indent=2, sort_keys=True) + "\n")
        written.append(path)
        logger.info("scenario %s: wrote %d file(s) to %s", name, len(written), out)
        return written


def _first_time_below(t: np.ndarray, values: np.ndarray, level: float) -> float:
    hits = np.flatnonzero(values < level)
    return float(t[hits[0]]) if hits.size else float("inf")


def _run_static(setup: ScenarioSetup, report: ScenarioReport, frames: Dict[str, pd.DataFrame]):
    s, net, model = setup.scenario, setup.net, setup.model
    run, q = s.run, s.defense.q
    x0 = setup.x0

    mf = simulate_subset(net, model, x0, setup.beta0, q, run.horizon, run.h, setup.grid)
    agg = simulate_aggregate(net, model, x0.sum(axis=1), setup.beta0, run.horizon, run.h, setup.grid)
    frames["meanfield"] = mf.to_frame(model.names)
    frames["aggregate"] = agg.to_frame(model.names)
    gap = float(np.min(agg.host_any - mf.host_any))
    report.add_check("aggregate_dominates_subset", gap >= -DOMINATION_TOL, worst_gap=gap)

    if run.monte_carlo:
        mc = monte_carlo(
            net, model, setup.seeding, setup.beta0, q, None, run.trials, run.horizon, setup.grid, run.seed
        )
        frames["markov"] = mc.to_frame(model.names)
        deficit = mf.frac_any - (mc.frac_any - SE_FACTOR * mc.se_any)
        report.add_check(
            "meanfield_upper_bounds_markov", bool(np.all(deficit >= -1e-12)), worst=float(deficit.min())
        )

    report.add_number(passivity_index_bound(net, model), title="rho_bound")
    if s.model.file is None and model.m > 1:
        rhos = {
            flag: passivity_index_bound(net, from_rates(s.model.lambdas, s.model.mu, competing=flag))
            for flag in (False, True)
        }
        report.add_check(
            "competing_rho_not_above_coexisting",
            rhos[True] <= rhos[False] + 1e-12,
            competing=rhos[True],
            coexisting=rhos[False],
        )

    if q == 0:
        Qbar = build_Qbar(net, model, CouplingForm.CONSERVATIVE)
        along = verify_storage_decrement(mf.host_sets, setup.beta0, net, model, Qbar=Qbar)
        report.add_check("storage_decrement_trajectory", along <= DECREMENT_TOL, worst_excess=along)
        if run.random_states:
            rng = trial_rng(run.seed, STATES_STREAM)
            states = random_valid_states(run.random_states, net.n, len(model.realizable_sets()), rng)
            sampled = verify_storage_decrement(states, setup.beta0, net, model, Qbar=Qbar)
            report.add_check(
                "storage_decrement_random_states", sampled <= DECREMENT_TOL, worst_excess=sampled
            )
        literal = verify_storage_decrement(mf.host_sets, setup.beta0, net, model, CouplingForm.LEMMA)
        report.add_number(literal, title="lemma_form_worst_excess")


def _adaptive_config(s: Scenario, value: Optional[float]) -> ControllerConfig:
    dfn = s.defense
    kind = ControllerKind(dfn.controller)
    alpha, gamma = dfn.alpha, dfn.gamma
    if value is not None:
        if kind is ControllerKind.FILTER:
            gamma = value
        else:
            alpha = value
    return ControllerConfig(
        kind=kind,
        alpha=alpha,
        gamma=gamma,
        beta_floor=dfn.beta_floor,
        positive_part=dfn.positive_part,
    )


def _run_adaptive(setup: ScenarioSetup, report: ScenarioReport, frames: Dict[str, pd.DataFrame]):
    s, net, model = setup.scenario, setup.net, setup.model
    run, dfn = s.run, s.defense
    kind = ControllerKind(dfn.controller)
    if run.dynamics is not None:
        dynamics = Dynamics(run.dynamics)
    else:
        dynamics = Dynamics.AGGREGATE if kind is ControllerKind.MONOTONE else Dynamics.SUBSET
    param = "gamma" if kind is ControllerKind.FILTER else "alpha"
    values: List[Optional[float]] = sorted(dfn.sweep) if dfn.sweep else [None]
    x0 = setup.x0
    hits, final_beta, final_q = [], [], []

    for value in values:
        config = _adaptive_config(s, value)
        label = f"{param}={getattr(config, param):g}"
        traj = simulate_adaptive(
            net, model, config, x0, setup.beta0, dfn.q, run.horizon, run.h, setup.grid, dynamics
        )
        frames[f"meanfield-{label}"] = traj.to_frame(model.names)
        hits.append(_first_time_below(traj.t, traj.host_virus.max(axis=(1, 2)), REMOVAL_LEVEL))
        final_beta.append(float(traj.mean_beta[-1]))
        final_q.append(float(traj.q[-1]))
        report.add_number(final_beta[-1], title=f"final_mean_beta[{label}]")

        if kind in (ControllerKind.MONOTONE, ControllerKind.JOINT, ControllerKind.FILTER):
            worst = float(traj.host_virus[-1].max())
            report.add_check(f"removed[{label}]", worst < REMOVAL_LEVEL, final_max=worst, reached_at=hits[-1])

        if kind in (ControllerKind.MONOTONE, ControllerKind.JOINT):
            p2 = aggregate_passivity_certificate(traj.host_any, traj.beta, net, model)
            report.add_check(f"aggregate_passivity[{label}]", p2 <= CERTIFICATE_TOL, worst=p2)
            ls = lasalle_certificate(traj.host_any, traj.beta, net, model, config.alpha)
            report.add_check(f"storage_nonincreasing[{label}]", ls <= CERTIFICATE_TOL, worst=ls)
            report.add_bound(check_patch_rate_curve(traj.t, traj.beta, net, model, config.alpha))
            report.add_check(
                f"beta_nondecreasing[{label}]", bool(np.all(np.diff(traj.beta, axis=0) >= -1e-12))
            )

        if kind is ControllerKind.NONMONOTONE:
            _nonmonotone_checks(setup, config, traj, label, report)

        if kind.filters:
            report.add_number(final_q[-1], title=f"final_q[{label}]")
            report.add_check(f"q_nondecreasing[{label}]", bool(np.all(np.diff(traj.q) >= -1e-12)))
            if kind is ControllerKind.FILTER:
                for bound in check_q_final(final_q[-1], config.gamma, setup.beta0, net, model):
                    report.add_bound(bound)
                report.add_bound(
                    check_filter_rate(traj.t, traj.q, setup.beta0, config.gamma, net, model)
                )

        if run.monte_carlo:
            mc = monte_carlo(
                net,
                model,
                setup.seeding,
                setup.beta0,
                dfn.q,
                make_controller(config, model),
                run.trials,
                run.horizon,
                setup.grid,
                run.seed,
            )
            frames[f"markov-{label}"] = mc.to_frame(model.names)
            report.add_number(float(mc.frac_any[-1]), title=f"markov_final_frac_any[{label}]")

    if len(values) > 1 and kind in (ControllerKind.MONOTONE, ControllerKind.JOINT):
        report.add_check(
            "larger_alpha_removes_no_later",
            all(b <= a for a, b in zip(hits, hits[1:])),
            reached_at=hits,
        )
        report.add_check(
            "larger_alpha_ends_higher",
            all(b >= a for a, b in zip(final_beta, final_beta[1:])),
            final_mean_beta=final_beta,
        )
    if len(values) > 1 and kind is ControllerKind.FILTER:
        report.add_check(
            "smaller_gamma_ends_lower",
            all(b >= a for a, b in zip(final_q, final_q[1:])),
            final_q=final_q,
        )

    if kind is ControllerKind.MONOTONE:
        _final_patch_sum_run(setup, _adaptive_config(s, values[-1]), dynamics, report)


def _final_patch_sum_run(
    setup: ScenarioSetup, config: ControllerConfig, dynamics: Dynamics, report: ScenarioReport
):
    """Rerun from ``beta_i(0) = lam_hat |N_i| + 1`` so the final-value bound applies."""
    s, net, model = setup.scenario, setup.net, setup.model
    beta0 = model.lam_hat * net.degrees + 1.0
    traj = simulate_adaptive(
        net, model, config, setup.x0, beta0, 0.0, s.run.horizon, s.run.h, setup.grid, dynamics
    )
    printed, exact = check_final_patch_sum(traj.beta[-1], beta0, net, model, config.alpha)
    report.add_bound(printed)
    report.add_bound(exact)


def _nonmonotone_checks(
    setup: ScenarioSetup, config: ControllerConfig, traj, label: str, report: ScenarioReport
):
    net, model = setup.net, setup.model
    lam = model.lam_hat
    x_star, beta_star = fixed_point(config.alpha, config.gamma, lam, net.degrees)
    hosts = np.flatnonzero(net.degrees > 0)
    error = float(np.max(np.abs(traj.host_any[-1, hosts] - x_star))) if hosts.size else 0.0
    report.add_check(f"fixed_point[{label}]", error <= FIXED_POINT_TOL, worst_error=error, x_star=x_star)
    beta_error = np.abs(traj.beta[-1, hosts] - beta_star[hosts]) / np.maximum(beta_star[hosts], 1e-12)
    report.add_number(float(beta_error.max()) if hosts.size else 0.0, title=f"beta_star_rel_error[{label}]")
    try:
        stable = fixed_point_is_stable(net, config.alpha, config.gamma, lam)
        report.add_check(f"linearization_hurwitz[{label}]", stable)
    except SingularLyapunov as e:
        report.add_check(f"linearization_hurwitz[{label}]", False, reason=str(e))


def _run_design(setup: ScenarioSetup, report: ScenarioReport, frames: Dict[str, pd.DataFrame]):
    s, net, model = setup.scenario, setup.net, setup.model
    run, dfn = s.run, s.defense
    form = CouplingForm(dfn.form)
    costs_ref = dfn.costs if dfn.costs == "uniform" else str(_resolve(dfn.costs, s))
    cost = load_costs(costs_ref, net.n)
    x0 = setup.x0
    table: Dict[str, Any] = {"host": np.arange(net.n)}
    costs = []

    for eps in sorted(dfn.eps):
        problem = DesignProblem.from_model(net, model, eps, cost, form)
        result = design_min_cost(problem)
        ok, m = feasible(result.beta, eps, problem.Qbar)
        report.add_check(f"feasible[eps={eps:g}]", ok, margin=m, iterations=result.iterations)
        decay = verify_exponential_decay(result.beta, eps, net, model, x0, run.horizon, setup.grid, run.h)
        report.add_check(f"decay_envelope[eps={eps:g}]", decay.passed, worst_ratio=decay.worst_ratio)
        flat = uniform_rate(net, model, eps, form)
        _, flat_margin = feasible(np.full(net.n, flat), eps, problem.Qbar)
        report.add_check(
            f"uniform_rate_certified[eps={eps:g}]",
            -1e-9 <= flat_margin <= 1e-6,
            rate=flat,
            margin=flat_margin,
        )
        report.add_number(result.cost, title=f"cost[eps={eps:g}]")
        table[f"beta_eps={eps:g}"] = result.beta
        costs.append(result.cost)
    frames["design"] = pd.DataFrame(table)
    report.add_check(
        "cost_nondecreasing_in_eps",
        all(b >= a * (1 - 1e-6) for a, b in zip(costs, costs[1:])),
        costs=costs,
    )

    clique = netmod.complete(dfn.negative_clique)
    eps = max(dfn.eps)
    beta = 0.5 * uniform_rate(clique, model, eps, form)
    x0c = initial_state(clique, model, s.seeding.prob)
    decay = verify_exponential_decay(beta, eps, clique, model, x0c, run.horizon, setup.grid, run.h)
    report.add_check("negative_control_detected", not decay.passed, worst_ratio=decay.worst_ratio)


def _run_oracle(setup: ScenarioSetup, report: ScenarioReport, frames: Dict[str, pd.DataFrame]):
    s, net, model = setup.scenario, setup.net, setup.model
    run, q = s.run, s.defense.q
    exact = master_equation(net, model, setup.seeding, setup.beta0, q, run.horizon, setup.grid, run.h)
    drift = float(np.max(np.abs(exact.mass - 1.0)))
    report.add_check("master_equation_mass", drift <= MASS_TOL, worst_drift=drift)
    me = exact.to_trajectory(model, setup.beta0, q)
    mc = monte_carlo(
        net, model, setup.seeding, setup.beta0, q, None, run.trials, run.horizon, setup.grid, run.seed
    )
    frames["master"] = me.to_frame(model.names)
    frames["markov"] = mc.to_frame(model.names)

    excess_any = np.abs(mc.frac_any - me.frac_any) - SE_FACTOR * mc.se_any
    excess_virus = np.abs(mc.frac_virus - me.frac_virus) - SE_FACTOR * mc.se_virus
    worst = float(max(excess_any.max(), excess_virus.max()))
    report.add_check("markov_matches_master", worst <= 1e-9, worst_excess=worst)

    mf = simulate_subset(net, model, setup.x0, setup.beta0, q, run.horizon, run.h, setup.grid)
    report.add_number(float(np.min(mf.host_any - me.host_any)), title="meanfield_minus_exact_min")


RUNNERS: Dict[str, Callable[[ScenarioSetup, ScenarioReport, Dict[str, pd.DataFrame]], None]] = {
    "static": _run_static,
    "adaptive": _run_adaptive,
    "design": _run_design,
    "oracle": _run_oracle,
}


def run_scenario(scenario: Scenario, out_dir: Optional[Union[str, Path]] = None) -> ScenarioOutcome:
    """
    Run a scenario and, when ``out_dir`` is given, write its CSV and JSON outputs.

    Output files are identical across runs of the same scenario: every random
    draw comes from streams derived from ``run.seed``.

    Raises:
        ConfigError: If a referenced file is missing or malformed
        MitigationError: Propagated from the engines
    """
    logger.info("scenario %s (%s) starting", scenario.name, scenario.run.kind)
    setup = prepare(scenario)
    report = ScenarioReport(scenario.name, scenario.run.seed)
    if scenario.description:
        report.add_text(scenario.description, title="description")
    frames: Dict[str, pd.DataFrame] = {}
    RUNNERS[scenario.run.kind](setup, report, frames)
    outcome = ScenarioOutcome(report, frames)
    logger.info("scenario %s finished: %s", scenario.name, "passed" if outcome.passed else "FAILED")
    if out_dir is not None:
        outcome.write(out_dir)
    return outcome


_BUILTINS = {
    "fig3-coexist": """
name = "fig3-coexist"
description = "Two coexisting viruses under static patching; mean-field bounds the Markov chain"

[network]
kind = "erdos_renyi"
n = 100
p = 0.2
seed = 1

[model]
lambdas = [1.0, 2.0]

[seeding]
prob = 0.4

[defense]
beta = 10.0

[run]
kind = "static"
horizon = 2.0
""",
    "fig3-compete": """
name = "fig3-compete"
description = "Two competing viruses under static patching; mean-field bounds the Markov chain"

[network]
kind = "erdos_renyi"
n = 100
p = 0.2
seed = 1

[model]
lambdas = [1.0, 2.0]
competing = true

[seeding]
prob = 0.4

[defense]
beta = 10.0

[run]
kind = "static"
horizon = 2.0
""",
    "fig4a-adaptive-patch": """
name = "fig4a-adaptive-patch"
description = "Monotone adaptive patching swept over alpha"

[network]
kind = "erdos_renyi"
n = 100
p = 0.2
seed = 1

[model]
lambdas = [1.0, 2.0]

[seeding]
prob = 0.4

[defense]
beta = 1.0
controller = "monotone"
alpha = 10.0
sweep = [10.0, 50.0]

[run]
kind = "adaptive"
horizon = 40.0
trials = 10
""",
    "fig5a-adaptive-filter": """
name = "fig5a-adaptive-filter"
description = "Adaptive filtering with static patching, swept over gamma"

[network]
kind = "erdos_renyi"
n = 100
p = 0.2
seed = 1

[model]
lambdas = [1.0, 2.0]
mu = [4.0, 4.0]

[seeding]
prob = 0.4

[defense]
beta = 10.0
q = 0.01
controller = "filter"
gamma = 0.001
sweep = [0.001, 0.01]

[run]
kind = "adaptive"
horizon = 5.0
trials = 10
""",
    "fig5b-nonmono": """
name = "fig5b-nonmono"
description = "Non-monotone patching of one virus from random initial states"

[network]
kind = "erdos_renyi"
n = 100
p = 0.05
seed = 1

[model]
lambdas = [1.0]

[seeding]
law = "uniform"
prob = 1.0

[defense]
beta_law = "uniform"
beta_max = 0.2
controller = "nonmonotone"
alpha = 1.0
gamma = 0.1
positive_part = false

[run]
kind = "adaptive"
horizon = 150.0
h = 0.01
trials = 5
""",
    "static-design": """
name = "static-design"
description = "Minimum-cost static patching for several decay rates, with a clique negative control"

[network]
kind = "erdos_renyi"
n = 100
p = 0.2
seed = 1

[model]
lambdas = [1.0, 2.0]

[seeding]
prob = 0.4

[defense]
eps = [0.1, 0.5, 1.0]
form = "conservative"
negative_clique = 10

[run]
kind = "design"
horizon = 10.0
monte_carlo = false
""",
    "oracle-path3": """
name = "oracle-path3"
description = "Monte-Carlo against the exact master equation on a 3-host path"

[network]
kind = "path"
n = 3

[model]
lambdas = [1.0, 2.0]
competing = true

[seeding]
prob = 0.6

[defense]
beta = 1.0

[run]
kind = "oracle"
horizon = 2.0
grid_points = 10
trials = 10000
""",
}

for _name, _text in _BUILTINS.items():
    ScenarioRegistry.register(_name, _text.lstrip())
