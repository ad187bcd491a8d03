"""
``expctl``: command-line front-end.

Exit codes: 0 success, 1 configuration error, 2 engine error, 3 failed
acceptance check (``--check``).
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np
import pandas as pd

from . import __version__
from .components import to_jsonable
from .control import ControllerConfig, ControllerKind, make_controller, simulate_adaptive
from .design import DesignProblem, design_min_cost, feasible, load_costs
from .errors import ConfigError, MitigationError
from .history import ReportHistory
from .markov import monte_carlo
from .meanfield import Dynamics, initial_state, simulate_aggregate, simulate_subset
from .network import erdos_renyi, write_edge_list
from .passivity import CouplingForm, design_matrices
from .scenario import (
    DefenseSpec,
    ModelSpec,
    NetworkSpec,
    RunSpec,
    Scenario,
    ScenarioRegistry,
    SeedingSpec,
    load_scenario,
    prepare,
    run_scenario,
)
from .trajectory import Trajectory
from .utils import frame_to_csv, write_csv

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ENGINE = 2
EXIT_CHECK = 3


def _instance_scenario(args: argparse.Namespace, kind: str = "static") -> Scenario:
    """Scenario for the single-instance subcommands (network and model from flags)."""
    model = ModelSpec(file=args.model)
    if args.model is None:
        model = ModelSpec(lambdas=list(args.lambdas), mu=args.mu, competing=args.competing)
    return Scenario(
        name=args.command,
        network=NetworkSpec(kind="file", file=args.net),
        model=model,
        seeding=SeedingSpec(prob=args.init),
        defense=DefenseSpec(beta=getattr(args, "beta", 10.0), q=getattr(args, "q", 0.0)),
        run=RunSpec(
            kind=kind,
            horizon=args.horizon,
            grid_points=args.grid,
            h=getattr(args, "h", 1e-3),
            seed=args.seed,
            trials=getattr(args, "trials", 100),
        ),
    )


def _emit_csv(frame: pd.DataFrame, out: Optional[str]) -> None:
    if out:
        write_csv(frame, out)
        logger.info("wrote %s", out)
    else:
        sys.stdout.write(frame_to_csv(frame))


def _emit_json(data, out: Optional[str]) -> None:
    text = json.dumps(to_jsonable(data), indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
        logger.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def _controller_config(args: argparse.Namespace) -> ControllerConfig:
    return ControllerConfig(
        kind=ControllerKind(args.controller),
        alpha=args.alpha,
        gamma=args.gamma,
        beta_floor=args.beta_floor,
        positive_part=not args.no_positive_part,
    )


def cmd_gen_net(args: argparse.Namespace) -> int:
    net = erdos_renyi(args.n, args.p, args.seed)
    write_edge_list(net, args.out)
    logger.info("wrote %d hosts and %d edges to %s", net.n, net.num_edges, args.out)
    return EXIT_OK


def cmd_sim_markov(args: argparse.Namespace) -> int:
    setup = prepare(_instance_scenario(args))
    config = _controller_config(args)
    traj = monte_carlo(
        setup.net,
        setup.model,
        setup.seeding,
        args.beta,
        args.q,
        make_controller(config, setup.model),
        args.trials,
        args.horizon,
        setup.grid,
        args.seed,
    )
    _emit_csv(traj.to_frame(setup.model.names), args.out)
    return EXIT_OK


def cmd_sim_mf(args: argparse.Namespace) -> int:
    setup = prepare(_instance_scenario(args))
    x0 = setup.x0
    traj: Trajectory
    if Dynamics(args.dynamics) is Dynamics.AGGREGATE:
        traj = simulate_aggregate(
            setup.net, setup.model, x0.sum(axis=1), args.beta, args.horizon, args.h, setup.grid
        )
    else:
        traj = simulate_subset(
            setup.net, setup.model, x0, args.beta, args.q, args.horizon, args.h, setup.grid
        )
    _emit_csv(traj.to_frame(setup.model.names), args.out)
    return EXIT_OK


def _run_and_write(scenario: Scenario, args: argparse.Namespace) -> int:
    outcome = run_scenario(scenario, args.out_dir)
    if args.check and not outcome.passed:
        failed = [name for name, ok in outcome.report.checks.items() if not ok]
        logger.error("scenario %s failed checks: %s", scenario.name, ", ".join(failed) or "bounds")
        return EXIT_CHECK
    return EXIT_OK


def cmd_mc_compare(args: argparse.Namespace) -> int:
    scenario = _instance_scenario(args)
    scenario.run.random_states = 0
    return _run_and_write(scenario, args)


def cmd_oracle_compare(args: argparse.Namespace) -> int:
    return _run_and_write(_instance_scenario(args, kind="oracle"), args)


def cmd_design_static(args: argparse.Namespace) -> int:
    setup = prepare(_instance_scenario(args))
    net, model = setup.net, setup.model
    cost = load_costs(args.costs, net.n)
    problem = DesignProblem.from_model(net, model, args.eps, cost, CouplingForm(args.form))
    result = design_min_cost(problem)
    ok, margin = feasible(result.beta, args.eps, problem.Qbar)
    _emit_json(
        {
            "eps": args.eps,
            "form": args.form,
            "beta": result.beta.tolist(),
            "cost": result.cost,
            "margin": margin,
            "feasible": ok,
            "iterations": result.iterations,
            "converged": result.converged,
        },
        args.out,
    )
    return EXIT_OK


def cmd_passivity(args: argparse.Namespace) -> int:
    setup = prepare(_instance_scenario(args))
    matrices = design_matrices(setup.net, setup.model, CouplingForm(args.form))
    _emit_json(
        {
            "form": args.form,
            "rho_bound": matrices.rho,
            "mu1_qbar": matrices.top_eigenvalue,
            "host_bounds": matrices.host_bounds.tolist(),
        },
        args.out,
    )
    return EXIT_OK


def cmd_adaptive_run(args: argparse.Namespace) -> int:
    setup = prepare(_instance_scenario(args))
    config = _controller_config(args)
    x0 = initial_state(setup.net, setup.model, setup.seeding)
    traj = simulate_adaptive(
        setup.net,
        setup.model,
        config,
        x0,
        args.beta0,
        args.q0,
        args.horizon,
        args.h,
        setup.grid,
        Dynamics(args.dynamics),
    )
    frame = traj.to_frame(setup.model.names)
    frame["max_frac_any"] = np.max(traj.host_any, axis=1)
    _emit_csv(frame, args.out)
    return EXIT_OK


def cmd_bounds_report(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    outcome = run_scenario(scenario)
    bounds = outcome.report.bounds
    _emit_json(
        {"scenario": scenario.name, "bounds": [b.to_dict() for b in bounds]},
        args.out,
    )
    if args.check and not all(b.satisfied for b in bounds if b.hard):
        return EXIT_CHECK
    return EXIT_OK


def cmd_run_scenario(args: argparse.Namespace) -> int:
    return _run_and_write(load_scenario(args.scenario), args)


def cmd_list_scenarios(args: argparse.Namespace) -> int:
    for name in ScenarioRegistry.names():
        print(name)
    return EXIT_OK


def _add_instance(p: argparse.ArgumentParser, trials: bool = False) -> None:
    p.add_argument("--net", required=True, help="Edge-list file")
    p.add_argument("--model", help="TOML virus-model file")
    p.add_argument("--lambdas", type=float, nargs="+", default=[1.0, 2.0], help="Per-virus infection rates when no model file is given")
    p.add_argument("--mu", type=float, nargs="+", help="Per-virus packet rates")
    p.add_argument("--competing", action="store_true", help="All viruses compete")
    p.add_argument("--init", type=float, default=0.4, help="Initial infection probability")
    p.add_argument("--beta", type=float, default=10.0, help="Static patch rate")
    p.add_argument("--q", type=float, default=0.0, help="Static filter probability")
    p.add_argument("--horizon", type=float, default=10.0)
    p.add_argument("--grid", type=int, default=101, help="Number of sample times")
    p.add_argument("--h", type=float, default=1e-3, help="RK4 step")
    p.add_argument("--seed", type=int, default=0)
    if trials:
        p.add_argument("--trials", type=int, default=100)


def _add_controller(p: argparse.ArgumentParser) -> None:
    p.add_argument("--controller", choices=[k.value for k in ControllerKind], default="none")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--beta-floor", type=float, default=1e-3)
    p.add_argument("--no-positive-part", action="store_true", help="Unclamped non-monotone drift")


def _add_outputs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out-dir", default=".", help="Directory for CSV and JSON outputs")
    p.add_argument("--check", action="store_true", help="Exit 3 when an acceptance check fails")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="expctl", description="Multi-virus malware propagation and mitigation experiments"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, func: Callable[[argparse.Namespace], int], summary: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=summary)
        p.set_defaults(func=func)
        return p

    p = command("gen-net", cmd_gen_net, "Sample an Erdos-Renyi network")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)

    p = command("sim-markov", cmd_sim_markov, "Monte-Carlo trajectories of the Markov chain")
    _add_instance(p, trials=True)
    _add_controller(p)
    p.add_argument("--out")

    p = command("sim-mf", cmd_sim_mf, "Mean-field trajectory")
    _add_instance(p)
    p.add_argument("--dynamics", choices=[d.value for d in Dynamics], default="subset")
    p.add_argument("--out")

    p = command("mc-compare", cmd_mc_compare, "Mean-field against Monte-Carlo")
    _add_instance(p, trials=True)
    _add_outputs(p)

    p = command("oracle-compare", cmd_oracle_compare, "Monte-Carlo against the master equation")
    _add_instance(p, trials=True)
    _add_outputs(p)

    p = command("design-static", cmd_design_static, "Minimum-cost static patch rates")
    _add_instance(p)
    p.add_argument("--eps", type=float, required=True, help="Required decay rate")
    p.add_argument("--costs", default="uniform", help="Cost file or 'uniform'")
    p.add_argument("--form", choices=[f.value for f in CouplingForm], default="conservative")
    p.add_argument("--out")

    p = command("passivity", cmd_passivity, "Passivity index bound and coupling spectrum")
    _add_instance(p)
    p.add_argument("--form", choices=[f.value for f in CouplingForm], default="lemma")
    p.add_argument("--out")

    p = command("adaptive-run", cmd_adaptive_run, "Co-simulate an adaptive law with the mean-field dynamics")
    _add_instance(p)
    _add_controller(p)
    p.add_argument("--beta0", type=float, default=1.0)
    p.add_argument("--q0", type=float, default=0.0)
    p.add_argument("--dynamics", choices=[d.value for d in Dynamics], default="subset")
    p.add_argument("--out")

    p = command("bounds-report", cmd_bounds_report, "Bound reports of a scenario")
    p.add_argument("--scenario", required=True, help="Built-in name or scenario file")
    p.add_argument("--check", action="store_true")
    p.add_argument("--out")

    p = command("run-scenario", cmd_run_scenario, "Run a built-in or file scenario")
    p.add_argument("scenario", help="Built-in name or scenario file")
    _add_outputs(p)

    command("list-scenarios", cmd_list_scenarios, "List the built-in scenarios")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format="%(levelname)s %(name)s: %(message)s")
    history = ReportHistory()
    try:
        return args.func(args)
    except ConfigError as e:
        history.add_error_report(args.command, f"{type(e).__name__}: {e}")
        logger.error("%s", e)
        return EXIT_CONFIG
    except MitigationError as e:
        history.add_error_report(args.command, f"{type(e).__name__}: {e}")
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_ENGINE
    except ValueError as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    finally:
        if history.reports:
            sys.stderr.write(history.render_last() + "\n")


if __name__ == "__main__":
    sys.exit(main())
