"""Command-line front end.

Exit codes: 0 success, 1 invalid input, 2 infeasible request (oracle cap).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .learning import (LearnParams, extract_greedy_trajectory, save_snapshot, train_double_q,
                       train_q_learning)
from .scenario import Scenario, distribution_from_dict, generate_scenario, load_scenario, save_scenario
from .schedule import (DEFAULT_ORACLE_CAP, OracleCapExceeded, brute_force_optimum, evaluate_order,
                       evaluation_csv)

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE = 0, 1, 2

CONFIG_KEYS = {"seed", "runs", "algorithms", "workers", "oracle_cap", "scenario", "distribution", "learn",
               "sweep"}


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors are validation errors; exit code 2 is reserved for infeasible requests
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def load_config(path) -> dict:
    """Read a JSON run configuration.

    Recognised top-level keys: ``seed``, ``runs``, ``algorithms``,
    ``workers``, ``oracle_cap``, ``scenario`` (path to a scenario file,
    relative to the config), ``distribution`` (flat scenario-distribution
    fields), ``learn`` (learning parameters) and ``sweep``
    (``{"var": ..., "values": [...]}``).
    """
    if path is None:
        return {}
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    unknown = set(doc) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown config key(s): {sorted(unknown)}")
    if "scenario" in doc:
        doc["scenario"] = str((path.parent / doc["scenario"]).resolve())
    return doc


def _csv_list(text: str | None, cast=str) -> list | None:
    if text is None:
        return None
    items = [t.strip() for t in text.split(",") if t.strip()]
    try:
        return [cast(t) for t in items]
    except ValueError:
        raise ConfigError(f"could not parse {text!r} as a comma-separated list") from None


def _number(text: str) -> float | int:
    value = float(text)
    return int(value) if value.is_integer() else value


class Run:
    """Resolved settings: config file values overridden by command-line flags."""

    def __init__(self, args):
        cfg = load_config(args.config)
        self.args = args
        self.seed = _pick(args, "seed", cfg, 0)
        self.runs = _pick(args, "runs", cfg, 100)
        self.workers = _pick(args, "workers", cfg, 1)
        self.oracle_cap = cfg.get("oracle_cap", DEFAULT_ORACLE_CAP)
        algos = _csv_list(getattr(args, "algorithms", None))
        self.algorithms = tuple(algos or cfg.get("algorithms", ("double-q", "q-learning", "random")))
        self.distribution = distribution_from_dict(cfg.get("distribution", {}))
        learn = dict(cfg.get("learn", {}))
        if getattr(args, "episodes", None) is not None:
            learn["episodes"] = args.episodes
        if getattr(args, "epsilon_final", None) is not None:
            learn["epsilon_final"] = args.epsilon_final
        self.learn = LearnParams.from_dict(learn)
        scenario_path = getattr(args, "scenario", None) or cfg.get("scenario")
        self.scenario_path = scenario_path
        self.sweep_cfg = cfg.get("sweep")
        self.out = Path(args.out)

    def scenario(self) -> Scenario:
        if self.scenario_path:
            return load_scenario(self.scenario_path)
        return generate_scenario(self.distribution, self.seed)

    def fixed_scenario(self) -> Scenario | None:
        return load_scenario(self.scenario_path) if self.scenario_path else None

    def output_dir(self) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out


def _pick(args, name, cfg, default):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return cfg.get(name, default)


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    print(path)
    return path


def _order_for(run: Run, s: Scenario) -> list[int]:
    if run.args.order is not None:
        return _csv_list(run.args.order, int)
    return harness.solve(s, run.args.algorithm, run.learn, run.seed, run.oracle_cap)


# -- subcommands ---------------------------------------------------------------

def cmd_generate(run: Run) -> int:
    s = generate_scenario(run.distribution, run.seed)
    path = run.output_dir() / "scenario.json"
    save_scenario(s, path)
    print(path)
    return EXIT_OK


def cmd_train(run: Run) -> int:
    s = run.scenario()
    params = replace(run.learn, seed=run.seed)
    out = run.output_dir()
    if run.args.algorithm == "q-learning":
        qa, trace = train_q_learning(s, params)
        qb = None
    else:
        qa, qb, trace = train_double_q(s, params)
    order = extract_greedy_trajectory(s, qa, qb)
    save_snapshot(out / "qtable.json", s, params, qa, qb)
    print(out / "qtable.json")
    _write(out / "trace.csv", trace.to_csv())
    _write(out / "evaluation.csv", evaluation_csv(s, evaluate_order(s, order)))
    if run.args.plot:
        from .plotting import plot_convergence
        print(plot_convergence(trace, out / "trace.png"))
    return EXIT_OK


def cmd_evaluate(run: Run) -> int:
    s = run.scenario()
    out = run.output_dir()
    rows = []
    if run.args.order is not None:
        orders = [("given", _csv_list(run.args.order, int))]
    else:
        orders = [(a, harness.solve(s, a, run.learn, run.seed, run.oracle_cap)) for a in run.algorithms]
    for name, order in orders:
        ev = evaluate_order(s, order)
        _write(out / f"evaluation_{name}.csv", evaluation_csv(s, ev))
        rows.append(f"{name},{' '.join(map(str, ev.order))},{ev.satisfied_count},{s.num_users}")
    _write(out / "evaluate_summary.csv", "algorithm,order,satisfied,num_users\n" + "\n".join(rows) + "\n")
    return EXIT_OK


def _sweep_from_args(run: Run) -> harness.Sweep | None:
    var = run.args.var or (run.sweep_cfg or {}).get("var")
    values = _csv_list(run.args.values, _number) or (run.sweep_cfg or {}).get("values")
    if var is None and values is None:
        return None
    if var is None or not values:
        raise ConfigError("a sweep needs both --var and --values")
    return harness.Sweep(var, tuple(values))


def cmd_sweep(run: Run) -> int:
    cfg = harness.ExperimentConfig(
        distribution=run.distribution, scenario=run.fixed_scenario(), seed=run.seed,
        algorithms=run.algorithms, sweep=_sweep_from_args(run), runs=run.runs, learn=run.learn,
        workers=run.workers, oracle_cap=run.oracle_cap)
    paths = harness.write_experiment(cfg, run.output_dir(), plot=run.args.plot)
    for path in paths.values():
        print(path)
    sys.stdout.write(paths["summary"].read_text())
    return EXIT_OK


def cmd_convergence(run: Run) -> int:
    out = run.output_dir()
    users = _csv_list(run.args.users, int)
    if users:
        rows = harness.convergence_sweep(run.distribution, users, run.learn, seed=run.seed, runs=run.runs,
                                         workers=run.workers)
        _write(out / "convergence_raw.csv", harness.convergence_csv(rows))
        _write(out / "convergence_summary.csv", harness.convergence_summary_csv(rows))
        return EXIT_OK
    s = run.scenario()
    params = replace(run.learn, seed=run.seed)
    _, _, trace = train_double_q(s, params)
    _write(out / "convergence.csv", trace.to_csv())
    if run.args.plot:
        from .plotting import plot_convergence
        print(plot_convergence(trace, out / "convergence.png"))
    return EXIT_OK


def cmd_oracle(run: Run) -> int:
    s = run.scenario()
    order, value = brute_force_optimum(s, cap=run.oracle_cap, workers=run.workers)
    out = run.output_dir()
    _write(out / "oracle.csv", f"order,satisfied,num_users\n{' '.join(map(str, order))},{value},{s.num_users}\n")
    _write(out / "evaluation_oracle.csv", evaluation_csv(s, evaluate_order(s, order)))
    return EXIT_OK


def cmd_trajectory(run: Run) -> int:
    s = run.scenario()
    order = _order_for(run, s)
    for path in harness.trajectory_export(s, order, run.output_dir(), plot=run.args.plot).values():
        print(path)
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "evaluate": cmd_evaluate, "sweep": cmd_sweep,
            "convergence": cmd_convergence, "oracle": cmd_oracle, "trajectory": cmd_trajectory}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uavdq", description="UAV service-order optimisation by double Q-learning")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="base seed (default 0)")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--runs", type=int, help="independent runs per sweep value (default 100)")
    common.add_argument("--algorithms", help="comma list from double-q,q-learning,random,oracle")
    common.add_argument("--workers", type=int, help="worker processes (default 1)")
    common.add_argument("--episodes", type=int, help="training episodes per run")
    common.add_argument("--epsilon-final", type=float, help="decay epsilon linearly to this value")

    scen = argparse.ArgumentParser(add_help=False)
    scen.add_argument("--scenario", help="scenario JSON file (default: generate from config + seed)")

    plot = argparse.ArgumentParser(add_help=False)
    plot.add_argument("--plot", action="store_true", help="also render PNG figures next to the CSV files")

    sub.add_parser("generate", parents=[common], help="sample a scenario and write scenario.json")
    p = sub.add_parser("train", parents=[common, scen, plot], help="train a learner on one scenario")
    p.add_argument("--algorithm", choices=["double-q", "q-learning"], default="double-q")
    p = sub.add_parser("evaluate", parents=[common, scen], help="time a service order per algorithm")
    p.add_argument("--order", help="explicit comma-separated service order")
    p = sub.add_parser("sweep", parents=[common, scen, plot], help="Monte Carlo parameter sweep")
    p.add_argument("--var", choices=harness.SWEEP_VARS)
    p.add_argument("--values", help="comma-separated sweep values")
    p = sub.add_parser("convergence", parents=[common, scen, plot], help="training convergence trace")
    p.add_argument("--users", help="comma list of user counts; reports episodes-to-convergence per count")
    sub.add_parser("oracle", parents=[common, scen], help="exhaustive-search optimum (small U only)")
    p = sub.add_parser("trajectory", parents=[common, scen, plot], help="export the UAV waypoint path")
    p.add_argument("--order", help="explicit comma-separated service order")
    p.add_argument("--algorithm", choices=harness.ALGORITHMS, default="double-q")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](Run(args))
    except OracleCapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    # every domain error derives from ValueError
    except (ValueError, OSError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
