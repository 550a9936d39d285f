"""Monte Carlo experiments: parameter sweeps, convergence traces, trajectories."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .learning import (LearnParams, convergence_episode, extract_greedy_trajectory,
                       random_policy, train_double_q, train_q_learning)
from .scenario import Scenario, ScenarioDistribution, ScenarioError, generate_scenario
from .schedule import (DEFAULT_ORACLE_CAP, OracleCapExceeded, brute_force_optimum,
                       count_satisfied, evaluate_order, timing_tables)

ALGORITHMS = ("double-q", "q-learning", "random", "oracle")
SWEEP_VARS = ("endurance", "users", "aerial", "speed")
SUMMARY_COLUMNS = ["sweep_var", "sweep_value", "algorithm", "mean_satisfied", "std_satisfied", "runs"]
RAW_COLUMNS = ["sweep_var", "sweep_value", "algorithm", "run", "seed", "num_users", "satisfied"]


@dataclass(frozen=True)
class Sweep:
    var: str
    values: tuple[float, ...]

    def __post_init__(self):
        if self.var not in SWEEP_VARS:
            raise ScenarioError(f"sweep var must be one of {SWEEP_VARS}, got {self.var!r}")
        if not self.values:
            raise ScenarioError("sweep values must be nonempty")
        object.__setattr__(self, "values", tuple(self.values))


@dataclass(frozen=True)
class ExperimentConfig:
    distribution: ScenarioDistribution = field(default_factory=ScenarioDistribution)
    scenario: Scenario | None = None  # fixed instance instead of resampling
    seed: int = 0
    algorithms: tuple[str, ...] = ("double-q", "q-learning", "random")
    sweep: Sweep | None = None
    runs: int = 100
    learn: LearnParams = field(default_factory=LearnParams)
    workers: int = 1
    oracle_cap: int = DEFAULT_ORACLE_CAP

    def __post_init__(self):
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if self.runs < 1:
            raise ScenarioError(f"runs must be >= 1, got {self.runs}")
        if not self.algorithms:
            raise ScenarioError("at least one algorithm is required")
        for algo in self.algorithms:
            if algo not in ALGORITHMS:
                raise ScenarioError(f"unknown algorithm {algo!r}; choose from {ALGORITHMS}")
        if self.scenario is not None and self.sweep is not None and self.sweep.var in ("users", "aerial"):
            raise ScenarioError(f"sweep over {self.sweep.var!r} needs a distribution, not a fixed scenario")

    @property
    def sweep_values(self) -> tuple:
        return self.sweep.values if self.sweep else (None,)


@dataclass(frozen=True)
class RunRecord:
    sweep_value: float | None
    algorithm: str
    run: int
    seed: int
    num_users: int
    satisfied: int


@dataclass(frozen=True)
class ResultRow:
    sweep_var: str
    sweep_value: float | None
    algorithm: str
    mean_satisfied: float
    std_satisfied: float
    runs: int


def apply_sweep(dist: ScenarioDistribution, var: str | None, value) -> ScenarioDistribution:
    if var is None:
        return dist
    if var == "endurance":
        return replace(dist, endurance=float(value))
    if var == "speed":
        return replace(dist, uav=replace(dist.uav, speed=float(value)))
    if var == "users":
        n = _as_count(value, var)
        return replace(dist, num_ground=n - n // 2, num_aerial=n // 2)
    if var == "aerial":
        total = dist.num_users
        n = _as_count(value, var)
        if n > total:
            raise ScenarioError(f"aerial sweep value {n} exceeds the {total} users in the distribution")
        return replace(dist, num_ground=total - n, num_aerial=n)
    raise ScenarioError(f"unknown sweep var {var!r}")


def _as_count(value, var) -> int:
    if float(value) != int(value) or int(value) < 0:
        raise ScenarioError(f"{var} sweep values must be nonnegative integers, got {value}")
    return int(value)


def cell_scenario(cfg: ExperimentConfig, sweep_value, run: int) -> Scenario:
    var = cfg.sweep.var if cfg.sweep else None
    seed = cfg.seed + run
    if cfg.scenario is None:
        return generate_scenario(apply_sweep(cfg.distribution, var, sweep_value), seed)
    s = cfg.scenario
    if var == "endurance":
        s = s.with_endurance(float(sweep_value))
    elif var == "speed":
        s = replace(s, uav=replace(s.uav, speed=float(sweep_value)))
    return s


def solve(s: Scenario, algorithm: str, params: LearnParams, seed: int, oracle_cap: int = DEFAULT_ORACLE_CAP):
    """Service order chosen by ``algorithm`` for scenario ``s``."""
    if algorithm == "double-q":
        qa, qb, _ = train_double_q(s, replace(params, seed=seed))
        return extract_greedy_trajectory(s, qa, qb)
    if algorithm == "q-learning":
        q, _ = train_q_learning(s, replace(params, seed=seed))
        return extract_greedy_trajectory(s, q)
    if algorithm == "random":
        return random_policy(s, seed)
    if algorithm == "oracle":
        return brute_force_optimum(s, cap=oracle_cap)[0]
    raise ScenarioError(f"unknown algorithm {algorithm!r}")


def _run_cell(cfg: ExperimentConfig, sweep_value, run: int) -> list[RunRecord]:
    s = cell_scenario(cfg, sweep_value, run)
    seed = cfg.seed + run
    tables = timing_tables(s)
    out = []
    for algo in cfg.algorithms:
        order = solve(s, algo, cfg.learn, seed, cfg.oracle_cap)
        out.append(RunRecord(sweep_value, algo, run, seed, s.num_users, count_satisfied(tables, order)))
    return out


def _check_oracle_cap(cfg: ExperimentConfig) -> None:
    if "oracle" not in cfg.algorithms:
        return
    var = cfg.sweep.var if cfg.sweep else None
    for value in cfg.sweep_values:
        if cfg.scenario is not None:
            n = cfg.scenario.num_users
        else:
            n = apply_sweep(cfg.distribution, var, value).num_users
        if n > cfg.oracle_cap:
            raise OracleCapExceeded(
                f"oracle refused: U={n} exceeds the cap of {cfg.oracle_cap} users")


def run_records(cfg: ExperimentConfig) -> list[RunRecord]:
    """Every (sweep value, algorithm, run) outcome, sorted deterministically."""
    _check_oracle_cap(cfg)
    cells = [(v, r) for v in cfg.sweep_values for r in range(cfg.runs)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(_run_cell, [cfg] * len(cells), *zip(*cells),
                                   chunksize=max(1, len(cells) // (4 * cfg.workers))))
    else:
        chunks = [_run_cell(cfg, v, r) for v, r in cells]
    value_rank = {v: i for i, v in enumerate(cfg.sweep_values)}
    algo_rank = {a: i for i, a in enumerate(cfg.algorithms)}
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda r: (value_rank[r.sweep_value], algo_rank[r.algorithm], r.run))
    return records


def _sample_std(arr: np.ndarray) -> float:
    return float(arr.std(ddof=1)) if len(arr) > 1 else 0.0


def summarize(cfg: ExperimentConfig, records: list[RunRecord]) -> list[ResultRow]:
    var = cfg.sweep.var if cfg.sweep else "none"
    groups: dict[tuple, list[int]] = {}
    for rec in records:
        groups.setdefault((rec.sweep_value, rec.algorithm), []).append(rec.satisfied)
    rows = []
    for (value, algo), sats in groups.items():
        arr = np.asarray(sats, dtype=float)
        rows.append(ResultRow(var, value, algo, float(arr.mean()), _sample_std(arr), len(arr)))
    return rows


def run_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    return summarize(cfg, run_records(cfg))


# -- CSV ---------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if value.is_integer() and abs(value) < 1e15:
            return str(int(value))
        return repr(value)
    return str(value)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def raw_csv(cfg: ExperimentConfig, records: list[RunRecord]) -> str:
    var = cfg.sweep.var if cfg.sweep else "none"
    return _csv(RAW_COLUMNS, ((var, r.sweep_value, r.algorithm, r.run, r.seed, r.num_users, r.satisfied)
                              for r in records))


def summary_csv(rows: list[ResultRow]) -> str:
    return _csv(SUMMARY_COLUMNS, ((r.sweep_var, r.sweep_value, r.algorithm, float(r.mean_satisfied),
                                   float(r.std_satisfied), r.runs) for r in rows))


def read_summary(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_experiment(cfg: ExperimentConfig, out_dir, plot: bool = False) -> dict[str, Path]:
    """Run ``cfg`` and write raw + summary CSVs (and a figure) into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = run_records(cfg)
    rows = summarize(cfg, records)
    paths = {"raw": out / "raw.csv", "summary": out / "summary.csv"}
    paths["raw"].write_text(raw_csv(cfg, records))
    paths["summary"].write_text(summary_csv(rows))
    if plot:
        from .plotting import plot_sweep
        paths["figure"] = plot_sweep(rows, out / "summary.png")
    return paths


# -- convergence ---------------------------------------------------------------

def convergence_report(s: Scenario, params: LearnParams) -> str:
    """Per-episode double-Q training trace as CSV."""
    _, _, trace = train_double_q(s, params)
    return trace.to_csv()


CONVERGENCE_COLUMNS = ["num_users", "run", "seed", "episodes_to_converge_return",
                       "episodes_to_converge_qvalue", "final_start_qa", "final_start_qb"]


def _convergence_cell(dist, params, seed, window, tolerance, n, run):
    s = generate_scenario(apply_sweep(dist, "users", n), seed + run)
    _, _, trace = train_double_q(s, replace(params, seed=seed + run))
    return (int(n), run, seed + run,
            convergence_episode(trace.returns, window, tolerance),
            convergence_episode(trace.start_qa, 1, tolerance),
            float(trace.start_qa[-1]), float(trace.start_qb[-1]))


def convergence_sweep(dist: ScenarioDistribution, users, params: LearnParams, seed: int = 0,
                      runs: int = 1, window: int = 100, tolerance: float = 0.02,
                      workers: int = 1) -> list[tuple]:
    """Episodes-to-convergence per user count.

    Two measures per run: trailing-``window`` mean return within
    ``tolerance`` of its final value, and the start-state value of Q^A
    within ``tolerance`` of its final value.
    """
    cells = [(n, run) for n in users for run in range(runs)]
    args = [dist, params, seed, window, tolerance]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_convergence_cell, *([a] * len(cells) for a in args), *zip(*cells)))
    else:
        rows = [_convergence_cell(*args, n, run) for n, run in cells]
    return rows


def convergence_csv(rows) -> str:
    return _csv(CONVERGENCE_COLUMNS, rows)


CONVERGENCE_SUMMARY_COLUMNS = ["num_users", "mean_episodes_return", "std_episodes_return",
                               "mean_episodes_qvalue", "std_episodes_qvalue", "runs"]


def convergence_summary(rows) -> list[tuple]:
    groups: dict[int, list] = {}
    for row in rows:
        groups.setdefault(row[0], []).append(row)
    out = []
    for n in sorted(groups):
        ret = np.array([r[3] for r in groups[n]], dtype=float)
        qv = np.array([r[4] for r in groups[n]], dtype=float)
        out.append((n, float(ret.mean()), _sample_std(ret), float(qv.mean()), _sample_std(qv), len(ret)))
    return out


def convergence_summary_csv(rows) -> str:
    return _csv(CONVERGENCE_SUMMARY_COLUMNS, convergence_summary(rows))


# -- trajectories ----------------------------------------------------------------

WAYPOINT_COLUMNS = ["step", "user_id", "kind", "x", "y", "h", "arrival_s", "completion_s", "satisfied"]
USER_COLUMNS = ["user_id", "kind", "x", "y", "h", "served", "order_position", "satisfied"]


def trajectory_rows(s: Scenario, order):
    """Waypoints (start + one per served user, all at altitude H) and per-user flags."""
    ev = evaluate_order(s, order)
    H = s.uav.altitude
    waypoints = [(0, None, "start", s.uav.start_x, s.uav.start_y, H, 0.0, 0.0, None)]
    for rec in ev.records:
        u = s.users[rec.user_id]
        waypoints.append((rec.position + 1, u.id, u.kind.value, u.x, u.y, H, rec.wait_time,
                          rec.total_time, int(rec.satisfied)))
    users = []
    for u in s.users:
        rec = ev.record_for(u.id)
        users.append((u.id, u.kind.value, u.x, u.y, u.h, int(rec is not None),
                      None if rec is None else rec.position, int(rec is not None and rec.satisfied)))
    return waypoints, users


def trajectory_export(s: Scenario, order, out_dir, plot: bool = False) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    waypoints, users = trajectory_rows(s, order)
    paths = {"waypoints": out / "trajectory.csv", "users": out / "trajectory_users.csv"}
    paths["waypoints"].write_text(_csv(WAYPOINT_COLUMNS, waypoints))
    paths["users"].write_text(_csv(USER_COLUMNS, users))
    if plot:
        from .plotting import plot_trajectory
        paths["figure"] = plot_trajectory(s, order, out / "trajectory.png")
    return paths


def spearman(x, y) -> float:
    """Rank correlation; a constant ``y`` counts as perfectly nondecreasing (1.0)."""
    from scipy.stats import spearmanr
    if np.ptp(np.asarray(y, dtype=float)) == 0:
        return 1.0
    return float(spearmanr(x, y).statistic)
