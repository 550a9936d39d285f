"""Tabular agents: double Q-learning, single-table Q-learning, random order.

Training consumes a pre-drawn block of uniforms (three per step: table
coin, explore coin, random pick), so the compiled engine and the pure
Python reference engine see exactly the same randomness.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .mdp import RewardMode, StateKey, TrajectoryEnv
from .scenario import Scenario


class SelectionSource(str, enum.Enum):
    OTHER_TABLE = "other-table"
    SUM_OF_TABLES = "sum-of-tables"


class TableChoice(str, enum.Enum):
    ALTERNATE = "alternate"
    RANDOM = "random"


class LearningError(ValueError):
    pass


@dataclass(frozen=True)
class LearnParams:
    learning_rate: float = 0.5
    discount: float = 0.8
    epsilon: float = 0.5
    # linear decay from ``epsilon`` to this value over training; None = fixed
    epsilon_final: float | None = None
    episodes: int = 5000
    reward_mode: RewardMode = RewardMode.INCREMENTAL_SATISFIED
    selection_source: SelectionSource = SelectionSource.OTHER_TABLE
    table_choice: TableChoice = TableChoice.ALTERNATE
    early_stop: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "reward_mode", RewardMode(self.reward_mode))
        object.__setattr__(self, "selection_source", SelectionSource(self.selection_source))
        object.__setattr__(self, "table_choice", TableChoice(self.table_choice))
        if not 0.0 <= self.learning_rate <= 1.0:
            raise LearningError(f"learning_rate must be in [0, 1], got {self.learning_rate}")
        if not 0.0 <= self.discount < 1.0:
            raise LearningError(f"discount must be in [0, 1), got {self.discount}")
        for name in ("epsilon", "epsilon_final"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise LearningError(f"{name} must be in [0, 1], got {value}")
        if self.episodes < 0:
            raise LearningError(f"episodes must be >= 0, got {self.episodes}")

    def epsilon_schedule(self) -> np.ndarray:
        if self.epsilon_final is None or self.episodes <= 1:
            return np.full(self.episodes, float(self.epsilon))
        k = np.arange(self.episodes)
        return self.epsilon + (self.epsilon_final - self.epsilon) * k / (self.episodes - 1)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("reward_mode", "selection_source", "table_choice"):
            d[key] = getattr(self, key).value
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "LearnParams":
        names = {f.name for f in fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise LearningError(f"unknown learning parameter(s): {sorted(unknown)}")
        return cls(**doc)


class QTable:
    """Sparse (state, action) -> value map; unseen pairs read as ``default`` (0)."""

    def __init__(self, num_users: int, capacity: int = 64, default: float = 0.0):
        self.num_users = num_users
        self.default = default
        self._index: dict[int, int] = {}
        self._values = np.zeros((capacity, num_users))
        self._touched = np.zeros((capacity, num_users), dtype=bool)

    @classmethod
    def from_arrays(cls, num_users, keys, values, touched) -> "QTable":
        table = cls.__new__(cls)
        table.num_users = num_users
        table.default = 0.0
        table._index = dict(zip(keys.tolist(), range(len(keys))))
        table._values = values
        table._touched = touched
        return table

    def _encode(self, key) -> int:
        return key[0] * (self.num_users + 1) + key[1]

    def _decode(self, code: int) -> StateKey:
        return StateKey(*divmod(code, self.num_users + 1))

    def _row_index(self, key, create: bool = False) -> int:
        code = self._encode(key)
        idx = self._index.get(code, -1)
        if idx < 0 and create:
            idx = len(self._index)
            if idx >= len(self._values):
                grow = len(self._values) or 1
                self._values = np.vstack([self._values, np.full((grow, self.num_users), self.default)])
                self._touched = np.vstack([self._touched, np.zeros((grow, self.num_users), dtype=bool)])
            self._index[code] = idx
        return idx

    def get(self, key, action: int) -> float:
        idx = self._row_index(key)
        return self.default if idx < 0 else float(self._values[idx, action])

    def row(self, key) -> np.ndarray:
        idx = self._row_index(key)
        if idx < 0:
            return np.full(self.num_users, self.default)
        return self._values[idx].copy()

    def set(self, key, action: int, value: float) -> None:
        if not math.isfinite(value):
            raise LearningError(f"non-finite Q value {value} at {key}, action {action}")
        idx = self._row_index(key, create=True)
        self._values[idx, action] = value
        self._touched[idx, action] = True

    def argmax(self, key, legal) -> int:
        """Greedy action over ``legal``; ties go to the smallest user id."""
        return _argmax(self.row(key), sorted(legal))

    def max_value(self, key, legal) -> float:
        row = self.row(key)
        return float(row[_argmax(row, sorted(legal))])

    def items(self):
        """Touched ``((StateKey, action), value)`` pairs in key order."""
        for code in sorted(self._index):
            idx = self._index[code]
            key = self._decode(code)
            for a in np.flatnonzero(self._touched[idx]):
                yield (key, int(a)), float(self._values[idx, a])

    def __len__(self) -> int:
        rows = list(self._index.values())
        return int(self._touched[rows].sum()) if rows else 0

    def __contains__(self, pair) -> bool:
        key, action = pair
        idx = self._row_index(key)
        return idx >= 0 and bool(self._touched[idx, action])

    def mean_value(self) -> float:
        vals = [v for _, v in self.items()]
        return float(np.mean(vals)) if vals else 0.0

    def shift(self, constant: float) -> "QTable":
        """Copy with ``constant`` added to every entry, unseen ones included."""
        codes = sorted(self._index)
        rows = [self._index[c] for c in codes]
        out = QTable.from_arrays(self.num_users, np.array(codes, dtype=np.int64),
                                 self._values[rows] + constant, self._touched[rows].copy())
        out.default = self.default + constant
        return out

    def to_dict(self) -> dict[str, float]:
        return {f"{key.served}:{key.last}:{a}": v for (key, a), v in self.items()}

    @classmethod
    def from_dict(cls, num_users: int, doc: dict[str, float]) -> "QTable":
        table = cls(num_users)
        for text, value in doc.items():
            try:
                served, last, action = (int(p) for p in text.split(":"))
            except ValueError:
                raise LearningError(f"malformed Q-table key {text!r}") from None
            table.set(StateKey(served, last), action, float(value))
        return table


def _argmax(values, legal) -> int:
    best = legal[0]
    best_v = values[best]
    for a in legal[1:]:
        if values[a] > best_v:
            best_v = values[a]
            best = a
    return best


def _argmax_mean(va, vb, legal) -> int:
    best = legal[0]
    best_v = (va[best] + vb[best]) / 2.0
    for a in legal[1:]:
        v = (va[a] + vb[a]) / 2.0
        if v > best_v:
            best_v = v
            best = a
    return best


class Transition(NamedTuple):
    state: StateKey
    action: int
    reward: float
    next_state: StateKey
    next_legal: tuple[int, ...]  # empty when next_state is terminal


def select_action(key, qa: QTable, qb: QTable | None, legal, epsilon: float, rng,
                  source=SelectionSource.OTHER_TABLE, updating: str = "A") -> int:
    """Epsilon-greedy choice over ``legal``.

    Always consumes two uniforms from ``rng`` (explore coin, pick).  With
    ``qb=None`` the greedy action comes from ``qa`` alone.  Under the
    ``other-table`` source the greedy action is read from the table that is
    *not* being updated.
    """
    legal = sorted(legal)
    if not legal:
        raise LearningError("select_action called with no legal actions")
    u_explore = rng.random()
    u_pick = rng.random()
    if u_explore < epsilon:
        return legal[min(int(u_pick * len(legal)), len(legal) - 1)]
    if qb is None:
        return _argmax(qa.row(key), legal)
    if SelectionSource(source) is SelectionSource.OTHER_TABLE:
        table = qb if updating == "A" else qa
        return _argmax(table.row(key), legal)
    return _argmax_mean(qa.row(key), qb.row(key), legal)


def action_probabilities(key, q: QTable, legal, epsilon: float) -> dict[int, float]:
    """Closed-form epsilon-greedy distribution over ``legal``."""
    legal = sorted(legal)
    greedy = _argmax(q.row(key), legal)
    base = epsilon / len(legal)
    return {a: base + (1.0 - epsilon if a == greedy else 0.0) for a in legal}


def _td(old: float, reward: float, boot: float, alpha: float, gamma: float) -> float:
    return (1.0 - alpha) * old + alpha * (reward + gamma * boot)


def double_q_update(qa: QTable, qb: QTable, tr: Transition, which: str, params: LearnParams) -> float:
    """Update exactly one table; the bootstrap value comes from the other one."""
    if which not in ("A", "B"):
        raise LearningError(f"which must be 'A' or 'B', got {which!r}")
    update, other = (qa, qb) if which == "A" else (qb, qa)
    boot = 0.0
    if tr.next_legal:
        best = update.argmax(tr.next_state, tr.next_legal)
        boot = other.get(tr.next_state, best)
    new = _td(update.get(tr.state, tr.action), tr.reward, boot, params.learning_rate, params.discount)
    update.set(tr.state, tr.action, new)
    return new


def q_update(q: QTable, tr: Transition, params: LearnParams) -> float:
    boot = q.max_value(tr.next_state, tr.next_legal) if tr.next_legal else 0.0
    new = _td(q.get(tr.state, tr.action), tr.reward, boot, params.learning_rate, params.discount)
    q.set(tr.state, tr.action, new)
    return new


@dataclass
class TrainingTrace:
    """Per-episode learning statistics."""

    returns: np.ndarray
    satisfied: np.ndarray
    steps: np.ndarray
    gap: np.ndarray  # max |QA - QB| over the pairs visited in the episode
    mean_qa: np.ndarray  # mean over touched entries
    mean_qb: np.ndarray
    start_qa: np.ndarray  # max_a Q(start, a)
    start_qb: np.ndarray

    COLUMNS = ("episode", "env_steps", "return", "satisfied", "steps", "gap_visited",
               "mean_qa", "mean_qb", "start_qa", "start_qb")

    def __len__(self) -> int:
        return len(self.returns)

    @property
    def env_steps(self) -> np.ndarray:
        return np.cumsum(self.steps)

    def rows(self):
        env_steps = self.env_steps
        for i in range(len(self)):
            yield (i, int(env_steps[i]), float(self.returns[i]), int(self.satisfied[i]),
                   int(self.steps[i]), float(self.gap[i]), float(self.mean_qa[i]),
                   float(self.mean_qb[i]), float(self.start_qa[i]), float(self.start_qb[i]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.COLUMNS)
        for row in self.rows():
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
        return buf.getvalue()


def convergence_episode(returns, window: int = 100, tolerance: float = 0.02) -> int:
    """First episode whose trailing-``window`` mean return is within ``tolerance``
    (relative) of the final trailing mean."""
    returns = np.asarray(returns, dtype=float)
    if len(returns) < window:
        return len(returns) - 1
    csum = np.concatenate([[0.0], np.cumsum(returns)])
    trailing = (csum[window:] - csum[:-window]) / window
    final = trailing[-1]
    ok = np.abs(trailing - final) <= tolerance * abs(final)
    return int(np.argmax(ok)) + window - 1


class _Replay:
    """Feeds pre-drawn uniforms through an ``rng.random()`` interface."""

    def __init__(self, values):
        self._values = iter(values)

    def random(self) -> float:
        return float(next(self._values))


def _draws(scenario: Scenario, params: LearnParams) -> np.ndarray:
    rng = np.random.default_rng([params.seed, 0x51])
    return rng.random((params.episodes, scenario.num_users, 3))


def _train_reference(scenario: Scenario, params: LearnParams, double: bool):
    env = TrajectoryEnv(scenario, params.reward_mode, params.early_stop)
    n = env.num_users
    qa, qb = QTable(n), QTable(n)
    draws = _draws(scenario, params)
    eps_schedule = params.epsilon_schedule()
    alpha, gamma = params.learning_rate, params.discount
    trace = {k: np.zeros(params.episodes) for k in
             ("returns", "gap", "mean_qa", "mean_qb", "start_qa", "start_qb")}
    trace["satisfied"] = np.zeros(params.episodes, dtype=np.int64)
    trace["steps"] = np.zeros(params.episodes, dtype=np.int64)
    sums = {"A": 0.0, "B": 0.0}
    counts = {"A": 0, "B": 0}
    state_visits: dict[StateKey, int] = {}
    start_key = env.reset().key

    for ep in range(params.episodes):
        state = env.reset()
        terminal = False
        visited = []
        ep_return = 0.0
        t = 0
        while not terminal:
            coin, u_explore, u_pick = draws[ep, t]
            if not double:
                which = "A"
            elif params.table_choice is TableChoice.RANDOM:
                which = "A" if coin < 0.5 else "B"
            else:
                which = "A" if state_visits.get(state.key, 0) % 2 == 0 else "B"
            state_visits[state.key] = state_visits.get(state.key, 0) + 1
            legal = env.available_actions(state)
            action = select_action(state.key, qa, qb if double else None, legal, eps_schedule[ep],
                                   _Replay((u_explore, u_pick)), params.selection_source, which)
            nxt, r, terminal = env.step(state, action)
            tr = Transition(state.key, action, r, nxt.key,
                            () if terminal else tuple(env.available_actions(nxt)))
            table = qa if which == "A" else qb
            old = table.get(tr.state, action)
            had = (tr.state, action) in table
            new = double_q_update(qa, qb, tr, which, params) if double else q_update(qa, tr, params)
            sums[which] += new - old
            counts[which] += 0 if had else 1
            ep_return += r
            visited.append((tr.state, action))
            state = nxt
            t += 1

        trace["returns"][ep] = ep_return
        trace["satisfied"][ep] = bin(state.satisfied).count("1")
        trace["steps"][ep] = t
        trace["gap"][ep] = max(abs(qa.get(k, a) - qb.get(k, a)) for k, a in visited)
        trace["mean_qa"][ep] = sums["A"] / counts["A"] if counts["A"] else 0.0
        trace["mean_qb"][ep] = sums["B"] / counts["B"] if counts["B"] else 0.0
        trace["start_qa"][ep] = qa.row(start_key).max()
        trace["start_qb"][ep] = qb.row(start_key).max()

    return qa, qb, TrainingTrace(**trace)


def _train_compiled(scenario: Scenario, params: LearnParams, double: bool):
    from . import _kernels
    from .schedule import timing_tables

    tables = timing_tables(scenario)
    n = scenario.num_users
    out = _kernels.train(
        np.ascontiguousarray(tables.flight), np.ascontiguousarray(tables.tx),
        np.ascontiguousarray(tables.endurance), params.epsilon_schedule(), _draws(scenario, params),
        float(params.learning_rate), float(params.discount),
        params.reward_mode is RewardMode.PAPER_CUMULATIVE, double,
        params.selection_source is SelectionSource.OTHER_TABLE,
        params.table_choice is TableChoice.RANDOM, bool(params.early_stop))
    keys, va, vb, ta, tb = out[:5]
    trace = TrainingTrace(*out[5:])
    return QTable.from_arrays(n, keys, va, ta), QTable.from_arrays(n, keys, vb, tb), trace


def _train(scenario, params, double, engine):
    if engine == "compiled":
        return _train_compiled(scenario, params, double)
    if engine == "reference":
        return _train_reference(scenario, params, double)
    raise LearningError(f"unknown engine {engine!r}")


def train_double_q(scenario: Scenario, params: LearnParams, engine: str = "compiled"):
    """Double Q-learning; returns ``(QA, QB, trace)``."""
    return _train(scenario, params, True, engine)


def train_q_learning(scenario: Scenario, params: LearnParams, engine: str = "compiled"):
    """Single-table Q-learning; returns ``(Q, trace)``."""
    q, _, trace = _train(scenario, params, False, engine)
    return q, trace


def extract_greedy_trajectory(scenario: Scenario, qa: QTable, qb: QTable | None = None) -> list[int]:
    """Follow argmax of the averaged tables from the start state until every user is served."""
    qb = qa if qb is None else qb
    env = TrajectoryEnv(scenario)
    state = env.reset()
    order = []
    while True:
        legal = env.available_actions(state)
        if not legal:
            return order
        a = _argmax_mean(qa.row(state.key), qb.row(state.key), legal)
        order.append(a)
        state, _, _ = env.step(state, a)


def random_policy(scenario: Scenario, seed: int) -> list[int]:
    rng = np.random.default_rng([seed, 0x52])
    return [int(i) for i in rng.permutation(scenario.num_users)]


# -- snapshots ---------------------------------------------------------------

def snapshot_dict(scenario: Scenario, params: LearnParams, qa: QTable, qb: QTable | None) -> dict:
    doc = {
        "scenario_hash": scenario.digest(),
        "num_users": scenario.num_users,
        "learn_params": params.to_dict(),
        "qa": qa.to_dict(),
    }
    if qb is not None:
        doc["qb"] = qb.to_dict()
    return doc


def save_snapshot(path, scenario: Scenario, params: LearnParams, qa: QTable, qb: QTable | None = None):
    Path(path).write_text(json.dumps(snapshot_dict(scenario, params, qa, qb), indent=1) + "\n")


def load_snapshot(path, scenario: Scenario | None = None):
    """Returns ``(qa, qb, params)``; ``qb`` is None for single-table snapshots."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise LearningError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    for key in ("scenario_hash", "num_users", "learn_params", "qa"):
        if key not in doc:
            raise LearningError(f"{path}: missing required field '{key}'")
    if scenario is not None and doc["scenario_hash"] != scenario.digest():
        raise LearningError(f"{path}: snapshot was trained on scenario {doc['scenario_hash']}, "
                            f"not {scenario.digest()}")
    n = int(doc["num_users"])
    qa = QTable.from_dict(n, doc["qa"])
    qb = QTable.from_dict(n, doc["qb"]) if "qb" in doc else None
    return qa, qb, LearnParams.from_dict(doc["learn_params"])
