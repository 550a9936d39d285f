"""Service-order evaluation and the exhaustive-search oracle."""

from __future__ import annotations

import csv
import io
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import channel
from .scenario import Scenario

DEFAULT_ORACLE_CAP = 9


class ScheduleError(ValueError):
    pass


class OracleCapExceeded(ScheduleError):
    pass


@dataclass(frozen=True)
class TimingTables:
    """Order-independent timing data for one scenario.

    ``flight[k, j]`` is the flight time from hover point ``k`` to user ``j``;
    row ``U`` is the UAV start position.
    """

    flight: np.ndarray  # (U + 1, U)
    tx: np.ndarray  # (U,)
    endurance: np.ndarray  # (U,)

    @property
    def num_users(self) -> int:
        return len(self.tx)

    @property
    def start(self) -> int:
        return len(self.tx)


def timing_tables(s: Scenario) -> TimingTables:
    return _timing_tables_cached(s)


@lru_cache(maxsize=256)
def _timing_tables_cached(s: Scenario) -> TimingTables:
    uav = s.uav
    n = s.num_users
    hover = [(u.x, u.y) for u in s.users] + [(uav.start_x, uav.start_y)]
    flight = np.empty((n + 1, n))
    for k, xy in enumerate(hover):
        for j, user in enumerate(s.users):
            flight[k, j] = channel.flight_time(channel.distance_3d(xy, uav.altitude, user), uav.speed)
    tx = np.array([channel.transmission_delay(u, channel.user_rate(s, u)) for u in s.users])
    endurance = np.array([u.endurance for u in s.users])
    for arr in (flight, tx, endurance):
        arr.setflags(write=False)
    return TimingTables(flight, tx, endurance)


@dataclass(frozen=True)
class UserRecord:
    user_id: int
    position: int  # 0-based place in the order
    flight_time: float
    start_time: float
    wait_time: float
    tx_time: float
    total_time: float
    endurance: float
    satisfied: bool


@dataclass(frozen=True)
class ScheduleEvaluation:
    order: tuple[int, ...]
    records: tuple[UserRecord, ...]  # in service order
    num_users: int

    @property
    def satisfied_count(self) -> int:
        return sum(r.satisfied for r in self.records)

    @property
    def served_set(self) -> int:
        mask = 0
        for uid in self.order:
            mask |= 1 << uid
        return mask

    def record_for(self, user_id: int) -> UserRecord | None:
        for r in self.records:
            if r.user_id == user_id:
                return r
        return None


def _check_order(order, n: int) -> tuple[int, ...]:
    order = tuple(int(i) for i in order)
    seen = set()
    for uid in order:
        if not 0 <= uid < n:
            raise ScheduleError(f"user id {uid} out of range 0..{n - 1}")
        if uid in seen:
            raise ScheduleError(f"duplicate user id {uid} in order")
        seen.add(uid)
    return order


def evaluate_order(s: Scenario, order) -> ScheduleEvaluation:
    """Walk a (possibly partial) service order and time every served user."""
    tables = timing_tables(s)
    order = _check_order(order, s.num_users)
    records = []
    prev = tables.start
    start = 0.0
    for pos, uid in enumerate(order):
        t_f = float(tables.flight[prev, uid])
        t_w = start + t_f
        t_t = float(tables.tx[uid])
        total = t_w + t_t
        endurance = float(tables.endurance[uid])
        records.append(UserRecord(uid, pos, t_f, start, t_w, t_t, total, endurance, total <= endurance))
        prev, start = uid, total
    return ScheduleEvaluation(order, tuple(records), s.num_users)


def objective(ev: ScheduleEvaluation) -> int:
    return ev.satisfied_count


def count_satisfied(tables: TimingTables, order) -> int:
    prev = tables.start
    elapsed = 0.0
    count = 0
    flight, tx, endurance = tables.flight, tables.tx, tables.endurance
    for uid in order:
        elapsed = elapsed + flight[prev, uid] + tx[uid]
        if elapsed <= endurance[uid]:
            count += 1
        prev = uid
    return count


def _best_with_prefix(tables: TimingTables, first: int) -> tuple[int, tuple[int, ...]]:
    n = tables.num_users
    flight = tables.flight.tolist()
    tx = tables.tx.tolist()
    endurance = tables.endurance.tolist()
    rest = [i for i in range(n) if i != first]
    t0 = flight[n][first] + tx[first]
    base = 1 if t0 <= endurance[first] else 0
    best_value, best_order = -1, None
    for perm in itertools.permutations(rest):
        elapsed, prev, count = t0, first, base
        for uid in perm:
            elapsed = elapsed + flight[prev][uid] + tx[uid]
            if elapsed <= endurance[uid]:
                count += 1
            prev = uid
        if count > best_value:
            best_value, best_order = count, (first, *perm)
            if count == n:
                break
    return best_value, best_order


def brute_force_optimum(s: Scenario, cap: int = DEFAULT_ORACLE_CAP, workers: int = 1):
    """Exhaustive search over all service orders.

    Returns ``(order, satisfied_count)``; among optimal orders the
    lexicographically smallest one wins, independent of ``workers``.
    """
    n = s.num_users
    if n > cap:
        raise OracleCapExceeded(
            f"oracle refused: U={n} exceeds the cap of {cap} users ({n}! orders)")
    tables = timing_tables(s)
    firsts = range(n)
    if workers > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_best_with_prefix, [tables] * n, firsts))
    else:
        results = [_best_with_prefix(tables, f) for f in firsts]
    best_value, best_order = -1, None
    # prefixes ascend, so a strict > keeps the lexicographic minimum
    for value, order in results:
        if value > best_value:
            best_value, best_order = value, order
    return list(best_order), best_value


EVALUATION_COLUMNS = ["user_id", "kind", "order_position", "flight_s", "start_s", "wait_s",
                      "tx_s", "total_s", "endurance_s", "satisfied"]


def evaluation_rows(s: Scenario, ev: ScheduleEvaluation) -> list[dict]:
    """One row per user; unserved users get empty timing cells."""
    rows = []
    for user in s.users:
        rec = ev.record_for(user.id)
        row = {"user_id": user.id, "kind": user.kind.value, "endurance_s": repr(user.endurance)}
        if rec is None:
            row.update(order_position="", flight_s="", start_s="", wait_s="", tx_s="", total_s="",
                       satisfied=0)
        else:
            row.update(order_position=rec.position, flight_s=repr(rec.flight_time),
                       start_s=repr(rec.start_time), wait_s=repr(rec.wait_time),
                       tx_s=repr(rec.tx_time), total_s=repr(rec.total_time),
                       satisfied=int(rec.satisfied))
        rows.append(row)
    return rows


def evaluation_csv(s: Scenario, ev: ScheduleEvaluation) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=EVALUATION_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(evaluation_rows(s, ev))
    return buf.getvalue()
