"""Finite MDP over service decisions.

The table key is ``(served bitmask, last served user)``; elapsed time is
tracked in the state for reward computation but is not part of the key.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

from .scenario import Scenario
from .schedule import TimingTables, timing_tables


class RewardMode(str, enum.Enum):
    INCREMENTAL_SATISFIED = "incremental-satisfied"
    PAPER_CUMULATIVE = "paper-cumulative"


class IllegalActionError(RuntimeError):
    pass


class StateKey(NamedTuple):
    served: int
    last: int  # user id, or U for the start position

    def encode(self, num_users: int) -> int:
        return self.served * (num_users + 1) + self.last


@dataclass(frozen=True)
class EnvState:
    served: int
    last: int
    elapsed: float
    satisfied: int

    @property
    def key(self) -> StateKey:
        return StateKey(self.served, self.last)


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def reward(before: EnvState, after: EnvState, mode=RewardMode.INCREMENTAL_SATISFIED) -> float:
    try:
        mode = RewardMode(mode)
    except ValueError:
        raise ValueError(f"unknown reward mode {mode!r}") from None
    if mode is RewardMode.PAPER_CUMULATIVE:
        return float(popcount(after.served))
    return float(popcount(after.satisfied) - popcount(before.satisfied))


class TrajectoryEnv:
    """Deterministic environment: one step serves one user."""

    def __init__(self, scenario: Scenario, reward_mode=RewardMode.INCREMENTAL_SATISFIED,
                 early_stop: bool = False):
        self.scenario = scenario
        self.tables: TimingTables = timing_tables(scenario)
        self.num_users = scenario.num_users
        self.full_mask = (1 << self.num_users) - 1
        self.reward_mode = RewardMode(reward_mode)
        self.early_stop = early_stop

    @property
    def start(self) -> int:
        return self.num_users

    def reset(self) -> EnvState:
        return EnvState(served=0, last=self.start, elapsed=0.0, satisfied=0)

    def available_actions(self, state: EnvState) -> list[int]:
        return [i for i in range(self.num_users) if not state.served >> i & 1]

    def is_terminal(self, state: EnvState) -> bool:
        if state.served == self.full_mask:
            return True
        if self.early_stop:
            t = self.tables
            return not any(
                state.elapsed + t.flight[state.last, i] + t.tx[i] <= t.endurance[i]
                for i in self.available_actions(state))
        return False

    def step(self, state: EnvState, action: int) -> tuple[EnvState, float, bool]:
        if not 0 <= action < self.num_users or state.served >> action & 1:
            raise IllegalActionError(f"action {action} is not available (served mask {state.served:#b})")
        t = self.tables
        elapsed = state.elapsed + t.flight[state.last, action] + t.tx[action]
        satisfied = state.satisfied
        if elapsed <= t.endurance[action]:
            satisfied |= 1 << action
        nxt = EnvState(state.served | 1 << action, action, float(elapsed), satisfied)
        return nxt, reward(state, nxt, self.reward_mode), self.is_terminal(nxt)

    def rollout(self, order) -> tuple[EnvState, list[float]]:
        state = self.reset()
        rewards = []
        for a in order:
            state, r, _ = self.step(state, a)
            rewards.append(r)
        return state, rewards
