import itertools

import pytest
from hypothesis import given, settings, strategies as st

from uavdq.mdp import EnvState, IllegalActionError, RewardMode, StateKey, TrajectoryEnv, reward
from uavdq.schedule import evaluate_order, objective

from conftest import small_scenario


def test_reset_is_empty():
    env = TrajectoryEnv(small_scenario())
    st0 = env.reset()
    assert st0.served == 0 and st0.elapsed == 0.0 and st0.satisfied == 0 and st0.last == env.start


def test_available_actions():
    env = TrajectoryEnv(small_scenario(2, 1))
    s = env.reset()
    assert env.available_actions(s) == [0, 1, 2]
    s, _, _ = env.step(s, 0)
    assert env.available_actions(s) == [1, 2]
    full = EnvState(0b111, 2, 1.0, 0)
    assert env.available_actions(full) == [] and env.is_terminal(full)


def test_last_step_is_terminal_and_illegal_repeat_raises():
    env = TrajectoryEnv(small_scenario(1, 1))
    s, _, done = env.step(env.reset(), 1)
    assert not done
    with pytest.raises(IllegalActionError):
        env.step(s, 1)
    with pytest.raises(IllegalActionError):
        env.step(s, 5)
    _, _, done = env.step(s, 0)
    assert done


def test_reward_modes():
    before = EnvState(0b01, 0, 1.0, 0b01)
    sat = EnvState(0b11, 1, 2.0, 0b11)
    late = EnvState(0b11, 1, 2.0, 0b01)
    assert reward(before, sat) == 1.0
    assert reward(before, late) == 0.0
    assert reward(before, late, RewardMode.PAPER_CUMULATIVE) == 2.0
    with pytest.raises(ValueError, match="unknown reward mode"):
        reward(before, sat, "bogus")


def test_cumulative_reward_after_k_serves():
    env = TrajectoryEnv(small_scenario(2, 2), RewardMode.PAPER_CUMULATIVE)
    _, rewards = env.rollout([3, 1, 0, 2])
    assert rewards == [1.0, 2.0, 3.0, 4.0]


@given(st.integers(0, 500), st.floats(3, 40), st.data())
@settings(max_examples=40, deadline=None)
def test_undiscounted_return_equals_objective(seed, t, data):
    s = small_scenario(3, 2, endurance=t, seed=seed)
    order = data.draw(st.permutations(range(5)))
    env = TrajectoryEnv(s)
    final, rewards = env.rollout(order)
    assert len(rewards) == 5
    assert sum(rewards) == objective(evaluate_order(s, order))
    assert final.elapsed == evaluate_order(s, order).records[-1].total_time


def test_transitions_are_deterministic():
    env = TrajectoryEnv(small_scenario(2, 2, seed=9))
    a = env.step(env.step(env.reset(), 2)[0], 0)
    b = env.step(env.step(env.reset(), 2)[0], 0)
    assert a == b


def test_reachable_state_count_bounded():
    for n in (1, 3, 5):
        env = TrajectoryEnv(small_scenario(n - n // 2, n // 2))
        keys = {env.reset().key}
        frontier = [env.reset()]
        while frontier:
            nxt = []
            for st_ in frontier:
                acts = env.available_actions(st_)
                assert len(acts) <= n
                for a in acts:
                    child = env.step(st_, a)[0]
                    if child.key not in keys:
                        keys.add(child.key)
                        nxt.append(child)
            frontier = nxt
        assert len(keys) <= 2 ** n * (n + 1)
        # start + every (nonempty mask, member of mask) pair
        assert len(keys) == 1 + sum(k * len(list(itertools.combinations(range(n), k))) for k in range(1, n + 1))


def test_early_stop_ends_hopeless_episodes():
    s = small_scenario(2, 2, endurance=3.0, seed=1)
    plain = TrajectoryEnv(s)
    early = TrajectoryEnv(s, early_stop=True)
    state = early.reset()
    steps = 0
    done = False
    while not done:
        state, _, done = early.step(state, early.available_actions(state)[0])
        steps += 1
    assert steps < s.num_users
    tb = early.tables
    for i in early.available_actions(state):
        assert state.elapsed + tb.flight[state.last, i] + tb.tx[i] > tb.endurance[i]
    # without early stop an episode always lasts U steps
    state, rewards = plain.rollout(range(4))
    assert len(rewards) == 4 and plain.is_terminal(state)


def test_state_key_encoding_is_injective():
    n = 4
    codes = {StateKey(m, last).encode(n) for m in range(2 ** n) for last in range(n + 1)}
    assert len(codes) == 2 ** n * (n + 1)
