"""Compiled training loop.

Mirrors ``learning._train_reference`` operation for operation so both paths
produce bit-identical tables from the same pre-drawn uniforms.
"""

import numpy as np
from numba import njit

_HASH_MULT = np.uint64(11400714819323198485)


@njit(cache=True)
def _slot(slots, keys, key, bits):
    mask = (1 << bits) - 1
    h = np.int64((np.uint64(key) * _HASH_MULT) >> np.uint64(64 - bits))
    while True:
        r = slots[h]
        if r < 0 or keys[r] == key:
            return h
        h = (h + 1) & mask


@njit(cache=True)
def _argmax_legal(values, legal, n_legal):
    best = legal[0]
    best_v = values[best]
    for j in range(1, n_legal):
        a = legal[j]
        if values[a] > best_v:
            best_v = values[a]
            best = a
    return best


@njit(cache=True)
def _argmax_mean_legal(va, vb, legal, n_legal):
    best = legal[0]
    best_v = (va[best] + vb[best]) / 2.0
    for j in range(1, n_legal):
        a = legal[j]
        v = (va[a] + vb[a]) / 2.0
        if v > best_v:
            best_v = v
            best = a
    return best


@njit(cache=True)
def _popcount(x):
    c = 0
    while x:
        x &= x - 1
        c += 1
    return c


@njit(cache=True)
def train(flight, tx, endurance, eps_schedule, draws, alpha, gamma, cumulative_reward,
          double, select_other, table_random, early_stop):
    n = tx.shape[0]
    n_episodes = eps_schedule.shape[0]
    start = n

    capacity = n_episodes * n + 1
    bits = 4
    while (1 << bits) < 2 * capacity:
        bits += 1
    slots = -np.ones(1 << bits, dtype=np.int64)
    keys = np.empty(capacity, dtype=np.int64)
    qa = np.zeros((capacity, n))
    qb = np.zeros((capacity, n))
    touched_a = np.zeros((capacity, n), dtype=np.bool_)
    touched_b = np.zeros((capacity, n), dtype=np.bool_)
    state_visits = np.zeros(capacity, dtype=np.int64)
    n_rows = 0

    tr_return = np.zeros(n_episodes)
    tr_satisfied = np.zeros(n_episodes, dtype=np.int64)
    tr_steps = np.zeros(n_episodes, dtype=np.int64)
    tr_gap = np.zeros(n_episodes)
    tr_mean_a = np.zeros(n_episodes)
    tr_mean_b = np.zeros(n_episodes)
    tr_start_a = np.zeros(n_episodes)
    tr_start_b = np.zeros(n_episodes)

    legal = np.empty(n, dtype=np.int64)
    next_legal = np.empty(n, dtype=np.int64)
    visit_rows = np.empty(n, dtype=np.int64)
    visit_actions = np.empty(n, dtype=np.int64)
    sum_a = 0.0
    sum_b = 0.0
    count_a = 0
    count_b = 0

    for ep in range(n_episodes):
        eps = eps_schedule[ep]
        served = 0
        last = start
        elapsed = 0.0
        ep_return = 0.0
        ep_satisfied = 0
        t = 0
        terminal = False
        while not terminal:
            key = served * (n + 1) + last
            h = _slot(slots, keys, key, bits)
            row = slots[h]
            if row < 0:
                row = n_rows
                slots[h] = row
                keys[row] = key
                n_rows += 1
            update_a = True
            if double:
                if table_random:
                    update_a = draws[ep, t, 0] < 0.5
                else:
                    update_a = state_visits[row] % 2 == 0
            state_visits[row] += 1

            n_legal = 0
            for i in range(n):
                if not (served >> i) & 1:
                    legal[n_legal] = i
                    n_legal += 1

            if draws[ep, t, 1] < eps:
                pick = int(draws[ep, t, 2] * n_legal)
                if pick >= n_legal:
                    pick = n_legal - 1
                a = legal[pick]
            elif not double:
                a = _argmax_legal(qa[row], legal, n_legal)
            elif select_other:
                if update_a:
                    a = _argmax_legal(qb[row], legal, n_legal)
                else:
                    a = _argmax_legal(qa[row], legal, n_legal)
            else:
                a = _argmax_mean_legal(qa[row], qb[row], legal, n_legal)

            elapsed = elapsed + flight[last, a] + tx[a]
            new_served = served | (1 << a)
            ok = elapsed <= endurance[a]
            if ok:
                ep_satisfied += 1
            if cumulative_reward:
                r = float(_popcount(new_served))
            else:
                r = 1.0 if ok else 0.0
            ep_return += r

            n_next = 0
            for i in range(n):
                if not (new_served >> i) & 1:
                    next_legal[n_next] = i
                    n_next += 1
            terminal = n_next == 0
            if not terminal and early_stop:
                terminal = True
                for j in range(n_next):
                    i = next_legal[j]
                    if elapsed + flight[a, i] + tx[i] <= endurance[i]:
                        terminal = False
                        break

            boot = 0.0
            if not terminal:
                nkey = new_served * (n + 1) + a
                nrow = slots[_slot(slots, keys, nkey, bits)]
                if nrow >= 0:
                    if not double:
                        boot = qa[nrow, _argmax_legal(qa[nrow], next_legal, n_next)]
                    elif update_a:
                        boot = qb[nrow, _argmax_legal(qa[nrow], next_legal, n_next)]
                    else:
                        boot = qa[nrow, _argmax_legal(qb[nrow], next_legal, n_next)]

            target = r + gamma * boot
            if update_a:
                old = qa[row, a]
                new = (1.0 - alpha) * old + alpha * target
                qa[row, a] = new
                sum_a += new - old
                if not touched_a[row, a]:
                    touched_a[row, a] = True
                    count_a += 1
            else:
                old = qb[row, a]
                new = (1.0 - alpha) * old + alpha * target
                qb[row, a] = new
                sum_b += new - old
                if not touched_b[row, a]:
                    touched_b[row, a] = True
                    count_b += 1

            visit_rows[t] = row
            visit_actions[t] = a
            served = new_served
            last = a
            t += 1

        gap = 0.0
        for j in range(t):
            d = abs(qa[visit_rows[j], visit_actions[j]] - qb[visit_rows[j], visit_actions[j]])
            if d > gap:
                gap = d
        tr_return[ep] = ep_return
        tr_satisfied[ep] = ep_satisfied
        tr_steps[ep] = t
        tr_gap[ep] = gap
        tr_mean_a[ep] = sum_a / count_a if count_a > 0 else 0.0
        tr_mean_b[ep] = sum_b / count_b if count_b > 0 else 0.0
        srow = slots[_slot(slots, keys, start, bits)]
        if srow >= 0:
            sa = qa[srow, 0]
            sb = qb[srow, 0]
            for i in range(1, n):
                if qa[srow, i] > sa:
                    sa = qa[srow, i]
                if qb[srow, i] > sb:
                    sb = qb[srow, i]
            tr_start_a[ep] = sa
            tr_start_b[ep] = sb

    return (keys[:n_rows].copy(), qa[:n_rows].copy(), qb[:n_rows].copy(),
            touched_a[:n_rows].copy(), touched_b[:n_rows].copy(),
            tr_return, tr_satisfied, tr_steps, tr_gap, tr_mean_a, tr_mean_b, tr_start_a, tr_start_b)
