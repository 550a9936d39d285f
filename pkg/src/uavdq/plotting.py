"""PNG figures for sweep summaries, training traces and trajectories.

Uses ``matplotlib.figure.Figure`` directly so no GUI backend or global
pyplot state is involved.  PNG metadata is stripped so repeated runs write
identical bytes.
"""

from __future__ import annotations

from pathlib import Path

from matplotlib.figure import Figure

from .scenario import Scenario, UserKind
from .schedule import evaluate_order

_SAVE = {"dpi": 120, "metadata": {"Software": None}}
_STYLE = {"double-q": ("tab:red", "o"), "q-learning": ("tab:blue", "s"),
          "random": ("tab:gray", "^"), "oracle": ("black", "x")}
_AXIS_LABEL = {"endurance": "endurance time T (s)", "users": "number of users U",
               "aerial": "number of aerial users", "speed": "UAV speed (m/s)", "none": ""}


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    fig.savefig(path, **_SAVE)
    return path


def plot_sweep(rows, path) -> Path:
    """Mean satisfied users against the sweep variable, one line per algorithm."""
    fig = Figure(figsize=(5, 3.6))
    ax = fig.add_subplot()
    by_algo: dict[str, list] = {}
    for r in rows:
        by_algo.setdefault(r.algorithm, []).append(r)
    for algo, group in by_algo.items():
        group = sorted(group, key=lambda r: (r.sweep_value is None, r.sweep_value or 0))
        xs = [0 if r.sweep_value is None else r.sweep_value for r in group]
        color, marker = _STYLE.get(algo, (None, "."))
        ax.errorbar(xs, [r.mean_satisfied for r in group], yerr=[r.std_satisfied for r in group],
                    label=algo, color=color, marker=marker, capsize=2, lw=1.2)
    var = rows[0].sweep_var if rows else "none"
    ax.set_xlabel(_AXIS_LABEL.get(var, var))
    ax.set_ylabel("satisfied users")
    ax.grid(alpha=0.3)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def plot_convergence(trace, path) -> Path:
    fig = Figure(figsize=(5, 3.6))
    ax = fig.add_subplot()
    episodes = range(1, len(trace) + 1)
    ax.plot(episodes, trace.start_qa, label="max Q^A(start)", lw=1)
    ax.plot(episodes, trace.start_qb, label="max Q^B(start)", lw=1, ls="--")
    ax.set_xlabel("episode")
    ax.set_ylabel("Q value")
    ax.grid(alpha=0.3)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def plot_trajectory(s: Scenario, order, path) -> Path:
    """Top view of the tour; filled markers are satisfied users."""
    ev = evaluate_order(s, order)
    satisfied = {r.user_id for r in ev.records if r.satisfied}
    fig = Figure(figsize=(5, 5))
    ax = fig.add_subplot()
    xs = [s.uav.start_x] + [s.users[i].x for i in ev.order]
    ys = [s.uav.start_y] + [s.users[i].y for i in ev.order]
    ax.plot(xs, ys, color="tab:orange", lw=1, zorder=1)
    ax.scatter([s.uav.start_x], [s.uav.start_y], marker="*", s=120, color="black", label="UAV start")
    for kind, marker in ((UserKind.GROUND, "o"), (UserKind.AERIAL, "^")):
        users = [u for u in s.users if u.kind is kind]
        if not users:
            continue
        ax.scatter([u.x for u in users], [u.y for u in users], marker=marker, s=36,
                   facecolors=["tab:green" if u.id in satisfied else "none" for u in users],
                   edgecolors="tab:green", label=f"{kind.value} user", zorder=2)
    for pos, uid in enumerate(ev.order):
        u = s.users[uid]
        ax.annotate(str(pos + 1), (u.x, u.y), textcoords="offset points", xytext=(4, 4), fontsize=7)
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.legend(frameon=False, fontsize=8, loc="best")
    fig.tight_layout()
    return _save(fig, path)
