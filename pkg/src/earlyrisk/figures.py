"""Render per-user probability trajectories to image files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .client import RunRecord


def save_trajectory_figure(
    record: RunRecord,
    user_id: str,
    path: str | Path,
    gold_label: int | None = None,
) -> None:
    """Plot one user's per-round positive probability and alarm round.

    The alarm line is green when the alarm matches a known positive gold
    label, red when it contradicts it, and gray when no gold is given.
    """
    if user_id not in record.users:
        raise ValueError(f"user {user_id!r} does not appear in the run record")
    user = record.users[user_id]
    points = [(pt.round, pt.p_positive) for pt in user.trajectory if pt.p_positive is not None]
    if not points:
        raise ValueError(f"user {user_id!r} has no recorded probabilities")
    rounds, probabilities = zip(*points)

    fig, ax = plt.subplots(figsize=(8.0, 3.2))
    ax.plot(rounds, probabilities, marker="o", markersize=3, linewidth=1.2, color="tab:blue", label="p(positive)")
    threshold = record.policy.get("threshold")
    if isinstance(threshold, (int, float)):
        ax.axhline(threshold, color="tab:orange", linewidth=1.0, linestyle=":", label=f"threshold {threshold}")
    if user.decision == 1 and user.delay is not None:
        if gold_label is None:
            color = "tab:gray"
        else:
            color = "tab:green" if gold_label == 1 else "tab:red"
        ax.axvline(user.delay, color=color, linewidth=1.2, linestyle="--", label=f"alarm at round {user.delay}")
    ax.set_xlabel("round")
    ax.set_ylabel("positive probability")
    ax.set_ylim(-0.04, 1.04)
    ax.set_title(f"user {user_id}")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
