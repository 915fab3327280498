"""Run-trace figures rendered to files (headless Agg backend).

Four PNGs per run: the end-effector path in three projections, joint traces,
per-tick command continuity, and effector channels.  Mode switches and grant
ticks show up as vertical rules so a discontinuity at a handover is visible
at a glance.  Files land in the directory given to `run_scenario`; nothing
here touches an interactive backend.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import RunReport, RunTrace
from .scenario import ScenarioScript

_SWITCH_STYLE = {"color": "tab:red", "alpha": 0.5, "linewidth": 0.8}


def _save(fig, directory: Path, name: str) -> Path:
    path = directory / name
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _mark_switches(ax, trace: RunTrace, report: RunReport) -> None:
    for tick in report.switch_ticks:
        ax.axvline(trace.times[tick - 1], **_SWITCH_STYLE)


def _ee_path(trace: RunTrace, report: RunReport,
             script: Optional[ScenarioScript], directory: Path) -> Path:
    xs = [p[0] for p in trace.ee_positions]
    ys = [p[1] for p in trace.ee_positions]
    zs = [p[2] for p in trace.ee_positions]
    fig, axes = plt.subplots(1, 3, figsize=(12, 4))
    for ax, (a, b, la, lb) in zip(
        axes, [(xs, ys, "x", "y"), (xs, zs, "x", "z"), (ys, zs, "y", "z")]
    ):
        ax.plot(a, b, linewidth=0.9)
        ax.plot(a[0], b[0], "o", color="tab:green", markersize=5)
        if script is not None:
            idx = {"x": 0, "y": 1, "z": 2}
            for wp in script.waypoints:
                ax.plot(wp.position[idx[la]], wp.position[idx[lb]], "*",
                        color="tab:orange", markersize=10)
        ax.set_xlabel(f"{la} [m]")
        ax.set_ylabel(f"{lb} [m]")
        ax.set_aspect("equal", adjustable="datalim")
        ax.grid(True, alpha=0.3)
    fig.suptitle(f"{report.scenario}: end-effector path (start dot, goal stars)")
    fig.tight_layout()
    return _save(fig, directory, "ee_path.png")


def _joints(trace: RunTrace, report: RunReport, directory: Path) -> Path:
    fig, ax = plt.subplots(figsize=(10, 4.5))
    dof = len(trace.joints[0]) if trace.joints else 0
    for j in range(dof):
        ax.plot(trace.times, [q[j] for q in trace.joints],
                linewidth=0.9, label=f"joint {j}")
    _mark_switches(ax, trace, report)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("angle [rad]")
    ax.legend(loc="upper right", fontsize=8, ncols=2)
    ax.grid(True, alpha=0.3)
    fig.suptitle(f"{report.scenario}: joints (mode switches in red)")
    fig.tight_layout()
    return _save(fig, directory, "joints.png")


def _continuity(trace: RunTrace, report: RunReport, directory: Path) -> Path:
    times, jumps = [], []
    prev = None
    for t, cmd in zip(trace.times, trace.command_joints):
        if cmd is not None and prev is not None:
            times.append(t)
            jumps.append(max(abs(a - b) for a, b in zip(cmd, prev)))
        if cmd is not None:
            prev = cmd
    fig, ax = plt.subplots(figsize=(10, 3.5))
    ax.plot(times, jumps, linewidth=0.9)
    _mark_switches(ax, trace, report)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("command step [rad]")
    ax.set_yscale("symlog", linthresh=1e-9)
    ax.grid(True, alpha=0.3)
    fig.suptitle(f"{report.scenario}: per-tick command step (switches in red)")
    fig.tight_layout()
    return _save(fig, directory, "continuity.png")


def _effector(trace: RunTrace, report: RunReport, directory: Path) -> Path:
    fig, ax = plt.subplots(figsize=(10, 3.5))
    channels = len(trace.effector[0]) if trace.effector else 0
    for c in range(channels):
        ax.plot(trace.times, [e[c] for e in trace.effector],
                linewidth=0.9, label=f"ch {c}")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("channel value")
    if channels:
        ax.legend(loc="upper right", fontsize=8, ncols=2)
    ax.grid(True, alpha=0.3)
    fig.suptitle(f"{report.scenario}: effector channels")
    fig.tight_layout()
    return _save(fig, directory, "effector.png")


def render_run_figures(
    trace: RunTrace,
    report: RunReport,
    directory: str | Path,
    script: Optional[ScenarioScript] = None,
) -> list[Path]:
    """Render the standard figure set for one run; returns written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if not trace.times:
        return []
    return [
        _ee_path(trace, report, script, directory),
        _joints(trace, report, directory),
        _continuity(trace, report, directory),
        _effector(trace, report, directory),
    ]
