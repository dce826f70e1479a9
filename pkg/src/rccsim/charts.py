"""SVG charts: windowed utilization per class and the active-fleet step chart."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .adaptive import FleetSchedule  # noqa: E402
from .report import WindowPoint  # noqa: E402

# fixed ids and no timestamp, so reruns produce identical files
_RC = {"svg.hashsalt": "rccsim", "svg.fonttype": "path"}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def series_xy(series: Sequence[WindowPoint]) -> tuple[list[float], list[float]]:
    """Plotted points: window start in hours against utilization."""
    return [p.start / 60 for p in series], [p.utilization for p in series]


def utilization_chart(series: Sequence[WindowPoint], truck_class: str, path: Path,
                      baseline: Optional[Sequence[WindowPoint]] = None) -> Path:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(8, 3.5))
        if baseline is not None and len(baseline):
            ax.plot(*series_xy(baseline), lw=0.8, color="0.6", label="fixed fleet")
        if len(series):
            ax.plot(*series_xy(series), lw=0.9, color="C0", label="this run")
        if baseline is not None:
            ax.legend(loc="lower right", fontsize=8)
        ax.set_ylim(0, 1.05)
        ax.set_xlabel("time (h)")
        ax.set_ylabel("utilization")
        ax.set_title(f"{truck_class} trucks, windowed utilization")
        fig.tight_layout()
        return _save(fig, path)


def fleet_chart(schedule: FleetSchedule, path: Path) -> Path:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(8, 3.5))
        steps = list(schedule.steps)
        if steps:
            xs = [t / 60 for t, _ in steps] + [schedule.horizon / 60]
            for j, name in enumerate(schedule.classes):
                ys = [c[j] for _, c in steps]
                ax.step(xs, ys + ys[-1:], where="post", label=name)
            ax.legend(loc="upper right", fontsize=8)
        ax.set_ylim(bottom=0)
        ax.set_xlabel("time (h)")
        ax.set_ylabel("active trucks")
        ax.set_title("active fleet")
        fig.tight_layout()
        return _save(fig, path)
