"""Figures written next to the tabular run reports."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

PathLike = Union[str, Path]

STYLE = {
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.frameon": False,
}


def _save(fig, path: PathLike) -> Path:
    path = Path(path)
    fig.tight_layout()
    # fixed metadata keeps reruns byte-identical
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_recall_curves(curves: Mapping[str, Mapping[str, Sequence[float]]], path: PathLike) -> Path:
    """One panel per entity type, one line per model (e.g. PU vs PN)."""
    types = [t for t in next(iter(curves.values())) if t != "micro"] or ["micro"]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(types), figsize=(3.2 * len(types), 2.8), squeeze=False)
        for ax, t in zip(axes[0], types):
            for name, series in curves.items():
                ys = series.get(t, [])
                ax.plot(range(len(ys)), ys, marker="o", ms=3, label=name)
            ax.set_title(t)
            ax.set_xlabel("iteration")
            ax.set_ylim(-0.02, 1.02)
        axes[0][0].set_ylabel("token recall")
        axes[0][-1].legend(loc="lower right")
        return _save(fig, path)


def plot_dictionary_growth(counts: Sequence[Mapping[str, int]], path: PathLike) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 2.8))
        # types that never gained an entry would only stack up on the zero line
        types = [t for t in counts[0] if any(c[t] for c in counts)] or list(counts[0])
        for t in types:
            ax.plot(range(len(counts)), [c[t] for c in counts], marker="o", ms=3, label=t)
        ax.set_xlabel("snapshot (0 = seed)")
        ax.set_ylabel("dictionary entries")
        ax.legend()
        return _save(fig, path)


def plot_risk_traces(traces: Sequence[Mapping[str, Sequence[float]]], path: PathLike) -> Path:
    """Per-epoch training risk, epochs of successive iterations laid end to end."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 2.8))
        types = sorted({t for tr in traces for t in tr})
        for t in types:
            xs, ys, offset = [], [], 0
            for tr in traces:
                vals = tr.get(t, [])
                xs.extend(range(offset, offset + len(vals)))
                ys.extend(vals)
                offset += max((len(v) for v in tr.values()), default=0)
            ax.plot(xs, ys, lw=1, label=t)
        ax.set_xlabel("epoch (cumulative)")
        ax.set_ylabel("training risk")
        ax.legend()
        return _save(fig, path)


def plot_scores(report, path: PathLike) -> Path:
    """Grouped precision/recall/F1 bars for an evaluation report."""
    names = list(report.per_type) + ["micro"]
    rows = [report.per_type[n] for n in names[:-1]] + [report.micro]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(1.2 * len(names) + 2, 2.8))
        width = 0.25
        for k, metric in enumerate(("precision", "recall", "f1")):
            ax.bar([i + (k - 1) * width for i in range(len(names))],
                   [getattr(r, metric) for r in rows], width, label=metric)
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names)
        ax.set_ylim(0, 1.05)
        ax.legend(ncol=3, loc="lower center")
        return _save(fig, path)
