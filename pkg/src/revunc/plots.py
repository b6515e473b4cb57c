"""Static vector figures of indices, impulse responses and revisions.

Every function returns the :class:`matplotlib.figure.Figure` it draws so that
callers (and tests) can inspect the artists; :func:`save_figure` writes it.
"""

from __future__ import annotations

import logging
import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .errors import MissingArtifactError  # noqa: E402
from .vintages import parse_quarter  # noqa: E402

log = logging.getLogger(__name__)

VECTOR_FORMATS = ("svg", "pdf")


def quarter_to_float(q) -> float:
    p = parse_quarter(q) if isinstance(q, str) else q
    return p.year + (p.quarter - 1) / 4.0


def _x(quarters) -> np.ndarray:
    return np.array([quarter_to_float(q) for q in quarters])


def _markers(ax, benchmark_dates, lo=None, hi=None) -> int:
    count = 0
    for d in benchmark_dates or ():
        x = quarter_to_float(d)
        if (lo is not None and x < lo) or (hi is not None and x > hi):
            continue
        ax.axvline(x, color="0.5", lw=0.8, ls=":", gid="benchmark")
        count += 1
    return count


def plot_index(frame: pd.DataFrame, title: str = "", benchmark_dates=None, overlays: dict | None = None):
    """Posterior mean with 68% and 90% bands; optional benchmark markers and external overlays."""
    x = _x(frame["quarter"])
    fig, ax = plt.subplots(figsize=(8, 3.5))
    ax.fill_between(x, frame["q05"], frame["q95"], color="C0", alpha=0.15, lw=0, label="90%")
    ax.fill_between(x, frame["q16"], frame["q84"], color="C0", alpha=0.3, lw=0, label="68%")
    ax.plot(x, frame["mean"], color="C0", lw=1.5, label="posterior mean", gid="index-mean")
    for k, (name, s) in enumerate((overlays or {}).items()):
        ax.plot(_x(s.index), s.to_numpy(float), lw=1.0, color=f"C{k + 1}", label=name)
    _markers(ax, benchmark_dates, x.min(), x.max())
    ax.set_title(title)
    ax.legend(loc="upper left", fontsize=8, frameon=False)
    fig.tight_layout()
    return fig


def plot_global(series: pd.Series, title: str = "Global uncertainty"):
    x = _x(series.index)
    fig, ax = plt.subplots(figsize=(8, 3.5))
    ax.plot(x, series.to_numpy(float), color="k", lw=1.5, gid="global")
    ax.axhline(0.0, color="0.6", lw=0.6)
    ax.set_title(title)
    fig.tight_layout()
    return fig


def plot_irf(summary: pd.DataFrame, title: str = "", variables=None, ncols: int = 4):
    """One panel per variable: mean response with the band columns of the summary."""
    lo_col, hi_col = [c for c in summary.columns if c not in ("variable", "horizon", "mean")]
    names = list(dict.fromkeys(summary["variable"])) if variables is None else list(variables)
    ncols = min(ncols, len(names))
    nrows = -(-len(names) // ncols)
    fig, axes = plt.subplots(nrows, ncols, figsize=(3 * ncols, 2.4 * nrows), squeeze=False)
    for ax, v in zip(axes.ravel(), names):
        d = summary[summary["variable"] == v].sort_values("horizon")
        ax.fill_between(d["horizon"], d[lo_col], d[hi_col], color="C3", alpha=0.25, lw=0)
        ax.plot(d["horizon"], d["mean"], color="C3", lw=1.4)
        ax.axhline(0.0, color="0.5", lw=0.6)
        ax.set_title(v, fontsize=9)
    for ax in axes.ravel()[len(names) :]:
        ax.remove()
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return fig


def plot_revision_boxplots(revisions: dict, title: str = "Revisions (percentage points)"):
    """Box per country of final-minus-first revisions."""
    names = list(revisions)
    data = [np.asarray(revisions[k], dtype=float) for k in names]
    data = [d[np.isfinite(d)] for d in data]
    fig, ax = plt.subplots(figsize=(max(3, 0.9 * len(names) + 1), 3.5))
    ax.boxplot(data, showfliers=False)
    ax.set_xticks(range(1, len(names) + 1), names)
    ax.axhline(0.0, color="0.6", lw=0.6)
    ax.set_title(title)
    fig.tight_layout()
    return fig


def save_figure(fig, path) -> Path:
    """Write ``fig`` in the vector format named by the suffix, atomically, then close it."""
    path = Path(path)
    fmt = path.suffix.lstrip(".").lower()
    if fmt not in VECTOR_FORMATS:
        raise ValueError(f"unsupported figure format {fmt!r}; use one of {VECTOR_FORMATS}")
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    os.close(fd)
    try:
        # a fixed hash salt and no date keep repeated runs byte-identical
        metadata = {"Date": None} if fmt == "svg" else {"CreationDate": None, "ModDate": None}
        with plt.rc_context({"svg.hashsalt": "revunc"}):
            fig.savefig(tmp, format=fmt, metadata=metadata)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)
        plt.close(fig)
    return path


def emit_plots(output_dir, figure_dir=None, benchmark_dates=None, fmt: str = "svg") -> list[Path]:
    """Render every figure whose inputs exist under a pipeline output directory.

    Missing inputs are skipped with a warning; nothing rendered at all raises
    :class:`MissingArtifactError`.
    """
    root = Path(output_dir)
    fig_dir = Path(figure_dir) if figure_dir else root / "report" / "figures"
    written: list[Path] = []

    for path in sorted((root / "index").glob("*_index.csv")) if (root / "index").is_dir() else []:
        code = path.name[: -len("_index.csv")]
        frame = pd.read_csv(path, dtype={"quarter": str})
        written.append(save_figure(plot_index(frame, code, benchmark_dates), fig_dir / f"index_{code}.{fmt}"))

    glob_path = root / "global" / "global_index.csv"
    if glob_path.exists():
        g = pd.read_csv(glob_path, dtype={"quarter": str})
        s = pd.Series(g["value"].to_numpy(float), index=g["quarter"])
        written.append(save_figure(plot_global(s), fig_dir / f"global.{fmt}"))
    else:
        log.warning("no global index at %s; skipping", glob_path)

    var_dir = root / "var"
    irf_files = sorted(var_dir.glob("*_irf.csv")) if var_dir.is_dir() else []
    for path in irf_files:
        name = path.name[: -len("_irf.csv")]
        summary = pd.read_csv(path)
        written.append(save_figure(plot_irf(summary, name), fig_dir / f"irf_{name}.{fmt}"))
    if not irf_files:
        log.warning("no impulse responses under %s; skipping", var_dir)

    panels = sorted((root / "ingest").glob("*_panel.csv")) if (root / "ingest").is_dir() else []
    if panels:
        revs = {}
        for path in panels:
            d = pd.read_csv(path)
            keep = ~d["edge_flag"].astype(str).str.lower().isin(("true", "1"))
            revs[path.name[: -len("_panel.csv")]] = (d["final"] - d["first"])[keep].to_numpy(float)
        written.append(save_figure(plot_revision_boxplots(revs), fig_dir / f"revisions.{fmt}"))
    else:
        log.warning("no release panels under %s; skipping revision boxplots", root / "ingest")

    if not written:
        raise MissingArtifactError(f"nothing to plot under {root}; run the earlier stages first")
    return written


__all__ = [
    "emit_plots",
    "plot_global",
    "plot_index",
    "plot_irf",
    "plot_revision_boxplots",
    "quarter_to_float",
    "save_figure",
]
