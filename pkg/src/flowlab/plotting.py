"""Report figures.

Figures are drawn on bare ``Figure`` objects (no pyplot state) and PNGs are
saved without software/date metadata, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.figure import Figure

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.0,
    "savefig.dpi": 120,
}

_PNG_METADATA = {"Software": None}


def _new(width=6.4, height=3.2, nrows=1, ncols=1):
    fig = Figure(figsize=(width, height), layout="constrained")
    axes = fig.subplots(nrows, ncols)
    return fig, axes


def _save(fig: Figure, path: Path) -> None:
    fig.savefig(path, format="png", metadata=_PNG_METADATA)


def _errors_array(errors):
    return np.array([np.nan if e is None else e for e in errors], dtype=np.float64)


def rate_figure(comparison, quantity: str, path: Path) -> None:
    """Original vs inverted per-bin rates, with the relative error on a twin axis."""
    orig = comparison.original
    t = (orig.bin_starts_us - orig.start_ts_us) / 1e6
    if quantity == "d":
        y, yn, err, label = orig.d, comparison.dn.values, comparison.e_d, "bytes per bin"
    else:
        y, yn, err, label = orig.p, comparison.pn.values, comparison.e_p, "packets per bin"
    fig, ax = _new()
    ax.plot(t, y, "-", color="C0", label="original")
    ax.plot(t, yn, "D", color="C1", markersize=3, label="inverted")
    ax.set_xlabel("time (s)")
    ax.set_ylabel(label)
    ax2 = ax.twinx()
    ax2.plot(t, _errors_array(err), ".", color="k", markersize=3, label="e(t)")
    ax2.set_ylabel("relative error")
    ax2.grid(False)
    handles = ax.get_legend_handles_labels()
    handles2 = ax2.get_legend_handles_labels()
    ax.legend(handles[0] + handles2[0], handles[1] + handles2[1], loc="upper right")
    ax.set_title(f"{label}, {orig.bin_width_s:g} s bins")
    _save(fig, path)


def error_figure(comparisons, path: Path) -> None:
    """Relative error per bin for d(t) and p(t), one trace per bin width."""
    fig, axes = _new(6.4, 4.8, nrows=2)
    for ax, quantity, title in zip(axes, ("d", "p"), ("data rate", "packet rate")):
        for c in comparisons:
            err = _errors_array(c.e_d if quantity == "d" else c.e_p)
            t = (c.original.bin_starts_us - c.original.start_ts_us) / 1e6
            ax.plot(t, err, ".-", markersize=3, label=f"{c.original.bin_width_s:g} s")
        ax.axhline(0.0, color="k", linewidth=0.5)
        ax.set_ylabel("relative error")
        ax.set_title(f"sampling and inversion error, {title}")
        ax.legend(loc="upper right")
    axes[-1].set_xlabel("time (s)")
    _save(fig, path)


def _step(ax, cdf, label, **kw):
    x = np.concatenate(([cdf.values[0]], cdf.values))
    y = np.concatenate(([0.0], cdf.probs))
    ax.step(x, y, where="post", label=label, **kw)


def packet_size_figure(cdfs: dict, path: Path) -> None:
    fig, ax = _new()
    for key, label in (("packet_size_unsampled", "unsampled"), ("packet_size_sampled", "sampled")):
        if key in cdfs:
            _step(ax, cdfs[key], label)
    ax.set_xlabel("packet size (octets)")
    ax.set_ylabel("cumulative probability")
    ax.set_ylim(0.0, 1.02)
    ax.legend(loc="lower right")
    _save(fig, path)


def flow_size_figure(cdfs: dict, path: Path) -> None:
    """Flow size in packets (left) and in octets (right), unsampled vs sampled."""
    fig, axes = _new(8.0, 3.2, ncols=2)
    for ax, metric, xlabel in zip(axes, ("packets", "bytes"), ("flow size (packets)", "flow length (octets)")):
        for side in ("unsampled", "sampled"):
            key = f"flow_{metric}_{side}"
            if key in cdfs:
                _step(ax, cdfs[key], side)
        ax.set_xscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("cumulative probability")
        ax.set_ylim(0.0, 1.02)
        ax.legend(loc="lower right")
    _save(fig, path)


def render_figures(result, out_dir: Path, cdfs: dict) -> list[Path]:
    """Write the five report figures; the rate plots use the narrowest bin width."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    comps = result.comparisons
    jobs = (
        ("data_rates.png", lambda p: rate_figure(comps[0], "d", p)),
        ("packet_rates.png", lambda p: rate_figure(comps[0], "p", p)),
        ("inversion_error.png", lambda p: error_figure(comps, p)),
        ("packet_size_cdf.png", lambda p: packet_size_figure(cdfs, p)),
        ("flow_size_cdf.png", lambda p: flow_size_figure(cdfs, p)),
    )
    written = []
    with matplotlib.rc_context(STYLE):
        for name, draw in jobs:
            draw(out_dir / name)
            written.append(out_dir / name)
    return written
