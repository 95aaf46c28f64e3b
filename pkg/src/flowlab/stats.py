"""Binned rate series, moment summaries and relative-error series."""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from .inversion import InvertedSeries, invert_series
from .trace import PacketRecord, Trace, as_trace

DEFAULT_BIN_WIDTHS = (30.0, 120.0, 300.0)


@dataclass(frozen=True)
class BinnedSeries:
    """Per-bin byte counts ``d`` and packet counts ``p``.

    Bin k covers ``[start_ts_us + k*w, start_ts_us + (k+1)*w)``.
    ``excluded`` counts packets that fell outside the window.
    """

    bin_width_s: float
    start_ts_us: int
    d: np.ndarray
    p: np.ndarray
    excluded: int = 0

    def __len__(self) -> int:
        return len(self.d)

    @property
    def bin_width_us(self) -> int:
        return _width_us(self.bin_width_s)

    @property
    def bin_starts_us(self) -> np.ndarray:
        return self.start_ts_us + self.bin_width_us * np.arange(len(self.d), dtype=np.int64)


@dataclass(frozen=True)
class MomentSummary:
    """Population moments; skewness and kurtosis are ``None`` when undefined."""

    mean: float
    std: float
    skewness: float | None
    kurtosis_excess: float | None

    @property
    def defined(self) -> bool:
        return self.skewness is not None


@dataclass(frozen=True)
class MomentRow:
    quantity: str  # "d" or "p"
    bin_s: float
    series: str  # "original", "inverted" or "difference"
    summary: MomentSummary


def _width_us(bin_width_s: float) -> int:
    if not bin_width_s > 0:
        raise ValueError(f"bin width must be positive, got {bin_width_s}")
    w = int(round(bin_width_s * 1e6))
    if w < 1:
        raise ValueError(f"bin width {bin_width_s} s is below 1 us")
    return w


def bin_stream(
    packets: Sequence[PacketRecord] | Trace,
    bin_width_s: float,
    start_ts_us: int,
    end_ts_us: int,
) -> BinnedSeries:
    w = _width_us(bin_width_s)
    if start_ts_us > end_ts_us:
        raise ValueError("window start exceeds window end")
    trace = as_trace(packets)
    n_bins = -(-(end_ts_us - start_ts_us) // w)
    ts = trace.ts_us
    inside = (ts >= start_ts_us) & (ts < end_ts_us)
    idx = (ts[inside] - start_ts_us) // w
    p = np.bincount(idx, minlength=n_bins).astype(np.int64)
    d = np.bincount(idx, weights=trace.byte_len[inside], minlength=n_bins).astype(np.int64)
    return BinnedSeries(bin_width_s, start_ts_us, d, p, int(len(ts) - inside.sum()))


def moments(series: Sequence[float] | np.ndarray) -> MomentSummary:
    x = np.asarray(series, dtype=np.float64)
    n = len(x)
    if n < 2:
        raise ValueError(f"moments need at least 2 values, got {n}")
    mean = float(x.mean())
    if np.all(x == x[0]):
        return MomentSummary(float(x[0]), 0.0, None, None)
    dev = x - mean
    # Standardised moments are scale-free; normalising first keeps the
    # third and fourth powers clear of underflow/overflow.
    scale = float(np.abs(dev).max())
    if scale == 0.0:
        return MomentSummary(mean, 0.0, None, None)
    dev = dev / scale
    dev2 = dev * dev
    m2 = float(dev2.mean())
    if m2 == 0.0:
        return MomentSummary(mean, 0.0, None, None)
    m3 = float((dev2 * dev).mean())
    m4 = float((dev2 * dev2).mean())
    return MomentSummary(mean, scale * math.sqrt(m2), m3 / m2**1.5, m4 / (m2 * m2) - 3.0)


def relative_error(d: Sequence[float], dn: Sequence[float]) -> list[float | None]:
    """``(d - dn) / d`` per element; ``None`` where ``d == 0``."""
    d = np.asarray(d, dtype=np.float64)
    dn = np.asarray(dn, dtype=np.float64)
    if d.shape != dn.shape:
        raise ValueError(f"length mismatch: {len(d)} vs {len(dn)}")
    return [None if a == 0 else (a - b) / a for a, b in zip(d.tolist(), dn.tolist())]


def defined_values(values: Iterable[float | None]) -> np.ndarray:
    return np.array([v for v in values if v is not None], dtype=np.float64)


def table_rows(
    original: BinnedSeries, inverted_d: InvertedSeries, inverted_p: InvertedSeries
) -> list[MomentRow]:
    """Original, inverted and difference summaries for d(t) and p(t) at one bin width."""
    if len(inverted_d) != len(original) or len(inverted_p) != len(original):
        raise ValueError("inverted series are not aligned with the original bins")
    rows = []
    for quantity, orig, inv in (("d", original.d, inverted_d.values), ("p", original.p, inverted_p.values)):
        orig = orig.astype(np.float64)
        for label, values in (("original", orig), ("inverted", inv), ("difference", orig - inv)):
            rows.append(MomentRow(quantity, original.bin_width_s, label, moments(values)))
    return rows


@dataclass(frozen=True)
class BinnedComparison:
    """Unsampled bins next to the inverted sampled bins over the same window."""

    original: BinnedSeries
    sampled: BinnedSeries
    dn: InvertedSeries
    pn: InvertedSeries

    @property
    def e_d(self) -> list[float | None]:
        return relative_error(self.original.d, self.dn.values)

    @property
    def e_p(self) -> list[float | None]:
        return relative_error(self.original.p, self.pn.values)


def compare_binned(
    unsampled: Trace, sampled: Trace, q: float, bin_width_s: float, start_ts_us: int, end_ts_us: int
) -> BinnedComparison:
    orig = bin_stream(unsampled, bin_width_s, start_ts_us, end_ts_us)
    samp = bin_stream(sampled, bin_width_s, start_ts_us, end_ts_us)
    return BinnedComparison(orig, samp, invert_series(samp.d, q), invert_series(samp.p, q))


def moment_table(comparisons: Iterable[BinnedComparison]) -> list[MomentRow]:
    """Table rows for every bin width, ordered by quantity, then bin width."""
    rows = [r for c in comparisons for r in table_rows(c.original, c.dn, c.pn)]
    order = {"original": 0, "inverted": 1, "difference": 2}
    rows.sort(key=lambda r: (r.quantity, r.bin_s, order[r.series]))
    return rows


@dataclass(frozen=True)
class ErrorSummary:
    quantity: str
    bin_s: float
    mean_abs: float | None
    rms: float | None
    max_abs: float | None
    n_defined: int
    n_bins: int


def error_summary(comparison: BinnedComparison) -> list[ErrorSummary]:
    out = []
    w = comparison.original.bin_width_s
    for quantity, errors in (("d", comparison.e_d), ("p", comparison.e_p)):
        e = defined_values(errors)
        if len(e):
            out.append(ErrorSummary(
                quantity, w, float(np.abs(e).mean()), float(np.sqrt((e * e).mean())),
                float(np.abs(e).max()), len(e), len(errors),
            ))
        else:
            out.append(ErrorSummary(quantity, w, None, None, None, 0, len(errors)))
    return out
