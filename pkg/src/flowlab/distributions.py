"""Empirical CDFs and the two-sample Kolmogorov-Smirnov test."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .flow_cache import FlowRecord
from .trace import PacketRecord, Trace, as_trace


@dataclass(frozen=True)
class Ecdf:
    """Right-continuous step function F(x) = #{samples <= x} / n.

    ``values`` are the distinct sample values (ascending) and ``probs`` the
    cumulative probability reached at each; ``probs[-1]`` is exactly 1.0.
    """

    values: np.ndarray
    probs: np.ndarray
    n: int

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.values.tolist(), self.probs.tolist()))

    def __call__(self, x):
        idx = np.searchsorted(self.values, x, side="right")
        cum = np.concatenate(([0.0], self.probs))
        return cum[idx]


def ecdf(samples: Sequence[float] | np.ndarray) -> Ecdf:
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise ValueError("cannot build an ECDF from an empty sample")
    if np.isnan(x).any():
        raise ValueError("samples contain NaN")
    values, counts = np.unique(x, return_counts=True)
    n = int(x.size)
    # count / n per step keeps the final step exactly 1.0
    probs = np.cumsum(counts) / n
    return Ecdf(values, probs, n)


def ks_statistic(a: Ecdf, b: Ecdf) -> float:
    """Supremum distance between two ECDFs, evaluated at the union of steps."""
    grid = np.union1d(a.values, b.values)
    return float(np.max(np.abs(a(grid) - b(grid))))


def ks_critical_value(n1: int, n2: int, alpha: float = 0.05) -> float:
    """Asymptotic two-sample critical value ``c(alpha) * sqrt((n1+n2)/(n1*n2))``.

    ``c(alpha) = sqrt(-ln(alpha/2) / 2)``, which is 1.358 at alpha = 0.05.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    c = math.sqrt(-math.log(alpha / 2.0) / 2.0)
    return c * math.sqrt((n1 + n2) / (n1 * n2))


@dataclass(frozen=True)
class KsResult:
    statistic_d: float
    n1: int
    n2: int
    critical_value: float
    reject: bool
    alpha: float


def ks_test(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray, alpha: float = 0.05) -> KsResult:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    fa, fb = ecdf(a), ecdf(b)
    d = ks_statistic(fa, fb)
    crit = ks_critical_value(fa.n, fb.n, alpha)
    return KsResult(d, fa.n, fb.n, crit, d > crit, alpha)


FLOW_METRICS = ("packets", "bytes")


def flow_metric(flows: Sequence[FlowRecord], metric: str) -> np.ndarray:
    if metric not in FLOW_METRICS:
        raise ValueError(f"metric must be one of {FLOW_METRICS}, got {metric!r}")
    return np.fromiter((getattr(f, metric) for f in flows), dtype=np.int64, count=len(flows))


def flow_size_cdf(flows: Sequence[FlowRecord], metric: str = "packets") -> Ecdf:
    if not len(flows):
        raise ValueError("flow set is empty")
    return ecdf(flow_metric(flows, metric))


def packet_size_cdf(packets: Sequence[PacketRecord] | Trace) -> Ecdf:
    trace = as_trace(packets)
    if not len(trace):
        raise ValueError("packet set is empty")
    return ecdf(trace.byte_len)


@dataclass(frozen=True)
class IntervalKs:
    """KS outcome for one time interval; ``result`` is None if a side had no flows."""

    interval_index: int
    metric: str
    result: KsResult | None

    @property
    def reject(self) -> bool:
        return self.result is not None and self.result.reject


def _group_by_interval(flows, start_ts_us, width_us, n_intervals):
    groups: list[list[FlowRecord]] = [[] for _ in range(n_intervals)]
    for f in flows:
        k = (f.first_ts_us - start_ts_us) // width_us
        if 0 <= k < n_intervals:
            groups[k].append(f)
    return groups


def interval_ks(
    flows_a: Sequence[FlowRecord],
    flows_b: Sequence[FlowRecord],
    start_ts_us: int,
    width_s: float,
    n_intervals: int,
    metric: str = "packets",
    alpha: float = 0.05,
) -> list[IntervalKs]:
    """Per-interval two-sample KS on a flow metric.

    Each flow is assigned to the interval containing its ``first_ts_us``.
    """
    width_us = int(round(width_s * 1e6))
    ga = _group_by_interval(flows_a, start_ts_us, width_us, n_intervals)
    gb = _group_by_interval(flows_b, start_ts_us, width_us, n_intervals)
    out = []
    for i, (fa, fb) in enumerate(zip(ga, gb)):
        if fa and fb:
            res = ks_test(flow_metric(fa, metric), flow_metric(fb, metric), alpha)
        else:
            res = None
        out.append(IntervalKs(i, metric, res))
    return out


def rejection_rate(rows: Sequence[IntervalKs]) -> float:
    """Share of intervals that rejected; untestable intervals count as not rejected."""
    if not rows:
        return 0.0
    return sum(r.reject for r in rows) / len(rows)
