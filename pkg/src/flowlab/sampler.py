"""Packet sampling: systematic 1-in-N and independent Bernoulli(q)."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .trace import PacketRecord, Trace, as_trace, make_rng


@dataclass(frozen=True)
class SamplingSpec:
    mode: str = "systematic"
    n: int = 1
    q: float = 1.0
    phase: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.mode == "systematic":
            _check_systematic(self.n, self.phase)
        elif self.mode == "bernoulli":
            _check_probability(self.q)
        else:
            raise ValueError(f"unknown sampling mode {self.mode!r}")

    @property
    def probability(self) -> float:
        """Sampling probability used to scale counts back up."""
        return 1.0 / self.n if self.mode == "systematic" else self.q

    def apply(self, trace: Sequence[PacketRecord] | Trace) -> Trace:
        if self.mode == "systematic":
            return systematic_sample(trace, self.n, self.phase)
        return bernoulli_sample(trace, self.q, self.seed)


def _check_systematic(n: int, phase: int) -> None:
    if n < 1:
        raise ValueError(f"sampling period must be >= 1, got {n}")
    if not 0 <= phase < n:
        raise ValueError(f"phase must satisfy 0 <= phase < n, got phase={phase}, n={n}")


def _check_probability(q: float) -> None:
    if not 0.0 < q <= 1.0:
        raise ValueError(f"sampling probability must lie in (0, 1], got {q}")


def systematic_count(length: int, n: int, phase: int = 0) -> int:
    """Number of packets systematic sampling keeps from a trace of ``length``."""
    _check_systematic(n, phase)
    return (length - 1 - phase) // n + 1 if length > phase else 0


def systematic_sample(trace: Sequence[PacketRecord] | Trace, n: int, phase: int = 0) -> Trace:
    """Keep the packets whose zero-based position i satisfies ``i % n == phase``."""
    _check_systematic(n, phase)
    return as_trace(trace)[phase::n]


def bernoulli_sample(trace: Sequence[PacketRecord] | Trace, q: float, seed: int) -> Trace:
    """Keep each packet independently with probability ``q``."""
    _check_probability(q)
    trace = as_trace(trace)
    if q == 1.0:
        return trace
    keep = make_rng(seed).random(len(trace)) < q
    return trace[np.flatnonzero(keep)]
