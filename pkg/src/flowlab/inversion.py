"""Simple inversion: scale sampled counts up by the inverse sampling probability."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class InvertedSeries:
    values: np.ndarray
    q: float

    def __len__(self) -> int:
        return len(self.values)


def _check_q(q: float) -> None:
    if not 0.0 < q <= 1.0:
        raise ValueError(f"sampling probability must lie in (0, 1], got {q}")


def invert_count(x: float, q: float) -> float:
    _check_q(q)
    if x < 0:
        raise ValueError(f"count must be non-negative, got {x}")
    return x / q


def invert_series(series: Sequence[float] | np.ndarray, q: float) -> InvertedSeries:
    _check_q(q)
    values = np.asarray(series, dtype=np.float64)
    if values.size and values.min() < 0:
        raise ValueError("series values must be non-negative")
    out = values / q
    out.setflags(write=False)
    return InvertedSeries(out, q)
