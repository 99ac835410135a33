"""Sorted samples and the stochastic-rounding quantile estimator.

The estimator selects a single order statistic: with ``x = q * (n + 1)`` it
returns ``y[x]`` when ``x`` is an integer and otherwise ``y[ceil(x)]`` with
probability ``x mod 1``, ``y[floor(x)]`` with the remaining probability.
All indexes in the public API are 1-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .rng import RandomSource

# Relative slack used when deciding that q * (n + 1) is an integer.
# 0.3 * 10 evaluates to 3.0000000000000004 in binary floating point.
INTEGER_SNAP = 1e-9


@dataclass(frozen=True)
class QuantileQuery:
    q: float

    def __post_init__(self) -> None:
        q = float(self.q)
        if not (0.0 < q < 1.0):
            raise ValueError(f"q must lie strictly inside (0, 1), got {self.q!r}")
        object.__setattr__(self, "q", q)

    def __float__(self) -> float:
        return self.q


QLike = Union[float, QuantileQuery]


def check_q(q: QLike) -> float:
    """Return ``q`` as a float, rejecting anything outside (0, 1)."""
    return QuantileQuery(float(q)).q


class SortedSample:
    """Immutable non-decreasing vector of finite floats.

    Build one with :func:`sort_sample` unless the data is known to be sorted.
    """

    __slots__ = ("_values",)

    def __init__(self, values, *, check: bool = True) -> None:
        arr = np.array(values, dtype=np.float64, copy=True).reshape(-1)
        if arr.size == 0:
            raise ValueError("sample must contain at least one value")
        if check:
            if np.isnan(arr).any():
                raise ValueError("sample contains NaN")
            if arr.size > 1 and np.any(arr[1:] < arr[:-1]):
                raise ValueError("values are not sorted in non-decreasing order")
        arr.flags.writeable = False
        self._values = arr

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def n(self) -> int:
        return int(self._values.size)

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"SortedSample(n={self.n})"

    def order_statistic(self, i: int) -> float:
        """The ``i``-th smallest value, 1-based."""
        if not 1 <= i <= self.n:
            raise IndexError(f"order statistic index {i} outside [1, {self.n}]")
        return float(self._values[i - 1])

    def take(self, indexes: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`order_statistic` for an array of 1-based indexes."""
        return self._values[np.asarray(indexes, dtype=np.int64) - 1]

    def shifted(self, offset: float) -> "SortedSample":
        return SortedSample(self._values + offset, check=False)

    def scaled(self, factor: float) -> "SortedSample":
        if not factor > 0:
            raise ValueError("scale factor must be positive")
        return SortedSample(self._values * factor, check=False)


def sort_sample(raw: Sequence[float]) -> SortedSample:
    arr = np.asarray(raw, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValueError("cannot sort an empty sample")
    if np.isnan(arr).any():
        raise ValueError("sample contains NaN")
    return SortedSample(np.sort(arr, kind="stable"), check=False)


def rank_position(q: QLike, n: int) -> tuple[int, float]:
    """Split ``q * (n + 1)`` into ``(floor, remainder)``.

    Remainders within :data:`INTEGER_SNAP` of 0 or 1 are snapped so that
    exact integer positions stay deterministic.
    """
    q = check_q(q)
    x = q * (n + 1)
    nearest = round(x)
    if abs(x - nearest) <= INTEGER_SNAP * max(1.0, x):
        return int(nearest), 0.0
    lo = math.floor(x)
    return int(lo), x - lo


def g_index(q: QLike, n: int, rng: RandomSource, *, clamp: bool = True) -> int:
    """Stochastically rounded order-statistic index for a sample of size ``n``.

    Exactly one uniform is consumed from ``rng`` when ``q * (n + 1)`` is not
    an integer and none otherwise. With ``clamp`` the result is forced into
    ``[1, n]``; without it the raw rounding is returned, which can be 0 or
    ``n + 1`` for extreme ``q`` and small ``n``.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    lo, r = rank_position(q, n)
    idx = lo
    if r > 0.0 and rng.uniform() < r:
        idx = lo + 1
    if clamp:
        idx = min(max(idx, 1), n)
    return idx


def g_indices(q: float, sizes: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Vectorised unclamped :func:`g_index` for many sample sizes at once.

    ``uniforms`` must have the same shape as ``sizes``; one variate is used
    per entry whether or not it is needed, which keeps batch replay simple.
    """
    sizes = np.asarray(sizes, dtype=np.int64)
    x = q * (sizes + 1.0)
    nearest = np.rint(x)
    on_grid = np.abs(x - nearest) <= INTEGER_SNAP * np.maximum(1.0, x)
    lo = np.floor(x)
    r = np.where(on_grid, 0.0, x - lo)
    lo = np.where(on_grid, nearest, lo)
    return (lo + (uniforms < r)).astype(np.int64)


def quantile_estimate(sample: SortedSample, q: QLike, rng: RandomSource) -> float:
    """Return the order statistic selected by :func:`g_index`."""
    return sample.order_statistic(g_index(q, sample.n, rng))
