"""Poisson-bootstrap confidence intervals for quantiles and quantile differences.

Two routes are provided for each estimand:

* ``classic`` draws the Poisson frequencies of every replicate and locates
  the bootstrap quantile by a cumulative-frequency scan over the sorted
  sample (no bootstrap vector is ever materialised unless asked for);
* ``fast`` never resamples. One-sample intervals read two order statistics
  at conservative ``Bin(N + 1, q)`` quantiles; two-sample intervals draw
  binomial indexes per arm and difference the selected order statistics.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .index_distribution import binomial_index_quantile, sample_binomial_indexes
from .quantile_core import INTEGER_SNAP, QLike, SortedSample, check_q, g_indices
from .rng import RandomSource

Method = Literal["classic", "fast"]

# Replicates sharing one RNG sub-stream in the classic algorithms.
CLASSIC_BLOCK = 4096
_CLASSIC_CELLS = 1 << 22

TREATMENT_STREAM = 1
CONTROL_STREAM = 2


@dataclass(frozen=True)
class CiRequest:
    q: float
    alpha: float = 0.05
    b_replications: int = 10_000
    method: Method = "fast"
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", check_q(self.q))
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie strictly inside (0, 1), got {self.alpha!r}")
        if int(self.b_replications) != self.b_replications or self.b_replications < 1:
            raise ValueError("b_replications must be a positive integer")
        if self.method not in ("classic", "fast"):
            raise ValueError(f"method must be 'classic' or 'fast', got {self.method!r}")
        if not 0 <= int(self.seed) < 1 << 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def source(self) -> RandomSource:
        return RandomSource(self.seed)


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    nominal_level: float
    method: str
    q: float
    alpha: float
    seed: int
    indexes_used: Optional[tuple[int, int]] = None
    b_used: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.lower <= self.upper:
            raise ValueError(f"lower bound {self.lower} exceeds upper bound {self.upper}")

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "q": self.q,
            "alpha": self.alpha,
            "lower": self.lower,
            "upper": self.upper,
            "seed": self.seed,
        }
        if self.indexes_used is not None:
            out["indexes_used"] = list(self.indexes_used)
        if self.b_used is not None:
            out["b_used"] = self.b_used
        return out

    def table(self) -> tuple[list[str], list[list]]:
        d = self.to_dict()
        if "indexes_used" in d:
            d["indexes_used"] = "{},{}".format(*d["indexes_used"])
        return list(d), [list(d.values())]


@dataclass(frozen=True)
class TwoSampleData:
    treatment: SortedSample
    control: SortedSample

    def shifted(self, offset: float) -> "TwoSampleData":
        return TwoSampleData(self.treatment.shifted(offset), self.control.shifted(offset))

    def scaled(self, factor: float) -> "TwoSampleData":
        return TwoSampleData(self.treatment.scaled(factor), self.control.scaled(factor))


def _snap(x: float) -> float:
    nearest = round(x)
    return float(nearest) if abs(x - nearest) <= INTEGER_SNAP * max(1.0, abs(x)) else x


def conservative_ranks(b: int, alpha: float) -> tuple[int, int]:
    """1-based ranks of the outward-rounded ``alpha/2`` and ``1 - alpha/2`` quantiles."""
    lo = max(1, math.floor(_snap((b + 1) * alpha / 2.0)))
    hi = min(b, math.ceil(_snap((b + 1) * (1.0 - alpha / 2.0))))
    return lo, hi


def conservative_empirical_quantiles(estimates, alpha: float) -> tuple[float, float]:
    """Outward-rounded empirical quantiles of a vector of bootstrap estimates.

    Lower endpoint at rank ``max(1, floor((B+1) alpha/2))``, upper at
    ``min(B, ceil((B+1)(1 - alpha/2)))``. Uses selection, not a full sort.
    """
    est = np.asarray(estimates, dtype=np.float64).reshape(-1)
    if est.size == 0:
        raise ValueError("need at least one estimate")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie strictly inside (0, 1), got {alpha!r}")
    lo, hi = conservative_ranks(est.size, alpha)
    part = np.partition(est, (lo - 1, hi - 1))
    return float(part[lo - 1]), float(part[hi - 1])


def _classic_block(sample: SortedSample, q: float, reps: int, gen: np.random.Generator,
                   materialize: bool) -> tuple[np.ndarray, int]:
    """Bootstrap quantile estimates for ``reps`` Poisson replicates."""
    N = sample.n
    values = sample.values
    out = np.empty(reps)
    empty = 0
    rows = max(1, min(reps, _CLASSIC_CELLS // N))
    done = 0
    while done < reps:
        m = min(rows, reps - done)
        freq = gen.poisson(1.0, size=(m, N))
        cum = np.cumsum(freq, axis=1, dtype=np.int64)
        sizes = cum[:, -1]
        keep = sizes > 0
        empty += int(m - keep.sum())
        freq, cum, sizes = freq[keep], cum[keep], sizes[keep]
        k = np.clip(g_indices(q, sizes, gen.random(sizes.size)), 1, sizes)
        if materialize:
            est = np.array([np.sort(np.repeat(values, f))[kk - 1] for f, kk in zip(freq, k)])
        else:
            pos = (cum < k[:, None]).sum(axis=1)
            est = values[pos]
        out[done:done + sizes.size] = est
        done += sizes.size
    return out, empty


def bootstrap_quantiles(sample: SortedSample, q: QLike, b: int, rng: RandomSource, *,
                        materialize: bool = False, threads: int = 1) -> tuple[np.ndarray, int]:
    """``b`` Poisson-bootstrap quantile estimates and the count of empty redraws.

    Replicates are split into fixed blocks of :data:`CLASSIC_BLOCK`, each
    with its own child stream, so output does not depend on ``threads``.
    """
    q = check_q(q)
    n_blocks = -(-b // CLASSIC_BLOCK)

    def run(j: int):
        reps = min(CLASSIC_BLOCK, b - j * CLASSIC_BLOCK)
        return _classic_block(sample, q, reps, rng.child(j).generator, materialize)

    if threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(n_blocks)))
    else:
        parts = [run(j) for j in range(n_blocks)]
    return np.concatenate([p for p, _ in parts]), sum(e for _, e in parts)


def _require(req: CiRequest, method: str) -> None:
    if req.method != method:
        raise ValueError(f"request method is {req.method!r}, expected {method!r}")


def classic_ci_one_sample(sample: SortedSample, req: CiRequest, *,
                          materialize: bool = False, threads: int = 1) -> ConfidenceInterval:
    _require(req, "classic")
    est, _ = bootstrap_quantiles(sample, req.q, req.b_replications, req.source,
                                 materialize=materialize, threads=threads)
    lo, hi = conservative_empirical_quantiles(est, req.alpha)
    return ConfidenceInterval(lo, hi, 1.0 - req.alpha, "classic", req.q, req.alpha,
                              req.seed, b_used=req.b_replications)


def fast_index_pair(n: int, q: QLike, alpha: float) -> tuple[int, int]:
    i_lo = binomial_index_quantile(n, q, alpha / 2.0, "lower")
    i_hi = binomial_index_quantile(n, q, 1.0 - alpha / 2.0, "upper")
    return i_lo, i_hi


def fast_ci_one_sample(sample: SortedSample, req: CiRequest) -> ConfidenceInterval:
    """Interval from two order statistics; no randomness, no replicates."""
    _require(req, "fast")
    i_lo, i_hi = fast_index_pair(sample.n, req.q, req.alpha)
    return ConfidenceInterval(sample.order_statistic(i_lo), sample.order_statistic(i_hi),
                              1.0 - req.alpha, "fast", req.q, req.alpha, req.seed,
                              indexes_used=(i_lo, i_hi))


def classic_ci_two_sample(data: TwoSampleData, req: CiRequest, *,
                          materialize: bool = False, threads: int = 1) -> ConfidenceInterval:
    _require(req, "classic")
    src = req.source
    kw = dict(materialize=materialize, threads=threads)
    est_t, _ = bootstrap_quantiles(data.treatment, req.q, req.b_replications,
                                   src.child(TREATMENT_STREAM), **kw)
    est_c, _ = bootstrap_quantiles(data.control, req.q, req.b_replications,
                                   src.child(CONTROL_STREAM), **kw)
    lo, hi = conservative_empirical_quantiles(est_t - est_c, req.alpha)
    return ConfidenceInterval(lo, hi, 1.0 - req.alpha, "classic", req.q, req.alpha,
                              req.seed, b_used=req.b_replications)


def fast_difference_draws(data: TwoSampleData, q: QLike, b: int, rng: RandomSource) -> np.ndarray:
    """``b`` bootstrap differences built from binomial index draws per arm."""
    q = check_q(q)
    idx_t = sample_binomial_indexes(data.treatment.n, q, b, rng.child(TREATMENT_STREAM))
    idx_c = sample_binomial_indexes(data.control.n, q, b, rng.child(CONTROL_STREAM))
    return data.treatment.take(idx_t) - data.control.take(idx_c)


def fast_ci_two_sample(data: TwoSampleData, req: CiRequest) -> ConfidenceInterval:
    _require(req, "fast")
    diffs = fast_difference_draws(data, req.q, req.b_replications, req.source)
    lo, hi = conservative_empirical_quantiles(diffs, req.alpha)
    return ConfidenceInterval(lo, hi, 1.0 - req.alpha, "fast", req.q, req.alpha,
                              req.seed, b_used=req.b_replications)


def quantile_ci(sample: SortedSample, req: CiRequest, **kw) -> ConfidenceInterval:
    if req.method == "fast":
        return fast_ci_one_sample(sample, req)
    return classic_ci_one_sample(sample, req, **kw)


def diff_quantile_ci(data: TwoSampleData, req: CiRequest, **kw) -> ConfidenceInterval:
    if req.method == "fast":
        return fast_ci_two_sample(data, req)
    return classic_ci_two_sample(data, req, **kw)
