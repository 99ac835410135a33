"""Distribution of the original-sample index picked as a bootstrap quantile.

In a Poisson bootstrap replicate every order statistic of the bootstrap
sample is some order statistic of the original sample, so the bootstrap
quantile is fully described by *which* original index it lands on. This
module computes that index distribution three ways:

* :func:`exact_index_pmf` -- law of total probability over the bootstrap
  size, conditional trinomial counts below/at/above the index;
* :func:`binomial_index_pmf` -- the ``Bin(N + 1, q)`` approximation;
* :func:`simulate_index_pmf` -- brute-force Monte Carlo of the bootstrap.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy import stats

from .quantile_core import QLike, check_q, g_indices, rank_position
from .rng import RandomSource

Kind = Literal["exact", "binomial", "empirical"]
Tail = Literal["lower", "upper"]

# Bootstrap replications handled by one RNG sub-stream. Fixed so that
# tallies do not depend on the number of worker threads.
SIM_BLOCK = 1 << 16
# Work threshold (N * replications) below which the literal engine is used.
LITERAL_WORK_LIMIT = 2 * 10**8
_LITERAL_CELLS = 1 << 22


@dataclass
class IndexPmf:
    support_lo: int
    support_hi: int
    probs: np.ndarray
    kind: Kind
    normalized: bool
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.size != self.support_hi - self.support_lo + 1:
            raise ValueError("probs length does not match the support")
        if np.any(self.probs < 0) or np.any(self.probs > 1 + 1e-12):
            raise ValueError("probabilities must lie in [0, 1]")

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.support_lo, self.support_hi + 1)

    def prob(self, i: int) -> float:
        if self.support_lo <= i <= self.support_hi:
            return float(self.probs[i - self.support_lo])
        return 0.0

    def total(self) -> float:
        return math.fsum(self.probs)

    def mean(self) -> float:
        return float(np.dot(self.support, self.probs) / self.total())

    def normalize(self) -> "IndexPmf":
        total = self.total()
        if total <= 0:
            raise ValueError("cannot normalize a pmf with zero mass")
        diag = dict(self.diagnostics, raw_total=total)
        return IndexPmf(self.support_lo, self.support_hi, self.probs / total,
                        self.kind, True, diag)

    def lower_index(self, p: float) -> int:
        """Largest index whose CDF is at most ``p`` (support minimum if none)."""
        cdf = np.cumsum(self.probs) / self.total()
        ok = np.nonzero(cdf <= p)[0]
        return self.support_lo + int(ok[-1]) if ok.size else self.support_lo

    def upper_index(self, p: float) -> int:
        """Smallest index ``i`` with ``P(X >= i) <= 1 - p`` (support maximum if none)."""
        sf = np.cumsum(self.probs[::-1])[::-1] / self.total()
        ok = np.nonzero(sf <= 1.0 - p)[0]
        return self.support_lo + int(ok[0]) if ok.size else self.support_hi

    def to_dict(self) -> dict:
        diag = {"empty_redraws": int(self.diagnostics.get("empty_redraws", 0))}
        for key, value in self.diagnostics.items():
            if key != "empty_redraws":
                diag[key] = value
        return {
            "kind": self.kind,
            "support_lo": self.support_lo,
            "support_hi": self.support_hi,
            "probs": [float(p) for p in self.probs],
            "normalized": self.normalized,
            "diagnostics": diag,
        }


@dataclass(frozen=True)
class ExactPmfConfig:
    poisson_tail_mass: float = 1e-12
    max_n_supported: int = 300

    def __post_init__(self) -> None:
        if not 0.0 < self.poisson_tail_mass < 1e-6:
            raise ValueError("poisson_tail_mass must lie in (0, 1e-6)")
        if self.max_n_supported < 1:
            raise ValueError("max_n_supported must be positive")


def _check_n(n_sample: int) -> int:
    if int(n_sample) != n_sample or n_sample < 1:
        raise ValueError(f"sample size must be a positive integer, got {n_sample!r}")
    return int(n_sample)


def poisson_window(mean: int, tail_mass: float) -> tuple[int, int]:
    """Smallest contiguous window around ``mean`` holding ``1 - tail_mass`` of Poisson(mean).

    Grows outward one point at a time, always taking the heavier neighbour.
    """
    dist = stats.poisson(mean)
    lo = hi = int(mean)
    mass = float(dist.pmf(lo))
    target = 1.0 - tail_mass
    p_left = float(dist.pmf(lo - 1)) if lo > 0 else -1.0
    p_right = float(dist.pmf(hi + 1))
    while mass < target:
        if p_left >= p_right:
            lo -= 1
            mass += p_left
            p_left = float(dist.pmf(lo - 1)) if lo > 0 else -1.0
        else:
            hi += 1
            mass += p_right
            p_right = float(dist.pmf(hi + 1))
    return lo, hi


def _rounding_branches(q: float, n: int) -> list[tuple[int, float]]:
    """(bootstrap order-statistic position, probability) pairs for size ``n``."""
    lo, r = rank_position(q, n)
    if r == 0.0:
        return [(lo, 1.0)]
    return [(lo + 1, r), (lo, 1.0 - r)]


def _branch_probs(n_sample: int, n: int, k: int) -> np.ndarray:
    """P(original index i sits at bootstrap position k | S = n) for every i.

    Index ``i`` is the k-th bootstrap value exactly when fewer than ``k``
    draws fall below it, at most ``n - k`` fall above it and at least one
    lands on it. Conditional on ``S = n`` the three counts are trinomial with
    cell probabilities ``((i-1)/N, 1/N, (N-i)/N)``. The outer sum runs over
    the below-count; the inner sum over the above-count is a binomial CDF
    because, given the below-count ``a``, the above-count is
    ``Bin(n - a, (N-i)/(N-i+1))``.
    """
    N = n_sample
    i = np.arange(1, N + 1, dtype=np.float64)[:, None]
    a = np.arange(0, k, dtype=np.float64)[None, :]          # below-count <= k - 1
    p_below = (i - 1.0) / N
    log_pa = stats.binom.logpmf(a, n, p_below)
    p_above = (N - i) / (N - i + 1.0)
    # at least one draw on i: above-count <= n - a - 1
    cap = np.minimum(n - k, n - a - 1.0)
    inner = stats.binom.cdf(cap, n - a, p_above)
    terms = np.where(np.isfinite(log_pa), np.exp(log_pa), 0.0) * inner
    return terms.sum(axis=1)


def exact_index_pmf(n_sample: int, q: QLike, cfg: ExactPmfConfig | None = None,
                    *, normalize: bool = True) -> IndexPmf:
    """Exact distribution of the original index on support ``[1, N]``.

    The raw pmf falls short of one by the bootstrap sizes whose quantile
    position has no valid order statistic (``S = 0`` and, for extreme ``q``,
    rounding to 0 or ``S + 1``) plus the truncated Poisson tails. The raw
    total is kept in ``diagnostics["raw_total"]``.
    """
    cfg = cfg or ExactPmfConfig()
    N = _check_n(n_sample)
    q = check_q(q)
    if N > cfg.max_n_supported:
        raise ValueError(f"exact pmf limited to N <= {cfg.max_n_supported}, got {N}")
    lo, hi = poisson_window(N, cfg.poisson_tail_mass)
    pois = stats.poisson.pmf(np.arange(lo, hi + 1), N)
    probs = np.zeros(N)
    for n, p_n in zip(range(lo, hi + 1), pois):
        if n == 0:
            continue
        for k, w in _rounding_branches(q, n):
            if 1 <= k <= n:
                probs += (w * p_n) * _branch_probs(N, n, k)
    raw = IndexPmf(1, N, np.clip(probs, 0.0, 1.0), "exact", False,
                   {"raw_total": math.fsum(probs), "window": [lo, hi]})
    return raw.normalize() if normalize else raw


def binomial_index_pmf(n_sample: int, q: QLike) -> IndexPmf:
    """``Bin(N + 1, q)`` on support ``[0, N + 1]``."""
    N = _check_n(n_sample)
    q = check_q(q)
    k = np.arange(0, N + 2)
    probs = stats.binom.pmf(k, N + 1, q)
    return IndexPmf(0, N + 1, probs, "binomial", True)


def _literal_block(N: int, q: float, reps: int, gen: np.random.Generator):
    """Draw N Poisson(1) frequencies per replicate and locate the quantile by rank."""
    tally = np.zeros(N + 2, dtype=np.int64)
    empty = 0
    rows = max(1, min(reps, _LITERAL_CELLS // N))
    done = 0
    while done < reps:
        m = min(rows, reps - done)
        cum = np.cumsum(gen.poisson(1.0, size=(m, N)), axis=1, dtype=np.int64)
        sizes = cum[:, -1]
        keep = sizes > 0
        empty += int(m - keep.sum())
        cum, sizes = cum[keep], sizes[keep]
        k = g_indices(q, sizes, gen.random(sizes.size))
        psi = np.empty(sizes.size, dtype=np.int64)
        inside = (k >= 1) & (k <= sizes)
        # first original index whose cumulative frequency reaches k
        psi[inside] = (cum[inside] < k[inside, None]).sum(axis=1) + 1
        psi[k < 1] = 0
        psi[k > sizes] = N + 1
        tally += np.bincount(psi, minlength=N + 2)
        done += sizes.size
    return tally, empty


def _order_statistic_block(N: int, q: float, reps: int, gen: np.random.Generator):
    """Same distribution as the literal engine in O(1) per replicate.

    Given ``S = n`` the bootstrap is ``n`` iid uniform picks from ``1..N``;
    its k-th smallest pick is ``ceil(N * U_(k))`` with ``U_(k) ~ Beta(k, n-k+1)``.
    """
    tally = np.zeros(N + 2, dtype=np.int64)
    empty = 0
    done = 0
    while done < reps:
        m = reps - done
        sizes = gen.poisson(float(N), size=m)
        keep = sizes > 0
        empty += int(m - keep.sum())
        sizes = sizes[keep]
        k = g_indices(q, sizes, gen.random(sizes.size))
        psi = np.empty(sizes.size, dtype=np.int64)
        inside = (k >= 1) & (k <= sizes)
        u = gen.beta(k[inside], sizes[inside] - k[inside] + 1)
        psi[inside] = np.clip(np.ceil(N * u), 1, N).astype(np.int64)
        psi[k < 1] = 0
        psi[k > sizes] = N + 1
        tally += np.bincount(psi, minlength=N + 2)
        done += sizes.size
    return tally, empty


_ENGINES = {"literal": _literal_block, "order_statistic": _order_statistic_block}


def simulate_index_pmf(n_sample: int, q: QLike, replications: int, rng: RandomSource,
                       *, engine: str = "auto", threads: int = 1) -> IndexPmf:
    """Empirical index distribution from Poisson bootstrap replicates.

    The support is ``[0, N + 1]``: replicates whose rounded quantile position
    falls below the first or past the last bootstrap value are tallied at 0
    and ``N + 1`` (no order statistic exists there). Empty bootstrap samples
    are redrawn and counted in ``diagnostics["empty_redraws"]``.

    ``engine`` is ``"literal"`` (draw every frequency), ``"order_statistic"``
    (sample the bootstrap size, then a beta order statistic) or ``"auto"``,
    which picks the literal engine whenever ``N * replications`` is at most
    :data:`LITERAL_WORK_LIMIT`.
    """
    N = _check_n(n_sample)
    q = check_q(q)
    if int(replications) != replications or replications < 1:
        raise ValueError("replications must be a positive integer")
    if engine == "auto":
        engine = "literal" if N * replications <= LITERAL_WORK_LIMIT else "order_statistic"
    try:
        block_fn = _ENGINES[engine]
    except KeyError:
        raise ValueError(f"unknown engine {engine!r}") from None

    n_blocks = -(-replications // SIM_BLOCK)

    def run(j: int):
        reps = min(SIM_BLOCK, replications - j * SIM_BLOCK)
        return block_fn(N, q, reps, rng.child(j).generator)

    if threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(n_blocks)))
    else:
        parts = [run(j) for j in range(n_blocks)]
    tally = np.sum([t for t, _ in parts], axis=0)
    empty = sum(e for _, e in parts)
    return IndexPmf(0, N + 1, tally / replications, "empirical", True, {
        "empty_redraws": int(empty),
        "below_support": int(tally[0]),
        "above_support": int(tally[-1]),
        "replications": int(replications),
        "engine": engine,
    })


def max_abs_pmf_diff(a: IndexPmf, b: IndexPmf) -> float:
    """Sup-norm distance over the union of both supports."""
    lo = min(a.support_lo, b.support_lo)
    hi = max(a.support_hi, b.support_hi)
    pa = np.zeros(hi - lo + 1)
    pb = np.zeros(hi - lo + 1)
    pa[a.support_lo - lo:a.support_hi - lo + 1] = a.probs
    pb[b.support_lo - lo:b.support_hi - lo + 1] = b.probs
    return float(np.max(np.abs(pa - pb)))


def binomial_index_quantile(n_sample: int, q: QLike, p: float, tail: Tail = "lower") -> int:
    """Conservative discrete quantile of ``Bin(N + 1, q)``, clamped to ``[1, N]``.

    Lower tail: the largest ``i`` with ``P(X <= i) <= p``. Upper tail: the
    smallest ``i`` with ``P(X >= i) <= 1 - p``. Both round outward.
    """
    N = _check_n(n_sample)
    q = check_q(q)
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie strictly inside (0, 1), got {p!r}")
    dist = stats.binom(N + 1, q)
    if tail == "lower":
        i = int(dist.ppf(p))
        while i + 1 <= N + 1 and dist.cdf(i + 1) <= p:
            i += 1
        while i >= 0 and dist.cdf(i) > p:
            i -= 1
        if i < 0:
            i = 0
    elif tail == "upper":
        # sf(i - 1) = P(X >= i)
        i = int(dist.isf(1.0 - p)) + 1
        while i - 1 >= 0 and dist.sf(i - 2) <= 1.0 - p:
            i -= 1
        while i <= N + 1 and dist.sf(i - 1) > 1.0 - p:
            i += 1
        if i > N + 1:
            i = N + 1
    else:
        raise ValueError(f"tail must be 'lower' or 'upper', got {tail!r}")
    return min(max(i, 1), N)


@lru_cache(maxsize=64)
def binomial_inversion_table(n_trials: int, q: float) -> tuple[int, np.ndarray]:
    """``(offset, cdf)`` for inversion sampling of ``Bin(n_trials, q)``.

    The table covers the window outside of which each tail holds less than
    1e-18 of the mass, far below the resolution of a double-precision uniform.
    """
    dist = stats.binom(n_trials, q)
    lo = max(0, int(dist.ppf(1e-18)) - 1)
    hi = min(n_trials, int(dist.isf(1e-18)) + 1)
    k = np.arange(lo, hi + 1)
    cdf = dist.cdf(k)
    cdf[-1] = 1.0
    cdf.flags.writeable = False
    return lo, cdf


def sample_binomial_indexes(n_sample: int, q: float, size: int, rng: RandomSource) -> np.ndarray:
    """Draw ``size`` indexes from ``Bin(N + 1, q)`` by CDF inversion, clamped to ``[1, N]``.

    One uniform is consumed per draw.
    """
    offset, cdf = binomial_inversion_table(n_sample + 1, q)
    draws = offset + np.searchsorted(cdf, rng.uniforms(size), side="right")
    return np.clip(draws, 1, n_sample)
