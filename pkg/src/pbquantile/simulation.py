"""Monte Carlo studies: index-approximation quality, CI coverage, timing."""

from __future__ import annotations

import gc
import statistics
import time
import tracemalloc
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal, Optional, Sequence

import numpy as np
from scipy.special import ndtri

from .bootstrap_ci import (
    CiRequest,
    TwoSampleData,
    classic_ci_two_sample,
    conservative_empirical_quantiles,
    fast_ci_two_sample,
    fast_difference_draws,
    fast_index_pair,
)
from .index_distribution import binomial_index_pmf, max_abs_pmf_diff, simulate_index_pmf
from .quantile_core import check_q, sort_sample
from .rng import RandomSource

Mode = Literal["one_sample", "two_sample"]
NORMAL_METHOD = "numpy PCG64 Generator.standard_normal (ziggurat)"


def normal_quantile(q: float) -> float:
    """Standard-normal inverse CDF (cephes ``ndtri``)."""
    return float(ndtri(check_q(q)))


def proportion_ci(p_hat: float, n: int) -> tuple[float, float]:
    half = 1.96 * (p_hat * (1.0 - p_hat) / n) ** 0.5
    return max(0.0, p_hat - half), min(1.0, p_hat + half)


@dataclass(frozen=True)
class CoverageConfig:
    n_per_group: int = 10_000
    replications: int = 2000
    b_replications: int = 10_000
    q_list: tuple[float, ...] = (0.01, 0.1, 0.25, 0.5)
    alpha: float = 0.05
    dgp: str = "standard_normal"
    mode: Mode = "one_sample"
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "q_list", tuple(check_q(q) for q in self.q_list))
        if self.n_per_group < 1 or self.replications < 1 or self.b_replications < 1:
            raise ValueError("sizes and replication counts must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly inside (0, 1)")
        if self.mode not in ("one_sample", "two_sample"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.dgp != "standard_normal":
            raise ValueError(f"unsupported dgp {self.dgp!r}")

    def echo(self) -> dict:
        d = asdict(self)
        d["q_list"] = list(self.q_list)
        d["normal_generator"] = NORMAL_METHOD
        if self.mode == "one_sample":
            del d["b_replications"]
        return d


@dataclass
class CoverageReport:
    rows: list[dict]
    config: dict

    def to_dict(self) -> dict:
        return {"config": self.config, "rows": self.rows}

    def table(self) -> tuple[list[str], list[list]]:
        head = ["q", "coverage", "ci_lower", "ci_upper"]
        return head, [[r["q"], f"{r['empirical_coverage']:.3f}", f"{r['ci_lower']:.3f}",
                       f"{r['ci_upper']:.3f}"] for r in self.rows]


Sampler = Callable[[np.random.Generator, int], np.ndarray]


def _standard_normal(gen: np.random.Generator, n: int) -> np.ndarray:
    return gen.standard_normal(n)


def _coverage_hits(cfg: CoverageConfig, r: int, sampler: Sampler,
                   truths: Sequence[float]) -> list[bool]:
    src = RandomSource(cfg.seed, r)
    gen = src.generator
    hits = []
    if cfg.mode == "one_sample":
        sample = sort_sample(sampler(gen, cfg.n_per_group))
        for q, truth in zip(cfg.q_list, truths):
            i_lo, i_hi = fast_index_pair(sample.n, q, cfg.alpha)
            hits.append(sample.order_statistic(i_lo) <= truth <= sample.order_statistic(i_hi))
    else:
        data = TwoSampleData(sort_sample(sampler(gen, cfg.n_per_group)),
                             sort_sample(sampler(gen, cfg.n_per_group)))
        for j, (q, truth) in enumerate(zip(cfg.q_list, truths)):
            diffs = fast_difference_draws(data, q, cfg.b_replications, src.child(j))
            lo, hi = conservative_empirical_quantiles(diffs, cfg.alpha)
            hits.append(lo <= truth <= hi)
    return hits


def coverage_simulation(cfg: CoverageConfig, *, threads: int = 1,
                        sampler: Optional[Sampler] = None,
                        truth: Optional[Callable[[float], float]] = None) -> CoverageReport:
    """Empirical coverage of the fast intervals over ``cfg.replications`` fresh samples.

    Replication ``r`` draws everything from stream ``(seed, r)``, so the
    report is identical for any ``threads``. ``sampler`` and ``truth`` replace
    the data-generating process and the true parameter; they exist for tests.
    """
    sampler = sampler or _standard_normal
    if truth is None:
        truth = normal_quantile if cfg.mode == "one_sample" else (lambda q: 0.0)
    truths = [truth(q) for q in cfg.q_list]

    def run(r: int) -> list[bool]:
        return _coverage_hits(cfg, r, sampler, truths)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            hits = list(pool.map(run, range(cfg.replications), chunksize=16))
    else:
        hits = [run(r) for r in range(cfg.replications)]
    counts = np.sum(np.array(hits, dtype=np.int64).reshape(cfg.replications, -1), axis=0)
    rows = []
    for q, t, c in zip(cfg.q_list, truths, counts):
        p_hat = int(c) / cfg.replications
        lo, hi = proportion_ci(p_hat, cfg.replications)
        rows.append({"q": q, "truth": t, "covered": int(c), "empirical_coverage": p_hat,
                     "ci_lower": lo, "ci_upper": hi})
    return CoverageReport(rows, cfg.echo())


@dataclass
class ApproxTable:
    n_list: list[int]
    q_list: list[float]
    values: list[list[float]]  # values[i][j] for n_list[i], q_list[j]
    replications: int
    seed: int
    diagnostics: list[dict] = field(default_factory=list)

    def value(self, n: int, q: float) -> float:
        return self.values[self.n_list.index(n)][self.q_list.index(q)]

    def to_dict(self) -> dict:
        return {
            "replications": self.replications,
            "seed": self.seed,
            "rows": [{"n": n, "q": q, "max_abs_diff": self.values[i][j]}
                     for i, n in enumerate(self.n_list) for j, q in enumerate(self.q_list)],
            "diagnostics": self.diagnostics,
        }

    def table(self) -> tuple[list[str], list[list]]:
        head = ["N"] + [f"{q:.2f}" for q in self.q_list]
        return head, [[n] + [f"{v:.5f}" for v in row] for n, row in zip(self.n_list, self.values)]


def approximation_study(n_list: Sequence[int], q_list: Sequence[float], replications: int,
                        rng: RandomSource, *, engine: str = "auto",
                        threads: int = 1) -> ApproxTable:
    """Max absolute pmf difference between simulated indexes and ``Bin(N + 1, q)``.

    Cell ``(i, j)`` uses child stream ``i * len(q_list) + j`` of ``rng``.
    """
    q_list = [check_q(q) for q in q_list]
    values, diags = [], []
    for i, n in enumerate(n_list):
        row = []
        for j, q in enumerate(q_list):
            emp = simulate_index_pmf(n, q, replications, rng.child(i * len(q_list) + j),
                                     engine=engine, threads=threads)
            row.append(max_abs_pmf_diff(emp, binomial_index_pmf(n, q)))
            diags.append({"n": n, "q": q, **emp.diagnostics})
        values.append(row)
    return ApproxTable(list(n_list), q_list, values, replications, rng.seed, diags)


BENCH_REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["config", "rows", "speedup_median"],
    "properties": {
        "config": {
            "type": "object",
            "required": ["n_per_group", "b_replications", "evaluations", "seed"],
            "properties": {
                "n_per_group": {"type": "integer", "minimum": 1},
                "b_replications": {"type": "integer", "minimum": 1},
                "evaluations": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "q": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
        },
        "rows": {
            "type": "array",
            "minItems": 2,
            "items": {
                "type": "object",
                "required": ["method", "min_time", "median_time", "max_time"],
                "properties": {
                    "method": {"enum": ["classic", "fast"]},
                    "min_time": {"type": "number", "minimum": 0},
                    "median_time": {"type": "number", "minimum": 0},
                    "max_time": {"type": "number", "minimum": 0},
                    "peak_extra_memory": {"type": ["integer", "null"], "minimum": 0},
                },
            },
        },
        "speedup_median": {"type": "number", "exclusiveMinimum": 0},
    },
}


@dataclass
class BenchReport:
    rows: list[dict]
    config: dict

    @property
    def speedup_median(self) -> float:
        by = {r["method"]: r for r in self.rows}
        return by["classic"]["median_time"] / by["fast"]["median_time"]

    def row(self, method: str) -> dict:
        return next(r for r in self.rows if r["method"] == method)

    def to_dict(self) -> dict:
        return {"config": self.config, "rows": self.rows, "speedup_median": self.speedup_median}

    def table(self) -> tuple[list[str], list[list]]:
        head = ["method", "min_ms", "median_ms", "max_ms", "peak_extra_memory"]
        body = [[r["method"], f"{1e3 * r['min_time']:.3f}", f"{1e3 * r['median_time']:.3f}",
                 f"{1e3 * r['max_time']:.3f}", _fmt_bytes(r.get("peak_extra_memory"))]
                for r in self.rows]
        return head, body


def _fmt_bytes(n: Optional[int]) -> str:
    if n is None:
        return "-"
    for unit in ("B", "KiB", "MiB"):
        if n < 1024:
            return f"{n:.2f} {unit}" if unit != "B" else f"{n} B"
        n /= 1024
    return f"{n:.2f} GiB"


def _peak_memory(fn: Callable[[], object]) -> int:
    gc.collect()
    tracemalloc.start()
    try:
        tracemalloc.reset_peak()
        base = tracemalloc.get_traced_memory()[0]
        fn()
        return int(tracemalloc.get_traced_memory()[1] - base)
    finally:
        tracemalloc.stop()


def bench_compare(n_per_group: int, b_replications: int, evaluations: int, seed: int, *,
                  q: float = 0.5, alpha: float = 0.05, methods: Sequence[str] = ("classic", "fast"),
                  measure_memory: bool = True) -> BenchReport:
    """Wall-clock comparison of the classic and fast two-sample algorithms.

    Both start from the same unsorted float arrays, so each timing includes
    the sort. Peak extra memory is measured in one extra untimed run under
    ``tracemalloc``, which sees numpy buffers.
    """
    if evaluations < 1:
        raise ValueError("evaluations must be positive")
    gen = RandomSource(seed).generator
    raw_t = gen.standard_normal(n_per_group)
    raw_c = gen.standard_normal(n_per_group)
    runners = {
        "classic": (classic_ci_two_sample,
                    CiRequest(q, alpha, b_replications, "classic", seed)),
        "fast": (fast_ci_two_sample, CiRequest(q, alpha, b_replications, "fast", seed)),
    }
    rows = []
    for method in methods:
        fn, req = runners[method]

        def call(fn=fn, req=req):
            return fn(TwoSampleData(sort_sample(raw_t), sort_sample(raw_c)), req)

        call()  # warm caches (binomial tables, imports)
        times = []
        for _ in range(evaluations):
            t0 = time.perf_counter()
            call()
            times.append(time.perf_counter() - t0)
        rows.append({
            "method": method,
            "min_time": min(times),
            "median_time": statistics.median(times),
            "max_time": max(times),
            "peak_extra_memory": _peak_memory(call) if measure_memory else None,
        })
    config = {"n_per_group": n_per_group, "b_replications": b_replications,
              "evaluations": evaluations, "seed": seed, "q": q, "alpha": alpha,
              "timer": "time.perf_counter"}
    return BenchReport(rows, config)
