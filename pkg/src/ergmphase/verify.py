"""Oracle-equivalence suites: closed forms against exhaustive enumeration."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .graph import ModelParams
from .multiplicity import (
    CacheError,
    MultiplicityTable,
    brute_force_tables,
    has_min_degree_two,
    is_matching,
    matching_count,
    min_degree_two_row,
    sparse_interface_exact,
    sparse_interface_predicate,
)
from .partition import (
    EXACT_MAX_N,
    conditional_entropy,
    exact_family_strata,
    exact_log_partition,
    strata_arrays,
)

MULTIPLICITY_MAX_N = 7
ENTROPY_MAX_N = 5


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    max_deviation: float
    checks: int
    seconds: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return (
            f"{status}  {self.name:<24} checks={self.checks:<6} max_dev={self.max_deviation:.3g}"
            f"  {self.seconds:.1f}s{extra}"
        )


def theta_grid(n_e: int = 5, n_c: int = 5) -> list[ModelParams]:
    return [
        ModelParams(float(a), float(b))
        for a in np.linspace(-4.0, 0.0, n_e)
        for b in np.linspace(-6.0, 0.0, n_c)
    ]


def multiplicity_suite(max_n: int = MULTIPLICITY_MAX_N) -> SuiteResult:
    """Exact integer equality of all three counts with enumeration, ``n <= max_n``."""
    if not 0 <= max_n <= MULTIPLICITY_MAX_N:
        raise ValueError(f"multiplicity oracle is limited to n <= {MULTIPLICITY_MAX_N}, got {max_n}")
    t0 = time.perf_counter()
    worst = 0
    checks = 0
    bad = []
    for n in range(1, max_n + 1):
        preds = {"matching": is_matching, "mindeg2": has_min_degree_two}
        for n_s in range(n + 1):
            preds[f"si{n_s}"] = sparse_interface_predicate(n_s, n)
        tables = brute_force_tables(n, preds)
        for E, c in enumerate(tables["matching"]):
            worst = max(worst, abs(matching_count(E, n) - c))
            checks += 1
        for E, c in enumerate(tables["mindeg2"]):
            worst = max(worst, abs(min_degree_two_row(n)[E] - c))
            checks += 1
        for n_s in range(n + 1):
            for E, c in enumerate(tables[f"si{n_s}"]):
                worst = max(worst, abs(sparse_interface_exact(E, n_s, n - n_s) - c))
                checks += 1
        if worst:
            bad.append(n)
    detail = f"mismatch at n={bad}" if bad else ""
    return SuiteResult("multiplicity", worst == 0, float(worst), checks, time.perf_counter() - t0, detail)


def partition_suite(max_n: int = EXACT_MAX_N, grid=None, tol: float = 1e-9) -> SuiteResult:
    """Undercount (stratum-wise and total) and exactness of the ``t_c = 0`` stratum.

    ``max_deviation`` is the largest excess of the approximation over the
    exact value (a positive number means an overcount) or the largest
    ``t_c = 0`` mismatch, whichever is bigger.
    """
    if not 1 <= max_n <= EXACT_MAX_N:
        raise ValueError(f"exact partition suite is limited to N <= {EXACT_MAX_N}, got N={max_n}")
    grid = theta_grid() if grid is None else grid
    t0 = time.perf_counter()
    worst = -math.inf
    checks = 0
    for N in range(1, max_n + 1):
        tables = MultiplicityTable.build(N)
        for theta in grid:
            approx, _ = strata_arrays(theta, N, tables)
            exact = exact_log_partition(theta, N)
            by_ns = exact.log_z_by_ns()
            finite = np.isfinite(approx)
            over = approx[finite] - by_ns[finite]
            total_over = np.logaddexp.reduce(approx) - exact.log_z
            eq_dev = abs(approx[N] - by_ns[N])
            worst = max(worst, float(over.max(initial=-math.inf)), float(total_over), float(eq_dev) - tol)
            checks += int(finite.sum()) + 2
    passed = worst <= 1e-12
    return SuiteResult("partition-undercount", passed, max(worst, 0.0), checks, time.perf_counter() - t0)


def entropy_suite(max_n: int = ENTROPY_MAX_N, grid=None, tol: float = 1e-9) -> SuiteResult:
    """``conditional_entropy`` against ``-sum p log p`` over the constructed family."""
    if not 1 <= max_n <= EXACT_MAX_N:
        raise ValueError(f"entropy suite is limited to N <= {EXACT_MAX_N}, got N={max_n}")
    grid = theta_grid() if grid is None else grid
    t0 = time.perf_counter()
    worst = 0.0
    checks = 0
    for N in range(1, max_n + 1):
        tables = MultiplicityTable.build(N)
        for theta in grid:
            fam = exact_family_strata(theta, N)
            approx, _ = strata_arrays(theta, N, tables)
            for n_s in range(N + 1):
                if fam.count[n_s] == 0:
                    worst = max(worst, 0.0 if np.isneginf(approx[n_s]) else math.inf)
                    continue
                S = conditional_entropy(theta, N, n_s / N, tables)
                worst = max(worst, abs(S - fam.entropy[n_s]), abs(approx[n_s] - fam.log_z[n_s]))
                checks += 1
    return SuiteResult("entropy-identity", worst <= tol, worst, checks, time.perf_counter() - t0)


def cache_suite(path) -> SuiteResult:
    """Load a cached multiplicity table with digest and spot-check verification."""
    t0 = time.perf_counter()
    try:
        MultiplicityTable.load(path, verify=True)
    except (CacheError, OSError, ValueError, KeyError) as exc:
        return SuiteResult("cache", False, math.inf, 1, time.perf_counter() - t0, f"{path}: {exc}")
    return SuiteResult("cache", True, 0.0, 1, time.perf_counter() - t0, str(path))


def run_all(max_n: int = EXACT_MAX_N, cache_files=()) -> list[SuiteResult]:
    """Every suite; ``max_n`` bounds the exact partition suite (at most 6)."""
    if not 1 <= max_n <= EXACT_MAX_N:
        raise ValueError(f"exact partition suite is limited to N <= {EXACT_MAX_N}, got N={max_n}")
    results = [
        multiplicity_suite(),
        partition_suite(max_n),
        entropy_suite(min(max_n, ENTROPY_MAX_N)),
    ]
    results.extend(cache_suite(p) for p in cache_files)
    return results
