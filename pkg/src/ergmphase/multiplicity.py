"""Counting the graph families that make up each order-parameter stratum.

Three families are needed:

* matchings: ``E`` disjoint edges on ``n_s`` labeled vertices;
* sparse/interface placements: ``E`` edges that each touch at least one of
  ``n_s`` sparse vertices, every sparse vertex receiving at most one edge,
  while the other endpoint may be any of ``n_d`` dense vertices;
* labeled graphs on ``n_d`` vertices with ``E`` edges and minimum degree 2.

Counts are exact Python integers; the partition sums consume them through
:class:`LogNumber` and the log tables of :class:`MultiplicityTable`. The
minimum-degree-2 counts come from inclusion-exclusion over the set of
vertices allowed degree at most one. The alternating sum cancels
catastrophically in floating point, so it is carried out on integers, with
whole polynomials packed into single ``gmpy2.mpz`` values (Kronecker
substitution) so that each row costs a handful of big multiplications.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import gmpy2
import numpy as np
from scipy.special import logsumexp

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
BRUTE_FORCE_MAX_DYADS = 28


class CacheError(RuntimeError):
    pass


@dataclass(frozen=True, order=True)
class LogNumber:
    """Nonnegative real stored as its natural log; ``-inf`` is exact zero."""

    log: float = -math.inf

    @classmethod
    def zero(cls) -> LogNumber:
        return cls(-math.inf)

    @classmethod
    def one(cls) -> LogNumber:
        return cls(0.0)

    @classmethod
    def from_int(cls, k: int) -> LogNumber:
        if k < 0:
            raise ValueError("LogNumber holds nonnegative values only")
        return cls(math.log(k)) if k else cls.zero()

    @classmethod
    def from_float(cls, x: float) -> LogNumber:
        if x < 0:
            raise ValueError("LogNumber holds nonnegative values only")
        return cls(math.log(x)) if x else cls.zero()

    @property
    def is_zero(self) -> bool:
        return self.log == -math.inf

    def __add__(self, other: LogNumber) -> LogNumber:
        return LogNumber(float(np.logaddexp(self.log, other.log)))

    def __mul__(self, other: LogNumber) -> LogNumber:
        if self.is_zero or other.is_zero:
            return LogNumber.zero()
        return LogNumber(self.log + other.log)

    def __float__(self) -> float:
        return math.exp(self.log)


def log_sum(logs) -> float:
    """Log of the sum of ``exp(logs)``; empty or all ``-inf`` gives ``-inf``."""
    a = np.asarray(logs, dtype=float)
    if a.size == 0 or not np.any(np.isfinite(a)):
        return -math.inf
    return float(logsumexp(a))


# -- exact integer counts ------------------------------------------------------


def matching_count(E: int, n: int) -> int:
    """Number of matchings with ``E`` edges on ``n`` labeled vertices."""
    if E < 0 or n < 0 or 2 * E > n:
        return 0
    return math.factorial(n) // (math.factorial(E) * 2**E * math.factorial(n - 2 * E))


def sparse_interface_exact(E: int, n_s: int, n_d: int) -> int:
    """Placements of ``E`` edges in the sparse set or the sparse/dense cut.

    ``e`` cut edges pick ``e`` distinct sparse endpoints and a dense partner
    each; the remaining ``E - e`` edges form a matching on the ``n_s - e``
    sparse vertices left unused.
    """
    if E < 0 or n_s < 0 or n_d < 0:
        return 0
    total = 0
    for e in range(min(E, n_s) + 1):
        total += math.comb(n_s, e) * n_d**e * matching_count(E - e, n_s - e)
    return total


def sparse_interface_max_edges(n_s: int, n_d: int) -> int:
    """Largest ``E`` with a nonzero sparse/interface count.

    Dense vertices have no degree cap, so with any dense vertex present
    every sparse vertex can take a cut edge.
    """
    if n_s < 0 or n_d < 0:
        return -1
    return n_s if n_d > 0 else n_s // 2


@lru_cache(maxsize=None)
def min_degree_two_row(n: int) -> tuple[int, ...]:
    """Counts of min-degree-2 labeled graphs on ``n`` vertices, indexed by edge count.

    With ``S`` the set of vertices allowed degree <= 1,
    ``C(E, n) = sum_s (-1)^s C(n, s) sum_j W(j, s) C(C(n-s, 2), E-j)``,
    ``W(j, s) = sparse_interface_exact(j, s, n - s)``. As generating
    functions in ``x`` this is ``sum_s (-1)^s C(n,s) W_s(x) (1+x)^C(n-s,2)``,
    evaluated by a Horner-style recursion on packed integers.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    m_max = n * (n - 1) // 2
    if n == 0:
        return (1,)
    # final coefficients are bounded by C(m_max, E) < 2**m_max
    bits = 8 * ((m_max + 8 + 7) // 8)
    one_plus_x = gmpy2.mpz(1) + (gmpy2.mpz(1) << bits)
    acc = gmpy2.mpz(0)
    for s in range(n + 1):
        d = n - s
        w = gmpy2.mpz(0)
        for j in range(s, -1, -1):
            w = (w << bits) + sparse_interface_exact(j, s, d)
        term = w * math.comb(n, s)
        if s % 2:
            term = -term
        # (1+x)^C(d,2) = (1+x)^C(d+1,2) / (1+x)^d, so earlier terms pick up (1+x)^d
        acc = term + acc * one_plus_x**d if s else term
    if acc < 0:
        raise ArithmeticError("inclusion-exclusion produced a negative count")
    nbytes = bits // 8
    raw = int(acc).to_bytes((m_max + 1) * nbytes + 1, "little")
    row = tuple(int.from_bytes(raw[k * nbytes : (k + 1) * nbytes], "little") for k in range(m_max + 1))
    if any(raw[(m_max + 1) * nbytes :]):
        raise ArithmeticError("packed polynomial overflowed its degree bound")
    return row


def min_degree_two_exact(E: int, n_d: int) -> int:
    if n_d < 0 or E < 0 or E > n_d * (n_d - 1) // 2:
        return 0
    return min_degree_two_row(n_d)[E]


# -- log-domain accessors ---------------------------------------------------------


def sparse_matchings(E: int, n_s: int) -> LogNumber:
    return LogNumber.from_int(matching_count(E, n_s))


def sparse_interface_count(E: int, n_s: int, n_d: int) -> LogNumber:
    return LogNumber.from_int(sparse_interface_exact(E, n_s, n_d))


def min_degree_two_count(E: int, n_d: int) -> LogNumber:
    return LogNumber.from_int(min_degree_two_exact(E, n_d))


def _log_int(k: int) -> float:
    return math.log(k) if k else -math.inf


def min_degree_two_log_row(n: int) -> np.ndarray:
    return np.array([_log_int(c) for c in min_degree_two_row(n)], dtype=float)


def sparse_interface_log_row(n_s: int, n_d: int, length: int) -> np.ndarray:
    return np.array([_log_int(sparse_interface_exact(E, n_s, n_d)) for E in range(length)], dtype=float)


# -- brute force oracle ------------------------------------------------------------


def _dyads(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def enumerate_graphs(n: int, chunk: int = 1 << 20):
    """Yield ``(edge_bits, degrees)`` blocks covering every labeled graph on ``n`` vertices.

    ``edge_bits`` is a boolean ``(G, D)`` array over dyads in lexicographic
    order, ``degrees`` an ``(G, n)`` integer array. Graph ``k`` of the full
    enumeration has dyad ``d`` present iff bit ``d`` of ``k`` is set.
    """
    dyads = _dyads(n)
    D = len(dyads)
    if D > BRUTE_FORCE_MAX_DYADS:
        raise ValueError(f"n={n} has {D} dyads; enumeration is limited to {BRUTE_FORCE_MAX_DYADS}")
    incidence = np.zeros((D, n), dtype=np.int16)
    for d, (i, j) in enumerate(dyads):
        incidence[d, i] = incidence[d, j] = 1
    total = 1 << D
    shifts = np.arange(D, dtype=np.int64)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        bits = ((codes[:, None] >> shifts) & 1).astype(bool)
        yield bits, bits.astype(np.int16) @ incidence


def brute_force_table(n: int, predicate=None) -> list[int]:
    """Exact counts, indexed by edge count, of graphs on ``n`` vertices satisfying ``predicate``.

    ``predicate(edge_bits, degrees)`` is vectorized over graphs and returns a
    boolean mask; ``None`` accepts everything.
    """
    D = n * (n - 1) // 2
    counts = np.zeros(D + 1, dtype=np.int64)
    for bits, degrees in enumerate_graphs(n):
        keep = np.ones(len(bits), dtype=bool) if predicate is None else predicate(bits, degrees)
        counts += np.bincount(bits[keep].sum(axis=1), minlength=D + 1)
    return [int(c) for c in counts]


def brute_force_tables(n: int, predicates: dict) -> dict[str, list[int]]:
    """Several :func:`brute_force_table` results from a single enumeration pass."""
    D = n * (n - 1) // 2
    counts = {name: np.zeros(D + 1, dtype=np.int64) for name in predicates}
    for bits, degrees in enumerate_graphs(n):
        n_edges = bits.sum(axis=1)
        for name, pred in predicates.items():
            keep = pred(bits, degrees)
            counts[name] += np.bincount(n_edges[keep], minlength=D + 1)
    return {name: [int(c) for c in v] for name, v in counts.items()}


def brute_force_count(n: int, E: int, predicate=None) -> int:
    table = brute_force_table(n, predicate)
    return table[E] if 0 <= E < len(table) else 0


def is_matching(bits, degrees):
    return np.all(degrees <= 1, axis=1)


def has_min_degree_two(bits, degrees):
    return np.all(degrees >= 2, axis=1)


def sparse_interface_predicate(n_s: int, n: int):
    """Predicate for graphs on ``n`` vertices whose first ``n_s`` are sparse.

    No edge joins two dense vertices and every sparse vertex has degree <= 1.
    """
    dense_dense = np.array([i >= n_s and j >= n_s for i, j in _dyads(n)], dtype=bool)

    def predicate(bits, degrees):
        ok = np.all(degrees[:, :n_s] <= 1, axis=1)
        if dense_dense.any():
            ok &= ~np.any(bits[:, dense_dense], axis=1)
        return ok

    return predicate


# -- tables ------------------------------------------------------------------------


class MultiplicityTable:
    """Log counts for every stratum of an order-``N`` graph.

    ``log_csi[n_s, E]`` holds the sparse/interface count with ``n_d = N - n_s``
    (``E <= N``); ``log_cd[n_d, E]`` the min-degree-2 count (``E <= C(N, 2)``).
    Infeasible entries are ``-inf``.
    """

    def __init__(self, N: int, log_csi: np.ndarray, log_cd: np.ndarray):
        M = N * (N - 1) // 2
        if log_csi.shape != (N + 1, N + 1) or log_cd.shape != (N + 1, M + 1):
            raise ValueError(f"table shapes {log_csi.shape}, {log_cd.shape} do not fit N={N}")
        self.N = N
        self.log_csi = log_csi
        self.log_cd = log_cd
        self.log_csi.setflags(write=False)
        self.log_cd.setflags(write=False)

    @classmethod
    def build(cls, N: int, cd_rows: dict[int, np.ndarray] | None = None) -> MultiplicityTable:
        """Compute all entries; ``cd_rows`` may supply already known dense-phase rows."""
        M = N * (N - 1) // 2
        log_csi = np.full((N + 1, N + 1), -np.inf)
        for n_s in range(N + 1):
            log_csi[n_s] = sparse_interface_log_row(n_s, N - n_s, N + 1)
        log_cd = np.full((N + 1, M + 1), -np.inf)
        for n_d in range(N + 1):
            row = cd_rows.get(n_d) if cd_rows else None
            if row is None:
                row = min_degree_two_log_row(n_d)
            log_cd[n_d, : len(row)] = row
        return cls(N, log_csi, log_cd)

    def csi(self, E: int, n_s: int) -> LogNumber:
        if not (0 <= n_s <= self.N) or not (0 <= E <= self.N):
            return LogNumber.zero()
        return LogNumber(float(self.log_csi[n_s, E]))

    def cd(self, E: int, n_d: int) -> LogNumber:
        if not (0 <= n_d <= self.N) or not (0 <= E < self.log_cd.shape[1]):
            return LogNumber.zero()
        return LogNumber(float(self.log_cd[n_d, E]))

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(str(self.N).encode())
        h.update(np.ascontiguousarray(self.log_csi).tobytes())
        h.update(np.ascontiguousarray(self.log_cd).tobytes())
        return h.hexdigest()

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp.npz")
        np.savez(
            tmp,
            format_version=FORMAT_VERSION,
            N=self.N,
            log_csi=self.log_csi,
            log_cd=self.log_cd,
            digest=self.digest(),
        )
        os.replace(tmp, path)

    @classmethod
    def load(cls, path, verify: bool = True, n_spot: int = 40, seed: int = 0) -> MultiplicityTable:
        """Load a cached table; with ``verify``, check the digest and recompute a sample of entries."""
        try:
            with np.load(path) as f:
                version = int(f["format_version"])
                N = int(f["N"])
                table = cls(N, f["log_csi"].copy(), f["log_cd"].copy())
                digest = str(f["digest"])
        except (OSError, KeyError, ValueError) as exc:
            raise CacheError(f"unreadable multiplicity cache {path}: {exc}") from exc
        if version != FORMAT_VERSION:
            raise CacheError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
        if verify:
            if table.digest() != digest:
                raise CacheError(f"{path}: content digest mismatch")
            table.spot_check(n_spot, seed)
        return table

    def spot_check(self, n_spot: int = 40, seed: int = 0, tol: float = 1e-12):
        """Recompute sampled entries exactly; raise :class:`CacheError` on mismatch."""
        rng = np.random.default_rng(seed)
        N = self.N
        for _ in range(n_spot):
            n_s = int(rng.integers(0, N + 1))
            E = int(rng.integers(0, N + 1))
            want = _log_int(sparse_interface_exact(E, n_s, N - n_s))
            if not _close(self.log_csi[n_s, E], want, tol):
                raise CacheError(f"sparse/interface entry (n_s={n_s}, E={E}) disagrees with recomputation")
        small = sorted({int(x) for x in rng.integers(0, min(N, 30) + 1, size=3)} | {min(N, 4)})
        for n_d in small:
            row = min_degree_two_log_row(n_d)
            if not all(_close(a, b, tol) for a, b in zip(self.log_cd[n_d, : len(row)], row)):
                raise CacheError(f"dense-phase row n_d={n_d} disagrees with recomputation")
            if np.any(np.isfinite(self.log_cd[n_d, len(row) :])):
                raise CacheError(f"dense-phase row n_d={n_d} has entries beyond C(n_d, 2)")


def _close(a: float, b: float, tol: float) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= tol * max(1.0, abs(b))


def default_cache_dir() -> Path:
    env = os.environ.get("ERGMPHASE_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "ergmphase"


def cache_path(N: int, cache_dir=None) -> Path:
    d = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    return d / f"multiplicity_N{N}_v{FORMAT_VERSION}.npz"


_memory: dict[int, MultiplicityTable] = {}


def get_tables(N: int, cache_dir=None, use_cache: bool = True) -> MultiplicityTable:
    """Tables for order ``N``, memoized in-process and on disk.

    Dense-phase rows do not depend on ``N``, so a cached table for a larger
    order seeds the build of a smaller one.
    """
    if N < 1:
        raise ValueError("N must be positive")
    if N in _memory:
        return _memory[N]
    path = cache_path(N, cache_dir)
    if use_cache and path.exists():
        try:
            table = MultiplicityTable.load(path)
            _memory[N] = table
            return table
        except CacheError as exc:
            log.warning("discarding cache: %s", exc)
    seed_rows = None
    if use_cache:
        seed_rows = _rows_from_larger_cache(N, path.parent)
    log.info("building multiplicity tables for N=%d", N)
    table = MultiplicityTable.build(N, seed_rows)
    if use_cache:
        try:
            table.save(path)
        except OSError as exc:
            log.warning("could not write cache %s: %s", path, exc)
    _memory[N] = table
    return table


def _rows_from_larger_cache(N: int, cache_dir: Path):
    if not cache_dir.is_dir():
        return None
    for p in sorted(cache_dir.glob(f"multiplicity_N*_v{FORMAT_VERSION}.npz")):
        try:
            other_N = int(p.name.split("_")[1][1:])
        except ValueError:
            continue
        if other_N > N:
            try:
                other = MultiplicityTable.load(p)
            except CacheError:
                continue
            return {n: other.log_cd[n, : n * (n - 1) // 2 + 1] for n in range(N + 1)}
    return None
