"""Stratified approximation of the partition function.

For ``n_s`` sparse vertices out of ``N`` the stratum mass is

    C(N, n_s) exp(theta_c (N - n_s)) * sum_{E_s} C_si(E_s, n_s) exp(theta_e E_s)
                                      * sum_{E_d} C_d(E_d, N - n_s) exp(theta_e E_d)

which is the triple loop over ``(n_s, E_s, E_d)`` with the two inner sums
factored apart (the summand is a product of an ``E_s`` term and an ``E_d``
term). Conditional mean edge counts are accumulated alongside each sum, so
energies and entropies need no numerical differentiation.

The construction counts only graphs whose concurrent vertices reach degree
two among themselves. Strata with one or two concurrent vertices therefore
get no mass, and every stratum is a lower bound on the exact one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .graph import ModelParams, PhysicalParams, as_theta
from .multiplicity import MultiplicityTable, enumerate_graphs, log_sum

EXACT_MAX_N = 6


class StratumError(ValueError):
    pass


@dataclass(frozen=True)
class StratumResult:
    """Mass and conditional moments of one order-parameter stratum.

    ``log_z`` is ``-inf`` for strata with no constructed graphs.
    """

    N: int
    n_s: int
    log_z: float
    mean_edges: float
    theta: ModelParams

    @property
    def n_d(self) -> int:
        return self.N - self.n_s

    @property
    def m(self) -> float:
        return self.n_s / self.N

    @property
    def is_zero(self) -> bool:
        return self.log_z == -math.inf

    @property
    def mean_energy(self) -> float:
        """``E[t_e + phi_c t_c | stratum]`` in edge units."""
        if self.is_zero or self.theta.theta_e == 0:
            return math.nan
        phi_c = self.theta.theta_c / self.theta.theta_e
        return self.mean_edges + phi_c * self.n_d

    @property
    def free_energy(self) -> float:
        if self.is_zero:
            return math.inf
        if self.theta.theta_e == 0:
            return math.nan
        return self.log_z / self.theta.theta_e

    @property
    def entropy(self) -> float:
        """Shannon entropy (nats) of the conditional law on the stratum; ``(U - F) / T``."""
        if self.is_zero:
            return math.nan
        return self.log_z - self.theta.theta_e * self.mean_edges - self.theta.theta_c * self.n_d


@dataclass(frozen=True)
class PartitionResult:
    N: int
    theta: ModelParams
    strata: list[StratumResult] = field(repr=False)
    log_z: float

    def stratum(self, n_s: int) -> StratumResult:
        return self.strata[n_s]

    @property
    def log_z_by_stratum(self) -> np.ndarray:
        return np.array([s.log_z for s in self.strata])

    def rows(self):
        """``(n_s, m, log_z, F, U, S)`` per stratum; zero strata give ``F = inf``."""
        for s in self.strata:
            yield s.n_s, s.m, s.log_z, s.free_energy, s.mean_energy, s.entropy


def _log_comb(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def _weighted_lse(logw: np.ndarray, values: np.ndarray):
    """Row-wise ``log sum exp(logw)`` and the ``exp(logw)``-weighted mean of ``values``."""
    mx = np.max(logw, axis=-1, keepdims=True)
    safe = np.where(np.isfinite(mx), mx, 0.0)
    w = np.exp(logw - safe)
    total = w.sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lse = np.log(total) + safe[..., 0]
        mean = (w * values).sum(axis=-1) / total
    lse = np.where(total > 0, lse, -np.inf)
    mean = np.where(total > 0, mean, np.nan)
    return lse, mean


def _check_tables(N: int, tables: MultiplicityTable):
    if tables.N != N:
        raise StratumError(f"tables were built for N={tables.N}, not N={N}")


def strata_arrays(params, N: int, tables: MultiplicityTable):
    """Vectorized ``(log_z, mean_edges)`` over ``n_s = 0..N``."""
    _check_tables(N, tables)
    theta = as_theta(params)
    n_s = np.arange(N + 1)
    n_d = N - n_s
    e_sparse = np.arange(N + 1)
    # sparse edges loop over 0..n_s
    logw_s = tables.log_csi + theta.theta_e * e_sparse
    logw_s = np.where(e_sparse[None, :] <= n_s[:, None], logw_s, -np.inf)
    lse_s, mean_s = _weighted_lse(logw_s, e_sparse[None, :].astype(float))
    # dense edges loop over n_d..C(n_d, 2); log_cd rows are indexed by n_d
    e_dense = np.arange(tables.log_cd.shape[1])
    rows_nd = np.arange(N + 1)
    logw_d = tables.log_cd + theta.theta_e * e_dense
    logw_d = np.where(e_dense[None, :] >= rows_nd[:, None], logw_d, -np.inf)
    lse_d, mean_d = _weighted_lse(logw_d, e_dense[None, :].astype(float))
    lse_d, mean_d = lse_d[n_d], mean_d[n_d]
    log_z = _log_comb(N, n_s) + theta.theta_c * n_d + lse_s + lse_d
    log_z = np.where(np.isfinite(lse_s) & np.isfinite(lse_d), log_z, -np.inf)
    mean_edges = np.where(np.isfinite(log_z), mean_s + mean_d, np.nan)
    return log_z, mean_edges


def stratum_log_partition(params, N: int, n_s: int, tables: MultiplicityTable) -> StratumResult:
    if not 0 <= n_s <= N:
        raise StratumError(f"n_s={n_s} outside 0..{N}")
    log_z, mean_edges = strata_arrays(params, N, tables)
    return StratumResult(N, n_s, float(log_z[n_s]), float(mean_edges[n_s]), as_theta(params))


def log_partition(params, N: int, tables: MultiplicityTable) -> PartitionResult:
    theta = as_theta(params)
    log_z, mean_edges = strata_arrays(theta, N, tables)
    strata = [StratumResult(N, k, float(log_z[k]), float(mean_edges[k]), theta) for k in range(N + 1)]
    return PartitionResult(N, theta, strata, log_sum(log_z))


def _stratum_index(N: int, M: float) -> int:
    n_s = round(M * N)
    if abs(n_s - M * N) > 1e-9 or not 0 <= n_s <= N:
        raise StratumError(f"M={M} is not on the grid k/{N}")
    return n_s


def conditional_free_energy(pp: PhysicalParams | ModelParams, N: int, M: float, tables) -> float:
    """``-T log Z(T, phi | M)`` in edge units; ``+inf`` for empty strata."""
    n_s = _stratum_index(N, M)
    return stratum_log_partition(pp, N, n_s, tables).free_energy


def conditional_entropy(pp: PhysicalParams | ModelParams, N: int, M: float, tables) -> float:
    n_s = _stratum_index(N, M)
    s = stratum_log_partition(pp, N, n_s, tables)
    if s.is_zero:
        raise StratumError(f"stratum M={M} has no mass; entropy undefined")
    return s.entropy


# -- exhaustive oracles ------------------------------------------------------------


@dataclass(frozen=True)
class ExactPartition:
    """Exhaustive sums over all graphs, stratified by ``t_c``."""

    N: int
    log_z: float
    log_z_by_tc: np.ndarray

    def log_z_by_ns(self) -> np.ndarray:
        """Same strata indexed by ``n_s = N - t_c``."""
        return self.log_z_by_tc[::-1].copy()


def _check_exact_n(N: int):
    if not 1 <= N <= EXACT_MAX_N:
        raise ValueError(f"exhaustive enumeration is limited to N <= {EXACT_MAX_N}, got N={N}")


def exact_log_partition(params, N: int) -> ExactPartition:
    _check_exact_n(N)
    theta = as_theta(params)
    by_tc = [[] for _ in range(N + 1)]
    for bits, degrees in enumerate_graphs(N):
        t_e = bits.sum(axis=1)
        t_c = (degrees >= 2).sum(axis=1)
        logw = theta.theta_e * t_e + theta.theta_c * t_c
        for k in range(N + 1):
            sel = logw[t_c == k]
            if sel.size:
                by_tc[k].append(log_sum(sel))
    strata = np.array([log_sum(v) for v in by_tc])
    return ExactPartition(N, log_sum(strata), strata)


def _adjacency_blocks(N: int):
    iu = np.triu_indices(N, 1)
    for bits, degrees in enumerate_graphs(N):
        adj = np.zeros((len(bits), N, N), dtype=np.int16)
        adj[:, iu[0], iu[1]] = bits
        adj += adj.transpose(0, 2, 1)
        yield bits, degrees, adj


def constructed_family_mask(degrees: np.ndarray, adj: np.ndarray) -> np.ndarray:
    """Graphs whose concurrent vertices have degree >= 2 among themselves."""
    concurrent = degrees >= 2
    internal = np.einsum("gij,gj->gi", adj, concurrent.astype(np.int16))
    return np.all(~concurrent | (internal >= 2), axis=1)


@dataclass(frozen=True)
class FamilyStrata:
    """Direct sums over the constructed family, indexed by ``n_s``."""

    N: int
    log_z: np.ndarray
    mean_edges: np.ndarray
    entropy: np.ndarray
    count: np.ndarray


def exact_family_strata(params, N: int) -> FamilyStrata:
    """Enumerate the graphs the stratified construction counts, stratum by stratum.

    Entropy is computed directly as ``-sum p log p`` of the conditional law.
    """
    _check_exact_n(N)
    theta = as_theta(params)
    logw_parts = [[] for _ in range(N + 1)]
    edges_parts = [[] for _ in range(N + 1)]
    for bits, degrees, adj in _adjacency_blocks(N):
        keep = constructed_family_mask(degrees, adj)
        t_e = bits.sum(axis=1)[keep]
        t_c = (degrees >= 2).sum(axis=1)[keep]
        logw = theta.theta_e * t_e + theta.theta_c * t_c
        for n_s in range(N + 1):
            sel = t_c == N - n_s
            logw_parts[n_s].append(logw[sel])
            edges_parts[n_s].append(t_e[sel])
    log_z = np.full(N + 1, -np.inf)
    mean_edges = np.full(N + 1, np.nan)
    entropy = np.full(N + 1, np.nan)
    count = np.zeros(N + 1, dtype=np.int64)
    for n_s in range(N + 1):
        lw = np.concatenate(logw_parts[n_s])
        te = np.concatenate(edges_parts[n_s])
        count[n_s] = lw.size
        if lw.size == 0:
            continue
        lz = log_sum(lw)
        p = np.exp(lw - lz)
        log_z[n_s] = lz
        mean_edges[n_s] = float(np.sum(p * te))
        entropy[n_s] = float(-np.sum(p * (lw - lz)))
    return FamilyStrata(N, log_z, mean_edges, entropy, count)
