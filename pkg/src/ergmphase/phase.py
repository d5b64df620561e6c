"""Free-energy landscapes over the order parameter and the phase structure they imply."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import ModelParams, PhysicalParams, as_theta, theta_to_physical
from .multiplicity import MultiplicityTable
from .partition import strata_arrays

DEFAULT_BRACKET = (0.05, 5.0)


class NoCoexistenceError(RuntimeError):
    """No temperature in the search bracket supports two free-energy minima."""


@dataclass(frozen=True)
class FreeEnergyCurve:
    temperature: float
    phi_c: float
    N: int
    m: np.ndarray
    F: np.ndarray
    S: np.ndarray

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.F)


@dataclass(frozen=True)
class Minimum:
    m: float
    F: float
    index: int

    @property
    def branch(self) -> str:
        return "sparse" if self.m >= 0.5 else "dense"


def free_energy_curve(params: PhysicalParams | ModelParams, N: int, tables: MultiplicityTable) -> FreeEnergyCurve:
    """Conditional free energy and entropy at every ``M = n_s / N``."""
    theta = as_theta(params)
    pp = theta_to_physical(theta)
    log_z, mean_edges = strata_arrays(theta, N, tables)
    n_d = N - np.arange(N + 1)
    finite = np.isfinite(log_z)
    F = np.where(finite, -pp.temperature * log_z, np.inf)
    S = np.where(finite, log_z - theta.theta_e * mean_edges - theta.theta_c * n_d, np.nan)
    return FreeEnergyCurve(pp.temperature, pp.phi_c, N, np.arange(N + 1) / N, F, S)


def local_minima(curve: FreeEnergyCurve) -> list[Minimum]:
    """Discrete local minima of ``F``, most stable first.

    Infinite points are skipped, so a point next to a gap is compared with
    the nearest finite point beyond it. A run of equal values counts once,
    at its first index.
    """
    idx = np.flatnonzero(curve.finite)
    if idx.size == 0:
        raise ValueError("free-energy curve has no finite points")
    vals = curve.F[idx]
    # collapse plateaus
    starts = [0] + [k for k in range(1, len(vals)) if vals[k] != vals[k - 1]]
    run_vals = vals[starts]
    out = []
    for r, k in enumerate(starts):
        left = run_vals[r - 1] if r > 0 else math.inf
        right = run_vals[r + 1] if r + 1 < len(run_vals) else math.inf
        if run_vals[r] < left and run_vals[r] < right:
            i = int(idx[k])
            out.append(Minimum(float(curve.m[i]), float(curve.F[i]), i))
    out.sort(key=lambda mn: mn.F)
    return out


def barrier(curve: FreeEnergyCurve, a: Minimum, b: Minimum) -> float:
    """Highest finite ``F`` strictly between two minima, minus the higher minimum."""
    lo, hi = sorted((a.index, b.index))
    between = curve.F[lo + 1 : hi]
    between = between[np.isfinite(between)]
    if between.size == 0:
        return -math.inf
    return float(between.max() - max(a.F, b.F))


def _curve_at(T: float, phi_c: float, N: int, tables) -> FreeEnergyCurve:
    return free_energy_curve(PhysicalParams(T, phi_c), N, tables)


def n_minima(T: float, phi_c: float, N: int, tables) -> int:
    return len(local_minima(_curve_at(T, phi_c, N, tables)))


def _bisect(pred, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Shrink ``[lo, hi]`` with ``pred(lo) != pred(hi)`` to width ``tol``."""
    p_lo = pred(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pred(mid) == p_lo:
            lo = mid
        else:
            hi = mid
    return lo, hi


def critical_temperature(
    phi_c: float,
    N: int,
    tables: MultiplicityTable,
    bracket: tuple[float, float] = DEFAULT_BRACKET,
    tol: float = 1e-3,
    n_scan: int = 200,
    max_expand: int = 8,
) -> float:
    """Highest temperature at which the curve has two or more local minima.

    A geometric scan of ``bracket`` finds the topmost temperature with
    coexistence; bisection against the next scan point then pins the
    boundary to ``tol``. The upper end is doubled while it still shows
    coexistence.
    """
    def coexist(T):
        return n_minima(T, phi_c, N, tables) >= 2

    lo, hi = bracket
    if not 0 < lo < hi:
        raise ValueError(f"invalid bracket {bracket}")
    for _ in range(max_expand):
        if not coexist(hi):
            break
        lo, hi = hi, 2 * hi
    else:
        raise NoCoexistenceError(f"coexistence persists up to T={hi}; widen the bracket")
    grid = np.geomspace(lo, hi, n_scan)
    flags = [coexist(T) for T in grid]
    if not any(flags):
        raise NoCoexistenceError(f"no temperature in [{lo}, {hi}] has two free-energy minima (phi_c={phi_c})")
    k = max(i for i, f in enumerate(flags) if f)
    a, b = _bisect(coexist, float(grid[k]), float(grid[k + 1]), tol)
    return 0.5 * (a + b)


@dataclass(frozen=True)
class DiagramRow:
    ratio: float
    temperature: float
    minima: list[Minimum]

    @property
    def stable(self) -> Minimum:
        return self.minima[0]

    @property
    def metastable(self) -> Minimum | None:
        return self.minima[1] if len(self.minima) > 1 else None


@dataclass(frozen=True)
class PhaseDiagram:
    """Free-energy minima traced over temperatures relative to ``T_c``.

    ``coexistence_lower`` is the lowest grid ratio with two or more minima;
    ``flip_interval`` brackets, on the grid, the ratio at which the most
    stable minimum moves between the dense (``m < 1/2``) and sparse
    branches, and ``flip_ratio`` refines it by bisection.
    """

    phi_c: float
    N: int
    T_c: float
    rows: list[DiagramRow] = field(repr=False)
    coexistence_lower: float | None
    coexistence_lower_refined: float | None
    flip_interval: tuple[float, float] | None
    flip_ratio: float | None

    @property
    def ratios(self) -> np.ndarray:
        return np.array([r.ratio for r in self.rows])

    @property
    def temperatures(self) -> np.ndarray:
        return np.array([r.temperature for r in self.rows])

    def stable_m(self) -> np.ndarray:
        return np.array([r.stable.m for r in self.rows])

    def n_minima(self) -> np.ndarray:
        return np.array([len(r.minima) for r in self.rows])


def stable_branch(T: float, phi_c: float, N: int, tables) -> str:
    return local_minima(_curve_at(T, phi_c, N, tables))[0].branch


def phase_diagram(
    phi_c: float,
    N: int,
    ratios,
    tables: MultiplicityTable,
    T_c: float | None = None,
    tol: float = 1e-4,
) -> PhaseDiagram:
    if T_c is None:
        T_c = critical_temperature(phi_c, N, tables)
    ratios = np.sort(np.asarray(ratios, dtype=float))
    if ratios.size == 0:
        raise ValueError("empty T/T_c grid")
    rows = []
    for r in ratios:
        T = float(r * T_c)
        rows.append(DiagramRow(float(r), T, local_minima(_curve_at(T, phi_c, N, tables))))

    coexist = [len(row.minima) >= 2 for row in rows]
    lower = lower_refined = None
    if any(coexist):
        k = coexist.index(True)
        lower = rows[k].ratio
        if k > 0:
            a, b = _bisect(
                lambda r: n_minima(r * T_c, phi_c, N, tables) >= 2, rows[k - 1].ratio, rows[k].ratio, tol
            )
            lower_refined = 0.5 * (a + b)
        else:
            lower_refined = lower

    flip = flip_ratio = None
    branches = [row.stable.branch for row in rows]
    for k in range(len(rows) - 1):
        if branches[k] != branches[k + 1]:
            flip = (rows[k].ratio, rows[k + 1].ratio)
            a, b = _bisect(lambda r: stable_branch(r * T_c, phi_c, N, tables), flip[0], flip[1], tol)
            flip_ratio = 0.5 * (a + b)
            break
    return PhaseDiagram(phi_c, N, T_c, rows, lower, lower_refined, flip, flip_ratio)


def temperature_reading_diagnostic(T_c: float, theta: ModelParams, reported: float) -> dict:
    """Compare a reported critical value against ``T_c`` under two readings.

    The absolute reading takes ``reported`` as the critical temperature
    itself. The relative reading takes it as ``T / T_c`` at parameters
    ``theta``.
    """
    T = theta_to_physical(theta).temperature
    return {
        "T_c": T_c,
        "reference_temperature": T,
        "reference_ratio": T / T_c,
        "reported": reported,
        "absolute_deviation": abs(T_c - reported),
        "relative_deviation": abs(T / T_c - reported),
    }
