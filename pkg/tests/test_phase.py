import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ergmphase.graph import ModelParams, PhysicalParams
from ergmphase.multiplicity import MultiplicityTable
from ergmphase.phase import (
    FreeEnergyCurve,
    NoCoexistenceError,
    barrier,
    critical_temperature,
    free_energy_curve,
    local_minima,
    n_minima,
    phase_diagram,
    temperature_reading_diagnostic,
)

PHI_C = 3.373
# regression anchors pinned by this implementation (bisection to 1e-3)
TC_100 = 0.6789615666405505
TC_50 = 0.87169008456663
TC_20 = 1.3481689545480875
GRID = np.round(np.arange(0.05, 1.5001, 0.01), 2)


def synthetic(F):
    F = np.asarray(F, dtype=float)
    N = len(F) - 1
    return FreeEnergyCurve(1.0, 0.0, N, np.arange(N + 1) / N, F, np.zeros_like(F))


# local minima on synthetic curves


def test_monotone_curve():
    mins = local_minima(synthetic([0, 1, 2, 3, 4]))
    assert [(m.index, m.m) for m in mins] == [(0, 0.0)]


def test_v_shape():
    mins = local_minima(synthetic([4, 2, 1, 3, 5]))
    assert [m.index for m in mins] == [2]


def test_plateau_counts_once():
    mins = local_minima(synthetic([3, 1, 1, 1, 2]))
    assert [m.index for m in mins] == [1]


def test_double_well_sorted_by_depth():
    mins = local_minima(synthetic([1, 2, 3, 2, 0.5]))
    assert [m.index for m in mins] == [4, 0]
    assert barrier(synthetic([1, 2, 3, 2, 0.5]), *mins) == pytest.approx(2.0)


def test_gap_uses_nearest_finite_neighbour():
    inf = math.inf
    # the point after the gap is compared with the point before it
    assert [m.index for m in local_minima(synthetic([0, 1, 2, inf, inf, 3]))] == [0]
    assert [m.index for m in local_minima(synthetic([5, 4, 3, inf, inf, 1]))] == [5]
    assert [m.index for m in local_minima(synthetic([0, 1, 2, inf, inf, 1]))] == [0, 5]


def test_all_infinite_curve_rejected():
    with pytest.raises(ValueError):
        local_minima(synthetic([math.inf] * 4))


@given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=2, max_size=40))
def test_minima_are_local_and_sorted(F):
    curve = synthetic(F)
    mins = local_minima(curve)
    assert mins
    assert [m.F for m in mins] == sorted(m.F for m in mins)
    assert mins[0].F == min(F)
    for m in mins:
        k = m.index
        assert k == 0 or F[k - 1] > F[k]
        right = k + 1
        while right < len(F) and F[right] == F[k]:
            right += 1
        assert right == len(F) or F[right] > F[k]


# curves from the model


def test_n3_curve_has_two_finite_points():
    curve = free_energy_curve(PhysicalParams(1.0, 1.0), 3, MultiplicityTable.build(3))
    assert curve.finite.tolist() == [True, False, False, True]


def test_high_temperature_minimum_at_zero(tables100):
    curve = free_energy_curve(ModelParams(-1e-6, -PHI_C * 1e-6), 100, tables100)
    assert local_minima(curve)[0].m == 0.0


def test_low_temperature_minimum_near_one(tables100):
    curve = free_energy_curve(PhysicalParams(0.2 * TC_100, PHI_C), 100, tables100)
    assert local_minima(curve)[0].m >= 0.98


def test_parameterizations_agree(tables100):
    pp = PhysicalParams(0.5, PHI_C)
    a = free_energy_curve(pp, 100, tables100)
    b = free_energy_curve(pp.to_theta(), 100, tables100)
    assert np.array_equal(a.finite, b.finite)
    assert np.allclose(a.F[a.finite], b.F[b.finite], rtol=1e-12)


def test_entropy_identity_on_curve(tables100):
    curve = free_energy_curve(PhysicalParams(0.6, PHI_C), 100, tables100)
    assert np.all(np.isnan(curve.S) == ~curve.finite)
    assert np.all(curve.S[curve.finite] >= -1e-9)


# critical temperature and diagram


def test_critical_temperature_anchors(tables100, tables50):
    assert critical_temperature(PHI_C, 100, tables100) == pytest.approx(TC_100, abs=1e-3)
    assert critical_temperature(PHI_C, 50, tables50) == pytest.approx(TC_50, abs=1e-3)


def test_no_coexistence_error(tables50):
    with pytest.raises(NoCoexistenceError):
        critical_temperature(0.0, 50, tables50, bracket=(1.0, 5.0))


def test_zero_penalty_leaves_only_a_narrow_window(tables50):
    # the construction drops graphs with one or two concurrent vertices, which
    # alone produces a thin low-temperature double well at phi_c = 0
    Ts = np.geomspace(0.05, 5, 600)
    co = [T for T in Ts if n_minima(T, 0.0, 50, tables50) >= 2]
    assert co and max(co) - min(co) < 0.06
    assert max(co) < 0.4 * TC_50


def test_invalid_bracket(tables50):
    with pytest.raises(ValueError):
        critical_temperature(PHI_C, 50, tables50, bracket=(1.0, 0.5))


def test_bisection_agrees_with_dense_scan(tables100):
    Tc = critical_temperature(PHI_C, 100, tables100)
    step = 1e-3
    scan = np.arange(Tc - 0.05, Tc + 0.05, step)
    coexist = [T for T in scan if n_minima(T, PHI_C, 100, tables100) >= 2]
    assert abs(max(coexist) - Tc) <= step


def test_single_dense_minimum_above_tc(tables100):
    for T in np.linspace(TC_100, 2 * TC_100, 21)[1:]:
        mins = local_minima(free_energy_curve(PhysicalParams(T, PHI_C), 100, tables100))
        assert len(mins) == 1
        assert mins[0].branch == "dense"


@pytest.mark.parametrize("ratio", [0.76, 0.8, 0.85, 0.9, 0.95])
def test_double_well_inside_window(tables100, ratio):
    curve = free_energy_curve(PhysicalParams(ratio * TC_100, PHI_C), 100, tables100)
    mins = local_minima(curve)
    assert len(mins) == 2
    assert {m.branch for m in mins} == {"dense", "sparse"}
    assert barrier(curve, *mins) > 0


def test_phase_diagram_n100(tables100):
    d = phase_diagram(PHI_C, 100, GRID, tables100, T_c=TC_100)
    assert d.coexistence_lower == pytest.approx(0.74)
    assert d.flip_interval == pytest.approx((0.80, 0.81))
    assert d.coexistence_lower <= d.flip_ratio <= 1.0
    counts = d.n_minima()
    assert np.all(counts[d.ratios > 1.0] == 1)
    # stable branch moves monotonically towards m = 1 as T falls
    m_star = d.stable_m()[::-1]
    assert np.all(np.diff(m_star) >= 0)
    for row in d.rows:
        if row.metastable is not None:
            assert row.metastable.F >= row.stable.F


def test_phase_diagram_n50_anchor(tables50):
    d = phase_diagram(PHI_C, 50, GRID, tables50, T_c=TC_50)
    assert d.coexistence_lower == pytest.approx(0.79)
    assert d.flip_interval == pytest.approx((0.84, 0.85))


def test_empty_grid_rejected(tables50):
    with pytest.raises(ValueError):
        phase_diagram(PHI_C, 50, [], tables50, T_c=TC_50)


def test_temperature_reading_diagnostic():
    theta = ModelParams(-1.631, -5.502)
    d = temperature_reading_diagnostic(TC_100, theta, 0.95)
    assert d["reference_temperature"] == pytest.approx(1 / 1.631)
    assert d["reference_ratio"] == pytest.approx(d["reference_temperature"] / TC_100)
    assert d["absolute_deviation"] == pytest.approx(abs(TC_100 - 0.95))
    assert d["relative_deviation"] == pytest.approx(abs(d["reference_ratio"] - 0.95))
