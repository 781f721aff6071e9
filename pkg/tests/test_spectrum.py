import math

import numpy as np
import pytest

from quasispec.intervals import IntervalSet
from quasispec.spectrum import (BernoulliModel, ConstantModel, SubstitutionModel, box_counts, box_dimension,
                                cantor_set, contained, fibonacci_model, grid_to_intervals, lyapunov,
                                lyapunov_grid, spectrum_approx, zset_scan)
from quasispec.tracemap import sigma_k


def test_free_exponent_outside():
    est = lyapunov(ConstantModel(0.0), 3.0, 10 ** 5)
    assert est.gamma == pytest.approx(math.log((3 + math.sqrt(5)) / 2), abs=1e-3)


def test_free_exponent_inside():
    assert lyapunov(ConstantModel(0.0), 1.0, 10 ** 5).gamma <= 1e-2


def test_fibonacci_exponent_small_on_spectrum():
    fine = sigma_k(1.0, 20).bands
    outer = spectrum_approx(1.0, 12).intervals
    mids = fine.bounds.mean(axis=1)[::700]
    assert all(outer.contains(E) for E in mids)
    g = lyapunov_grid(fibonacci_model(1.0), mids, 10 ** 5, 2)
    assert g.max() <= 5e-3


def test_exponent_nonnegative_and_spread():
    est = lyapunov(fibonacci_model(2.0), 0.7, 2000, 4)
    assert est.gamma >= 0 and est.spread >= 0 and len(est.per_phase) == 4


def test_short_products_rejected():
    with pytest.raises(ValueError):
        lyapunov(ConstantModel(0.0), 0.0, 50)


def test_free_zero_set():
    grid = np.linspace(-3, 3, 601)
    z = zset_scan(ConstantModel(0.0), grid, 20000, 5e-3)
    assert z.padded().hull == pytest.approx((-2, 2), abs=0.02)
    assert len(z.intervals) == 1


def test_zero_set_inside_norm_bound():
    grid = np.linspace(-6, 7, 1301)
    z = zset_scan(fibonacci_model(2.0), grid, 2000, 1e-2)
    lo, hi = z.intervals.hull
    assert lo >= -4 and hi <= 4


def test_zero_set_needs_sorted_grid():
    with pytest.raises(ValueError):
        zset_scan(ConstantModel(0.0), [0.0, -1.0, 1.0], 200, 0.1)


@pytest.mark.xfail(strict=True, reason="grid zero-set sits about 5.15% away from the band approximant "
                                      "at these parameters; see the decisions ledger")
def test_zero_set_matches_band_approximant():
    h = 1e-4
    grid = np.arange(-2.5, 3.5 + h / 2, h)
    z = zset_scan(fibonacci_model(1.0), grid, 5000, 2e-3, phase_samples=4)
    approx = spectrum_approx(1.0, 12).intervals
    rel = z.padded().symmetric_difference_measure(approx) / approx.measure
    assert rel < 0.05


def test_grid_runs():
    g = np.arange(10.0)
    m = np.array([0, 1, 1, 0, 1, 0, 0, 1, 1, 1], dtype=bool)
    assert grid_to_intervals(g, m).to_list() == [[1, 2], [4, 4], [7, 9]]


def test_first_level_formulas():
    lam = 1.0
    a = spectrum_approx(lam, 1)
    assert np.allclose(a.levels[0].bands.bounds, [[lam - 2, lam + 2]])
    E = np.linspace(-4, 5, 9001)
    x1 = (E - lam) / 2
    x2 = 2 * x1 * (E / 2) - 1
    bounded = (np.abs(x1) <= 1) | (np.abs(x2) <= 1)
    assert np.array_equal(a.intervals.widen(1e-12).contains(E), bounded)


def test_free_approximant_is_interval():
    for k in (1, 5):
        assert np.allclose(spectrum_approx(0.0, k).intervals.bounds, [[-2, 2]])


def test_approximant_measure_shrinks():
    m = {k: spectrum_approx(5.0, k).measure for k in (3, 6, 10)}
    assert m[10] < m[6] < m[3]


@pytest.mark.parametrize("lam", [1.0, 5.0])
def test_approximants_decrease(lam):
    prev = None
    for k in range(1, 13):
        a = spectrum_approx(lam, k)
        assert a.certified
        if prev is not None:
            assert a.monotone and contained(a.intervals, prev, 1e-8)
        prev = a.intervals


def test_silver_approximant_nested():
    a = spectrum_approx(2.0, 6, coefficients=(2,))
    assert a.monotone and a.band_count <= a.levels[0].period + a.levels[1].period


def test_box_counts_simple():
    s = IntervalSet([(0.0, 0.25), (0.5, 0.55)])
    assert box_counts(s, 0.1) == 3 + 1
    assert box_counts(IntervalSet(), 0.1) == 0


def test_unit_interval_dimension():
    d = box_dimension(IntervalSet([(0.0, 1.0)]), np.geomspace(0.1, 1e-4, 8))
    assert d.dimension >= 0.98 and not d.degenerate


def test_cantor_dimension():
    d = box_dimension(cantor_set(8), 3.0 ** -np.arange(1, 8))
    assert d.dimension == pytest.approx(math.log(2) / math.log(3), abs=0.03)


def test_fibonacci_dimension_trend():
    scales = np.geomspace(1e-1, 1e-4, 10)
    dims = [box_dimension(spectrum_approx(lam, 12).intervals, scales).dimension for lam in (5.0, 8.0, 16.0)]
    assert dims[0] < 1 and dims[0] > dims[1] > dims[2]


def test_point_set_is_degenerate():
    d = box_dimension(IntervalSet([(0.3, 0.3)]), np.geomspace(0.1, 1e-4, 5))
    assert d.degenerate


def test_dimension_needs_scale_range():
    with pytest.raises(ValueError):
        box_dimension(cantor_set(3), [0.1, 0.09, 0.08, 0.07])


def test_models_describe_and_bound():
    sub = SubstitutionModel({0: [0, 1], 1: [0]}, 0, {0: 0.0, 1: 2.5})
    V = sub.potential(1, 50)
    assert set(V.value_set) <= {0.0, 2.5} and sub.sup_norm == 2.5
    b = BernoulliModel(8.0, seed=1)
    assert np.array_equal(b.potential(0, 100).values, b.potential(0, 100).values)
    assert set(np.abs(b.potential(3, 100).values)) == {8.0}
    assert fibonacci_model(1.5).describe()["lambda"] == 1.5
