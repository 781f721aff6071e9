import math

import numpy as np
import pytest

from quasispec.cmv import (VerblunskyCoefficients, build_cmv, build_extended_cmv, cmv_spectrum_approx,
                           constant_family, covered_arc, sturmian_family, verblunsky_from_subshift)
from quasispec.errors import SamplingError
from quasispec.generators import SturmianParams, golden_theta, sturmian_window
from quasispec.schrodinger import SamplingFunction


@pytest.fixture(scope="module")
def fib_alpha():
    w = sturmian_window(SturmianParams(golden_theta(), 0), -600, 600)
    return verblunsky_from_subshift(w, SamplingFunction.symbolwise({0: 0.3, 1: 0.7}))


def random_alpha(n, seed=0):
    rng = np.random.default_rng(seed)
    r = rng.uniform(0, 0.95, n)
    return VerblunskyCoefficients(r * np.exp(2j * np.pi * rng.uniform(size=n)))


def test_two_valued_coefficients(fib_alpha):
    assert set(np.round(fib_alpha.alpha.real, 12)) == {0.3, 0.7}
    assert fib_alpha.consistency_error < 1e-12


def test_zero_sampling_gives_zero_coefficients():
    w = sturmian_window(SturmianParams(golden_theta(), 0), 0, 50)
    a = verblunsky_from_subshift(w, SamplingFunction.symbolwise({0: 0.0, 1: 0.0}))
    assert not a.alpha.any() and np.all(a.rho == 1)


def test_boundary_value_rejected():
    w = sturmian_window(SturmianParams(golden_theta(), 0), 0, 50)
    with pytest.raises(SamplingError, match=r"\(1,\)"):
        verblunsky_from_subshift(w, SamplingFunction.symbolwise({0: 0.2, 1: 1.0}))
    with pytest.raises(SamplingError):
        VerblunskyCoefficients(np.array([0.1, 1j]))


def test_first_rows_match_display():
    a = random_alpha(10)
    x, r = a.alpha, a.rho
    C = build_cmv(a, 8).matrix
    c = np.conj
    rows = [
        [c(x[0]), c(x[1]) * r[0], r[1] * r[0], 0, 0],
        [r[0], -c(x[1]) * x[0], -r[1] * x[0], 0, 0],
        [0, c(x[2]) * r[1], -c(x[2]) * x[1], c(x[3]) * r[2], r[3] * r[2]],
        [0, r[2] * r[1], -r[2] * x[1], -c(x[3]) * x[2], -r[3] * x[2]],
    ]
    assert np.allclose(C[:4, :5], np.array(rows), atol=1e-15)
    assert np.allclose(C[:4, 5:], 0)


def test_five_diagonal_pattern():
    C = build_cmv(random_alpha(70, seed=1), 64)
    assert C.bandwidth() <= 2 and C.certified


@pytest.mark.parametrize("seed", range(5))
def test_random_sections_unitary(seed):
    a = VerblunskyCoefficients(random_alpha(80, seed).alpha, start=-40)
    for closure in (-1, 1j, np.exp(0.3j)):
        assert build_extended_cmv(a, 0, 64, closure).unitarity_error < 1e-12
    assert build_cmv(VerblunskyCoefficients(a.alpha), 50).unitarity_error < 1e-12


def test_zero_coefficients_shift_structure():
    a = VerblunskyCoefficients(np.zeros(300), start=-150)
    C = build_extended_cmv(a, 0, 256)
    assert set(np.unique(np.round(C.matrix.real, 14))) <= {-1.0, 0.0, 1.0}
    assert np.allclose(np.abs(C.eigenvalues()), 1, atol=1e-10)
    gaps = np.diff(np.concatenate([C.eigenphases(), [C.eigenphases()[0] + 2 * math.pi]]))
    assert gaps.max() <= 4 * math.pi / 256


def test_fibonacci_section_unitary(fib_alpha):
    C = build_extended_cmv(fib_alpha, 0, 512)
    assert C.unitarity_error < 1e-10
    assert np.abs(np.abs(C.eigenvalues()) - 1).max() < 1e-8


def test_size_mismatch(fib_alpha):
    with pytest.raises(ValueError):
        build_extended_cmv(fib_alpha, 0, 2000)
    with pytest.raises(ValueError):
        build_cmv(VerblunskyCoefficients(fib_alpha.alpha, start=1), 16)
    with pytest.raises(ValueError):
        build_extended_cmv(fib_alpha, 0, 16, closure=0.5)


def test_covered_arc():
    assert covered_arc([0.0], 0.1) == pytest.approx(0.2)
    assert covered_arc([0.05, 2 * math.pi - 0.05], 0.1) == pytest.approx(0.3)
    assert covered_arc(np.linspace(0, 2 * math.pi, 100, endpoint=False), 0.1) == pytest.approx(2 * math.pi)
    with pytest.raises(ValueError):
        covered_arc([0.0], 0.0)


def test_free_cover_fills_circle():
    res = cmv_spectrum_approx(constant_family(0.0), 128)
    assert res.covered[2] == pytest.approx(2 * math.pi)
    assert res.max_modulus_error < 1e-10


def test_constant_coefficient_arc():
    exact = 2 * math.pi - 4 * math.asin(0.5)
    covers = [cmv_spectrum_approx(constant_family(0.5), n).covered[2] for n in (128, 256, 512)]
    assert all(exact - 0.05 < c < exact + 0.15 for c in covers)
    assert max(covers) - min(covers) < 0.1


def test_fibonacci_cover_shrinks():
    fam = sturmian_family([0.3, 0.7])
    covers = [cmv_spectrum_approx(fam, n).covered[2] for n in (128, 256, 512)]
    assert covers[0] > covers[1] > covers[2]


def test_cover_rejects_small_sections():
    with pytest.raises(ValueError):
        cmv_spectrum_approx(constant_family(0.1), 32)


def test_phase_samples_pool_eigenphases():
    res = cmv_spectrum_approx(sturmian_family([0.3, 0.7]), 64, phase_samples=3)
    assert res.phases.size == 3 * 64
    assert res.max_unitarity_error < 1e-10
