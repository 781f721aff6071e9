from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasispec.errors import PartitionError, RationalThetaError, SubstitutionError
from quasispec.generators import (ContinuedFraction, IETParams, RotationCoding, SturmianParams, Substitution,
                                  continued_fraction, entropy_estimate, golden_theta, iet_coding, k_partition,
                                  keane_check, primitivity_check, quadratic_theta, rotation_coding_window,
                                  standard_words, sturmian_window, substitution_fixed_point)
from quasispec.presets import preset_substitution, preset_window
from quasispec.words import Window, complexity_profile


def floor_difference(theta, phi, n0, n1, dps=80):
    """s_n = floor((n+1) theta + phi) - floor(n theta + phi), the left-closed coding."""
    with mpmath.workdps(dps):
        t, p = mpmath.mpf(theta), mpmath.mpf(phi)
        return [int(mpmath.floor((n + 1) * t + p) - mpmath.floor(n * t + p)) for n in range(n0, n1)]


def cf_oracle(x, depth):
    out = []
    with mpmath.workdps(200):
        for _ in range(depth):
            x = 1 / x
            a = int(mpmath.floor(x))
            out.append(a)
            x -= a
    return out


def test_golden_expansion_and_denominators():
    cf = continued_fraction(golden_theta(), 10)
    assert cf.coefficients == (1,) * 10
    assert cf.q[:10] == (1, 1, 2, 3, 5, 8, 13, 21, 34, 55)


def test_silver_expansion_matches_oracle():
    with mpmath.workdps(200):
        theta = mpmath.sqrt(2) - 1
    cf = continued_fraction(theta, 6)
    assert list(cf.coefficients) == cf_oracle(theta, 6) == [2] * 6


def test_rational_theta_rejected():
    with pytest.raises(RationalThetaError) as err:
        continued_fraction(Fraction(1, 2), 3)
    assert err.value.depth == 2


def test_rational_sturmian_params_rejected():
    with pytest.raises(RationalThetaError):
        SturmianParams(0.5, 0)


def test_convergent_recursions():
    cf = continued_fraction(quadratic_theta((1, 2, 3)), 15)
    for k in range(2, 16):
        assert cf.p[k] == cf.a(k) * cf.p[k - 1] + cf.p[k - 2]
        assert cf.q[k] == cf.a(k) * cf.q[k - 1] + cf.q[k - 2]
        assert np.gcd(cf.p[k], cf.q[k]) == 1


def test_golden_window_first_symbols():
    w = sturmian_window(SturmianParams(golden_theta(), 0), 1, 9)
    assert w.to_list() == [1, 0, 1, 1, 0, 1, 0, 1]


@pytest.mark.parametrize("coeffs", [(1,), (2,), (1, 3)])
@pytest.mark.parametrize("phi", [0, Fraction(1, 3), "0.7071"])
def test_window_matches_floor_formula(coeffs, phi):
    theta = quadratic_theta(coeffs)
    w = sturmian_window(SturmianParams(theta, phi), -500, 1500)
    ph = Fraction(phi)
    with mpmath.workdps(80):
        ref = floor_difference(theta, mpmath.mpf(ph.numerator) / ph.denominator, -500, 1500)
    assert w.to_list() == ref


def test_variants_agree_off_endpoint_hits():
    th = golden_theta()
    left = sturmian_window(SturmianParams(th, 0, "left"), 1, 1001).to_list()
    right = sturmian_window(SturmianParams(th, 0, "right"), 1, 1001).to_list()
    assert left == right
    # at n = 0 the orbit sits on the endpoint 0 = 1 (mod 1) and the variants split
    assert sturmian_window(SturmianParams(th, 0, "left"), 0, 1).to_list() == [0]
    assert sturmian_window(SturmianParams(th, 0, "right"), 0, 1).to_list() == [1]


def test_symbol_frequency_is_theta():
    th = golden_theta()
    w = sturmian_window(SturmianParams(th, 0), 1, 100_001)
    assert abs(w.codes.mean() - float(th)) <= 1e-4


def test_fibonacci_standard_words():
    sw = standard_words(continued_fraction(golden_theta(), 20), 20)
    assert sw.as_strings()[1:6] == ["1", "10", "101", "10110", "10110101"]
    for k in range(2, 21):
        assert sw[k] == sw[k - 1] + sw[k - 2]
        assert len(sw[k]) == sw.cf.q[k]


def test_silver_standard_word_length():
    sw = standard_words(ContinuedFraction.from_coefficients([2] * 5), 3)
    assert [len(w) for w in sw.words[1:]] == [2, 5, 12]


@pytest.mark.parametrize("coeffs", [(1,), (2,)])
def test_window_prefixes_are_standard_words(coeffs):
    cf = ContinuedFraction.from_coefficients(coeffs * 14)
    sw = standard_words(cf, 12)
    w = sturmian_window(SturmianParams(quadratic_theta(coeffs), 0), 1, cf.q[12] + 1)
    for k in range(1, 13):
        assert w.to_list()[:cf.q[k]] == list(sw[k])
        assert sw[k + 1 if k < 12 else k][:len(sw[k])] == sw[k]


def test_k_partition_small_window():
    cf = continued_fraction(golden_theta(), 10)
    w = sturmian_window(SturmianParams(golden_theta(), 0), 1, 9)
    part = k_partition(w, cf, 3)
    assert [(b.kind, b.start, b.length) for b in part.blocks] == [(3, 1, 3), (2, 4, 2), (3, 6, 3)]
    assert set(part.runs()) <= {1, 2}


def test_k_partition_level_zero_is_symbols():
    cf = continued_fraction(golden_theta(), 10)
    w = sturmian_window(SturmianParams(golden_theta(), 0), 1, 30)
    part = k_partition(w, cf, 0)
    assert all(b.length == 1 for b in part.blocks) and len(part.blocks) == 29


@pytest.mark.parametrize("coeffs,k", [((1,), 5), ((2,), 3), ((1, 2), 4)])
def test_k_partition_concatenates_and_runs(coeffs, k):
    cf = ContinuedFraction.from_coefficients(coeffs * 10)
    w = sturmian_window(SturmianParams(quadratic_theta(coeffs), Fraction(2, 7)), -300, 700)
    part = k_partition(w, cf, k)
    assert sum(b.length for b in part.blocks) == len(w)
    assert all(b.start == a.start + a.length for a, b in zip(part.blocks, part.blocks[1:]))
    assert set(part.runs()) <= {cf.a(k + 1), cf.a(k + 1) + 1}


def test_k_partition_detects_flip():
    cf = continued_fraction(golden_theta(), 12)
    w = sturmian_window(SturmianParams(golden_theta(), 0), 0, 400)
    codes = w.codes.copy()
    codes[200] ^= 1
    with pytest.raises(PartitionError) as err:
        k_partition(Window(codes, w.alphabet, 0), cf, 4)
    assert err.value.index <= 200 + len(standard_words(cf, 4)[4]) * 3


PRINTED = {
    ("fibonacci", 1): "1011010110110",
    ("thue_morse", 1): "100101100110",
    ("thue_morse", 0): "0110100110010110",
    ("period_doubling", 1): "101110101011101110",
    ("rudin_shapiro", 1): "1213124212134313",
    ("rudin_shapiro", 4): "4342431343421242",
}


@pytest.mark.parametrize("name,seed", list(PRINTED))
def test_fixed_point_prefixes(name, seed):
    sub, _ = preset_substitution(name)
    text = PRINTED[(name, seed)]
    w = substitution_fixed_point(sub, seed, len(text))
    assert "".join(map(str, w.to_list())) == text


@pytest.mark.parametrize("name", ["fibonacci", "thue_morse", "period_doubling", "rudin_shapiro", "tribonacci"])
def test_fixed_point_is_invariant(name):
    sub, seed = preset_substitution(name)
    w = substitution_fixed_point(sub, seed, 5000)
    img = sub.apply(w.to_list()[:1000])
    assert list(img[:5000]) == w.to_list()[:len(img[:5000])]
    assert primitivity_check(sub)[0]


def test_fixed_point_needs_power():
    sub = Substitution({0: "10", 1: "0"})          # S(0) starts with 1, S^2(0) = 010
    w = substitution_fixed_point(sub, 0, 20)
    sq = sub.power(2)
    assert list(sq.apply(w.to_list())[:20]) == w.to_list()


def test_primitivity_witness_and_failure():
    assert primitivity_check(Substitution({1: "12", 2: "13", 3: "1"})) == (True, 3)
    assert primitivity_check(Substitution({0: "00", 1: "01"}))[0] is False


def test_substitution_missing_rule():
    with pytest.raises(SubstitutionError):
        Substitution({0: "01"})


def test_substitution_matrix():
    sub, _ = preset_substitution("fibonacci")
    assert sub.matrix.tolist() == [[0, 1], [1, 1]]


def test_two_interval_rotation_coding_is_sturmian():
    p = SturmianParams(golden_theta(), Fraction(1, 5))
    a = rotation_coding_window(RotationCoding.sturmian(p), 1, 10_001)
    b = sturmian_window(p, 1, 10_001)
    assert np.array_equal(a.labels(), b.labels())


def test_one_interval_coding_is_constant():
    w = rotation_coding_window(RotationCoding(golden_theta(), 0, [], [3]), 0, 100)
    assert set(w.to_list()) == {3}


def test_three_interval_coding_is_eventually_affine():
    rc = RotationCoding(golden_theta(), 0, [Fraction(1, 3), Fraction(2, 3)], [0, 1, 2])
    w = rotation_coding_window(rc, 0, 20_000)
    prof = complexity_profile(w, 60)
    ns = np.arange(20, 61)
    ps = np.array([prof[n] for n in ns])
    a, b = np.polyfit(ns, ps, 1)
    assert np.allclose(ps, np.round(a) * ns + np.round(b))
    text = "".join(map(str, w.to_list()))
    assert all(prof[n] == len({text[i:i + n] for i in range(len(text) - n + 1)}) for n in (20, 40, 60))


def test_overlapping_partition_rejected():
    with pytest.raises(ValueError):
        RotationCoding(golden_theta(), 0, [0.5, 0.4], [0, 1, 2])


def test_two_interval_exchange_is_sturmian():
    th = float(golden_theta())
    iet = IETParams((1 - th, th), (2, 1))
    x0 = 0.123456789
    a = iet_coding(iet, x0, 0, 3000).to_list()
    # T is rotation by theta; T^n x0 in I_2 = [1 - theta, 1) exactly when s_n = 1
    b = floor_difference(th, x0, 0, 3000, dps=30)
    assert a == [1 + s for s in b]


def test_iet_inverse_round_trip():
    iet = IETParams((0.2, 0.3, 0.5), (3, 1, 2))
    inv = iet.inverse()
    xs = np.linspace(0, 1, 1001, endpoint=False)
    assert max(abs(inv(iet(x)) - x) for x in xs) < 1e-12


def test_iet_preserves_measure():
    iet = IETParams((0.25, 0.35, 0.4), (2, 3, 1))
    xs = (np.arange(1000) + 0.5) / 1000
    ys = np.sort([iet(x) for x in xs])
    assert np.max(np.abs(np.diff(ys) - 1e-3)) < 1e-9


def test_keane_flags_rational_reducible():
    iet = IETParams((Fraction(1, 4), Fraction(1, 4), Fraction(1, 2)), (2, 1, 3))
    rep = keane_check(iet, horizon=50)
    assert not rep.satisfied and rep.collision is not None


def test_keane_clean_for_irrational_rotation():
    th = float(golden_theta())
    assert keane_check(IETParams((1 - th, th), (2, 1)), horizon=5000).satisfied


def test_entropy_estimates():
    stur = sturmian_window(SturmianParams(golden_theta(), 0), 0, 4096)
    assert entropy_estimate(stur, 50).final < 0.1
    rng = np.random.default_rng(3)
    rnd = Window.from_symbols(rng.integers(0, 2, 2 ** 18))
    assert entropy_estimate(rnd, 12).final == pytest.approx(np.log(2), abs=0.05)
    const = Window.from_string("0" * 200)
    assert entropy_estimate(const, 20).final == 0.0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=1, max_size=3), st.fractions(0, 1).filter(lambda f: f < 1))
def test_sturmian_window_matches_floor_formula_randomized(coeffs, phi):
    theta = quadratic_theta(tuple(coeffs))
    w = sturmian_window(SturmianParams(theta, phi), -50, 250)
    with mpmath.workdps(80):
        assert w.to_list() == floor_difference(theta, mpmath.mpf(phi.numerator) / phi.denominator, -50, 250)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 5), min_size=3, max_size=12))
def test_standard_word_lengths_are_denominators(coeffs):
    cf = ContinuedFraction.from_coefficients(coeffs)
    sw = standard_words(cf, len(coeffs))
    assert [len(w) for w in sw.words] == list(cf.q)
    assert all(b > a for a, b in zip(cf.q[1:], cf.q[2:]))
