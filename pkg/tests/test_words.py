from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasispec.errors import TooFewOccurrencesError, WindowTooShortError
from quasispec.generators import SturmianParams, golden_theta, sturmian_window
from quasispec.presets import preset_window
from quasispec.words import (Window, boshernitzan_profile, boshernitzan_quantity, complexity_profile,
                             factor_frequencies, index_of, longest_palindrome, palindrome_scan,
                             palindrome_witnesses, rauzy_graph, recurrence_report, special_factors,
                             subshift_index)


def brute_factors(text: str, n: int) -> set[str]:
    return {text[i:i + n] for i in range(len(text) - n + 1)}


@pytest.fixture(scope="module")
def golden():
    return sturmian_window(SturmianParams(golden_theta(), 0), 0, 4096)


@pytest.fixture(scope="module")
def fib16():
    return preset_window("fibonacci", 0, 2 ** 16)


def test_sturmian_complexity_is_n_plus_one(golden):
    prof = complexity_profile(golden, 60)
    assert prof.as_list()[:5] == [2, 3, 4, 5, 6]
    assert all(prof[n] == n + 1 for n in range(1, 61))
    assert prof.aperiodic and not prof.hedlund_morse


def test_constant_window_has_one_factor_per_length():
    w = Window.from_string("0" * 400)
    prof = complexity_profile(w, 50)
    assert set(prof.as_list()) == {1}
    assert prof.hedlund_morse and prof.period == 1


def test_thue_morse_four_factors_match_brute_force():
    w = preset_window("thue_morse", 0, 2 ** 16)
    expected = len(brute_factors(w.to_string()[:4096], 4))
    assert expected == 10
    assert complexity_profile(w, 4)[4] == expected


def test_periodic_window_detected():
    w = Window.from_string("011" * 300)
    prof = complexity_profile(w, 20)
    assert prof.hedlund_morse and prof.period == 3
    assert not prof.aperiodic


def test_short_window_names_minimum_length():
    w = Window.from_string("0110")
    with pytest.raises(WindowTooShortError) as err:
        complexity_profile(w, 5)
    assert err.value.min_length == 20


def test_rauzy_graph_counts(golden):
    g = rauzy_graph(golden, 3)
    assert len(g.vertices) == 4 and len(g.edges) == 5
    assert g.strongly_connected()
    for w, (src, dst, lab) in zip(range(len(g.edges)), g.edges):
        assert src == lab[:-1] and dst == lab[1:]


def test_rauzy_graph_periodic_is_cycle():
    g = rauzy_graph(Window.from_string("01" * 200), 2)
    assert g.is_simple_cycle()


def test_rauzy_graph_one_letter_self_loop():
    g = rauzy_graph(Window.from_string("0" * 40), 1)
    assert g.vertices == ((0,),) and g.edges == (((0,), (0,), (0, 0)),)


@pytest.mark.parametrize("n", [1, 5, 12, 20, 30])
def test_sturmian_has_unique_special_factors(golden, n):
    sf = special_factors(golden, n)
    assert list(sf.right.values()) == [2] and list(sf.left.values()) == [2]


def test_tribonacci_special_factor():
    w = preset_window("tribonacci", 0, 2 ** 14)
    sf = special_factors(w, 5)
    assert list(sf.right.values()) == [3]
    assert complexity_profile(w, 5)[5] == 11 == (3 - 1) * 5 + 1


def test_periodic_window_has_no_special_factors():
    sf = special_factors(Window.from_string("00101" * 100), 6)
    assert not sf.right and not sf.left


def test_palindrome_scan_matches_brute_force():
    text = preset_window("period_doubling", 0, 300).to_string()
    w = Window.from_string(text)
    found = {(p.start, p.length) for p in palindrome_scan(w, 3)}
    brute = set()
    for i in range(len(text)):
        for j in range(i + 3, len(text) + 1):
            s = text[i:j]
            if s == s[::-1]:
                ext = i > 0 and j < len(text) and text[i - 1] == text[j]
                if not ext:
                    brute.add((i, j - i))
    assert found == brute


def test_fibonacci_palindromes_are_long(fib16):
    assert longest_palindrome(fib16) >= 100


def test_rudin_shapiro_palindromes_are_short():
    w = preset_window("rudin_shapiro", 0, 2 ** 16)
    assert longest_palindrome(w) < 14


def test_one_letter_window_is_one_palindrome():
    w = Window.from_string("1" * 30)
    pals = palindrome_scan(w, 1)
    # every center's maximal palindrome runs into an edge, so every factor is a palindrome
    assert len(pals) == 2 * 30 - 1
    assert all(p.at_edge for p in pals)


def test_palindrome_witnesses_ratio(fib16):
    ws = palindrome_witnesses(fib16, 1.001, min_len=20)
    assert ws
    for x in ws:
        assert x.log_ratio == pytest.approx(abs(x.center) * np.log(1.001) - np.log(x.length))


def test_index_period_doubling_ten():
    w = preset_window("period_doubling", 0, 4096)
    assert index_of((1, 0), w).index >= Fraction(7, 2)


def test_index_direct_count():
    rep = index_of((0, 1), Window.from_string("0101010"))
    assert rep.index == Fraction(7, 2) and rep.occurs


def test_index_missing_word_is_flagged(fib16):
    rep = index_of((0, 0), fib16)
    assert rep.index == 0 and not rep.occurs


def test_index_fibonacci_w2_is_finite_rational(fib16):
    rep = index_of((1, 0, 1), fib16)
    text = fib16.to_string()
    # exhaustive: longest prefix of (101)^inf occurring in the text
    best = max(m for m in range(3, 40) if ("101" * 20)[:m] in text)
    assert rep.index == Fraction(best, 3)


def test_subshift_index_lower_bound(fib16):
    assert subshift_index(fib16.sub(0, 4096), 8).index >= Fraction(3)


def test_recurrence_frequency_of_one(fib16):
    rep = recurrence_report(fib16, (1,))
    assert rep.frequency == pytest.approx((5 ** 0.5 - 1) / 2, abs=1e-3)


def test_recurrence_periodic_gaps():
    rep = recurrence_report(Window.from_string("0012" * 50), (1, 2))
    assert set(rep.gaps.tolist()) == {4}


def test_recurrence_linear_constant(fib16):
    rep = recurrence_report(fib16, (1, 0, 1, 1, 0))
    assert rep.max_gap_ratio <= 4


def test_recurrence_needs_two_occurrences():
    with pytest.raises(TooFewOccurrencesError):
        recurrence_report(Window.from_string("0001000"), (1,))


def test_boshernitzan_periodic_is_one():
    w = Window.from_string("00101" * 200)
    assert boshernitzan_quantity(w, 5).value == pytest.approx(1, abs=0.01)


def test_boshernitzan_fibonacci_bounded_below():
    w = preset_window("fibonacci", 0, 2 ** 18)
    q = [1, 2, 3, 5, 8, 13, 21, 34, 55, 89]
    assert min(v.value for v in boshernitzan_profile(w, q)) > 0.2


def test_boshernitzan_random_is_small():
    rng = np.random.default_rng(7)
    w = Window.from_symbols(rng.integers(0, 2, 2 ** 16))
    assert boshernitzan_quantity(w, 16).value < 16 * 2.0 ** -10


symbols = st.lists(st.integers(0, 2), min_size=40, max_size=200)


@settings(max_examples=60, deadline=None)
@given(symbols)
def test_complexity_matches_brute_force(seq):
    w = Window.from_symbols(seq, alphabet=(0, 1, 2))
    n_max = len(seq) // 4
    prof = complexity_profile(w, n_max)
    text = "".join(map(str, seq))
    # a finite window can lose factors as n grows; growth is only guaranteed once saturated
    sat = [n for n in range(1, n_max) if prof.saturated[n] and prof.saturated[n + 1]]
    assert all(prof[n + 1] >= prof[n] for n in sat)
    assert all(prof[n] <= 3 ** n and prof[n + 1] <= 3 * prof[n] for n in range(1, n_max))
    assert all(prof[n] == len(brute_factors(text, n)) for n in range(1, n_max + 1))


@settings(max_examples=60, deadline=None)
@given(symbols, st.integers(1, 6))
def test_frequencies_sum_to_one(seq, n):
    w = Window.from_symbols(seq)
    total = sum(factor_frequencies(w, n).values())
    assert abs(total - 1) <= (n - 1) / len(seq) + 1e-12


@settings(max_examples=60, deadline=None)
@given(symbols, st.integers(1, 8))
def test_rauzy_counts_equal_complexity(seq, n):
    w = Window.from_symbols(seq)
    g = rauzy_graph(w, n, check_margin=False)
    text = "".join(map(str, seq))
    assert len(g.vertices) == len(brute_factors(text[:len(text) - 1], n)) or \
        len(g.vertices) == len(brute_factors(text, n))
    assert len(g.edges) == len(brute_factors(text, n + 1))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=6), st.integers(2, 6))
def test_index_of_power_at_least_m(word, m):
    w = Window.from_symbols(word * m + [2])
    assert index_of(tuple(word), w).index >= m
