"""Combinatorics on finite windows of symbolic sequences.

Every statistic here is computed from a finite window, so the results are
statements about that window: factor counts, Rauzy graphs, special factors,
palindromes, powers, return times and empirical cylinder frequencies.
Statistics at length ``n`` require a window of at least ``4 * n`` symbols and
carry a *saturation* flag, which is set when no new factor of that length
first appears in the last quarter of the window. The flag is a heuristic for
completeness of the factor set, not a proof.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numba
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import TooFewOccurrencesError, WindowTooShortError

Word = tuple[int, ...]

MARGIN = 4


@dataclass(frozen=True, eq=False)
class Window:
    """A contiguous piece ``s[start], ..., s[start + len - 1]`` of a sequence.

    ``codes`` holds canonical symbols ``0..|A|-1``; ``alphabet[c]`` is the
    original label of code ``c``.
    """

    codes: np.ndarray
    alphabet: tuple[int, ...]
    start: int = 0

    @classmethod
    def from_symbols(cls, symbols: Iterable[int], start: int = 0,
                     alphabet: Sequence[int] | None = None) -> "Window":
        arr = np.asarray(list(symbols) if not isinstance(symbols, np.ndarray) else symbols)
        arr = arr.astype(np.int64, copy=False)
        if alphabet is None:
            labels = tuple(int(x) for x in np.unique(arr))
        else:
            labels = tuple(int(x) for x in alphabet)
            if len(set(labels)) != len(labels) or not labels:
                raise ValueError("alphabet must be non-empty with distinct symbols")
        if len(labels) > 255:
            raise ValueError("alphabets with more than 255 symbols are not supported")
        lab = np.asarray(labels, dtype=np.int64)
        order = np.argsort(lab)
        pos = np.searchsorted(lab[order], arr)
        pos = np.minimum(pos, lab.size - 1)
        bad = lab[order][pos] != arr
        if bad.any():
            raise ValueError(f"symbol {int(arr[bad][0])} outside alphabet {labels}")
        codes = order[pos].astype(np.uint8)
        codes.setflags(write=False)
        return cls(codes, labels, int(start))

    @classmethod
    def from_string(cls, text: str, start: int = 0,
                    alphabet: Sequence[int] | None = None) -> "Window":
        return cls.from_symbols([int(c) for c in text.strip()], start, alphabet)

    def __len__(self) -> int:
        return int(self.codes.size)

    @property
    def stop(self) -> int:
        return self.start + len(self)

    def labels(self) -> np.ndarray:
        return np.asarray(self.alphabet, dtype=np.int64)[self.codes]

    def to_string(self) -> str:
        if any(not 0 <= a <= 9 for a in self.alphabet):
            raise ValueError("string form needs single-digit labels; use to_list()")
        return "".join(str(x) for x in self.labels())

    def to_list(self) -> list[int]:
        return [int(x) for x in self.labels()]

    def word(self, i: int, n: int) -> Word:
        """Word of length ``n`` at absolute index ``i``."""
        j = i - self.start
        if j < 0 or j + n > len(self):
            raise IndexError(f"[{i}, {i + n}) is outside the window [{self.start}, {self.stop})")
        return tuple(self.alphabet[c] for c in self.codes[j:j + n])

    def sub(self, a: int, b: int) -> "Window":
        """Sub-window over absolute indices ``[a, b)``."""
        if a < self.start or b > self.stop or a > b:
            raise IndexError(f"[{a}, {b}) is outside the window [{self.start}, {self.stop})")
        return Window(self.codes[a - self.start:b - self.start], self.alphabet, a)

    def encode(self, word: Sequence[int]) -> np.ndarray | None:
        lut = {lab: i for i, lab in enumerate(self.alphabet)}
        try:
            return np.array([lut[int(x)] for x in word], dtype=np.uint8)
        except KeyError:
            return None


def _require(window: Window, n: int, what: str) -> None:
    if n < 1:
        raise ValueError("factor length must be >= 1")
    need = MARGIN * n
    if len(window) < need:
        raise WindowTooShortError(len(window), need, what)


def _factor_table(codes: np.ndarray, n: int):
    """Distinct length-n factors as (rows, first positions, counts)."""
    view = np.ascontiguousarray(sliding_window_view(codes, n))
    keys = view.view(np.dtype((np.void, n))).ravel()
    _, first, counts = np.unique(keys, return_index=True, return_counts=True)
    order = np.argsort(first, kind="stable")
    first = first[order]
    return view[first], first, counts[order]


def _as_word(window: Window, row: np.ndarray) -> Word:
    return tuple(window.alphabet[int(c)] for c in row)


def _saturated(first: np.ndarray, length: int, n: int) -> bool:
    positions = length - n + 1
    return bool(first.max() < 0.75 * positions)


def factor_counts(window: Window, n: int) -> dict[Word, int]:
    """Occurrence counts of every length-n factor, in order of first appearance."""
    _require(window, n, f"factors of length {n}")
    rows, _, counts = _factor_table(window.codes, n)
    return {_as_word(window, r): int(c) for r, c in zip(rows, counts)}


def factor_frequencies(window: Window, n: int) -> dict[Word, float]:
    """Empirical frequencies count / (|window| - n + 1)."""
    total = len(window) - n + 1
    return {w: c / total for w, c in factor_counts(window, n).items()}


@dataclass(frozen=True)
class ComplexityProfile:
    values: dict[int, int]
    saturated: dict[int, bool]
    window_length: int
    aperiodic: bool
    hedlund_morse: bool
    period: int | None

    def __getitem__(self, n: int) -> int:
        return self.values[n]

    def as_list(self) -> list[int]:
        return [self.values[n] for n in sorted(self.values)]


def complexity_profile(window: Window, n_max: int) -> ComplexityProfile:
    """Factor complexity p(n) for 1 <= n <= n_max.

    ``aperiodic`` is set when p(n) >= n + 1 for every computed n. When some
    p(n0) <= n0 the Hedlund-Morse test fires: the first n1 with
    p(n1) = p(n1 + 1) is located and ``period`` is p(n1) if the Rauzy graph
    R(n1) is a simple cycle.
    """
    _require(window, n_max, f"complexity up to n={n_max}")
    values, sat = {}, {}
    for n in range(1, n_max + 1):
        _, first, _ = _factor_table(window.codes, n)
        values[n] = int(first.size)
        sat[n] = _saturated(first, len(window), n)
    aperiodic = all(values[n] >= n + 1 for n in values)
    fired = not aperiodic
    period = None
    if fired:
        for n in range(1, n_max):
            if values[n] == values[n + 1]:
                if rauzy_graph(window, n, check_margin=False).is_simple_cycle():
                    period = values[n]
                break
    return ComplexityProfile(values, sat, len(window), aperiodic, fired, period)


@dataclass(frozen=True)
class RauzyGraph:
    n: int
    vertices: tuple[Word, ...]
    edges: tuple[tuple[Word, Word, Word], ...]
    saturated: bool = True
    _succ: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        succ: dict[Word, list[Word]] = {v: [] for v in self.vertices}
        for src, dst, _ in self.edges:
            succ[src].append(dst)
        self._succ.update(succ)

    def out_degree(self, v: Word) -> int:
        return len(self._succ[v])

    def in_degree(self, v: Word) -> int:
        return sum(1 for _, dst, _ in self.edges if dst == v)

    def _reach(self, start: Word, reverse: bool) -> set[Word]:
        adj: dict[Word, list[Word]] = {v: [] for v in self.vertices}
        for src, dst, _ in self.edges:
            if reverse:
                adj[dst].append(src)
            else:
                adj[src].append(dst)
        seen = {start}
        todo = deque([start])
        while todo:
            v = todo.popleft()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        return seen

    def strongly_connected(self) -> bool:
        if not self.vertices:
            return False
        v0 = self.vertices[0]
        everything = set(self.vertices)
        return self._reach(v0, False) == everything and self._reach(v0, True) == everything

    def is_simple_cycle(self) -> bool:
        if len(self.edges) != len(self.vertices):
            return False
        indeg: dict[Word, int] = {v: 0 for v in self.vertices}
        for _, dst, _ in self.edges:
            indeg[dst] += 1
        return (all(len(s) == 1 for s in self._succ.values())
                and all(d == 1 for d in indeg.values())
                and self.strongly_connected())


def rauzy_graph(window: Window, n: int, check_margin: bool = True) -> RauzyGraph:
    """Rauzy graph R(n): an edge ax -> xb for every factor axb of length n + 1."""
    if check_margin:
        _require(window, n + 1, f"Rauzy graph of order {n}")
    rows_n, first_n, _ = _factor_table(window.codes, n)
    rows_e, first_e, _ = _factor_table(window.codes, n + 1)
    vertices = tuple(_as_word(window, r) for r in rows_n)
    edges = []
    for r in rows_e:
        w = _as_word(window, r)
        edges.append((w[:-1], w[1:], w))
    sat = _saturated(first_n, len(window), n) and _saturated(first_e, len(window), n + 1)
    return RauzyGraph(n, vertices, tuple(edges), sat)


@dataclass(frozen=True)
class SpecialFactors:
    n: int
    right: dict[Word, int]
    left: dict[Word, int]

    @property
    def bispecial(self) -> tuple[Word, ...]:
        return tuple(w for w in self.right if w in self.left)


def special_factors(window: Window, n: int) -> SpecialFactors:
    """Right/left special factors of length n with their extension counts."""
    g = rauzy_graph(window, n)
    outd: dict[Word, int] = {v: 0 for v in g.vertices}
    ind: dict[Word, int] = {v: 0 for v in g.vertices}
    for src, dst, _ in g.edges:
        outd[src] += 1
        ind[dst] += 1
    right = {v: d for v, d in outd.items() if d >= 2}
    left = {v: d for v, d in ind.items() if d >= 2}
    return SpecialFactors(n, right, left)


@numba.njit(cache=True)
def _manacher(codes):
    # Interleave separators: t = # c0 # c1 # ... # c_{L-1} #
    n = codes.size
    m = 2 * n + 1
    t = np.full(m, -1, dtype=np.int64)
    for i in range(n):
        t[2 * i + 1] = codes[i]
    rad = np.zeros(m, dtype=np.int64)
    c = 0
    r = 0
    for i in range(m):
        if i < r:
            rad[i] = min(r - i, rad[2 * c - i])
        while i - rad[i] - 1 >= 0 and i + rad[i] + 1 < m and t[i - rad[i] - 1] == t[i + rad[i] + 1]:
            rad[i] += 1
        if i + rad[i] > r:
            c = i
            r = i + rad[i]
    return rad


@dataclass(frozen=True)
class Palindrome:
    start: int
    length: int
    at_edge: bool

    @property
    def center(self) -> float:
        return self.start + (self.length - 1) / 2


def palindrome_scan(window: Window, min_len: int = 1) -> list[Palindrome]:
    """Maximal palindromic factors (one per center) of length >= min_len.

    ``at_edge`` marks palindromes that touch a window boundary; their true
    extent in the full sequence may be longer.
    """
    if min_len < 1:
        raise ValueError("min_len must be >= 1")
    if len(window) == 0:
        return []
    rad = _manacher(window.codes.astype(np.int64))
    out = []
    L = len(window)
    for i in np.flatnonzero(rad >= min_len):
        length = int(rad[i])
        s = (int(i) - length) // 2
        out.append(Palindrome(window.start + s, length, s == 0 or s + length == L))
    return out


def longest_palindrome(window: Window) -> int:
    if len(window) == 0:
        return 0
    return int(_manacher(window.codes.astype(np.int64)).max())


@dataclass(frozen=True)
class PalindromeWitness:
    center: float
    length: int
    log_ratio: float   # log(B**|center| / length)


def palindrome_witnesses(window: Window, B: float, min_len: int = 2) -> list[PalindromeWitness]:
    """Candidate (n_j, l_j) pairs for strong palindromicity, by distance from 0.

    Only record-setting lengths are kept: walking outwards from the origin, a
    palindrome is listed when it is longer than every palindrome closer to 0.
    Strong palindromicity needs ``log_ratio`` to tend to minus infinity.
    """
    if B <= 1:
        raise ValueError("growth constant B must exceed 1")
    pals = sorted(palindrome_scan(window, min_len), key=lambda p: (abs(p.center), -p.length))
    out, best = [], 0
    logB = math.log(B)
    for p in pals:
        if p.length > best:
            best = p.length
            out.append(PalindromeWitness(p.center, p.length, abs(p.center) * logB - math.log(p.length)))
    return out


def _runs(codes: np.ndarray, d: int) -> np.ndarray:
    """run[i] = number of t >= 0 with codes[i+t+d] == codes[i+t] consecutively."""
    L = codes.size
    if d >= L:
        return np.zeros(max(L - d + 1, 0), dtype=np.int64)
    eq = codes[d:] == codes[:-d]
    false_at = np.flatnonzero(~eq)
    idx = np.arange(L - d + 1)
    if false_at.size == 0:
        return eq.size - idx
    nxt = np.searchsorted(false_at, idx)
    stop = np.where(nxt < false_at.size, false_at[np.minimum(nxt, false_at.size - 1)], eq.size)
    return stop - idx


def occurrences(window: Window, word: Sequence[int]) -> np.ndarray:
    """Relative positions of ``word`` inside the window."""
    enc = window.encode(word)
    n = len(word)
    if enc is None or n == 0 or n > len(window):
        return np.zeros(0, dtype=np.int64)
    view = sliding_window_view(window.codes, n)
    return np.flatnonzero((view == enc).all(axis=1))


@dataclass(frozen=True)
class IndexReport:
    word: Word
    index: Fraction
    occurs: bool
    position: int | None


def index_of(word: Sequence[int], window: Window) -> IndexReport:
    """Largest r = m + |x|/|w| with (xy)^m x a factor of the window, w = xy.

    This is a lower bound for the index of ``word`` in the full language.
    Words that do not occur get index 0 and ``occurs=False``.
    """
    w = tuple(int(x) for x in word)
    if not w:
        raise ValueError("word must be non-empty")
    occ = occurrences(window, w)
    if occ.size == 0:
        return IndexReport(w, Fraction(0), False, None)
    d = len(w)
    runs = _runs(window.codes, d)
    total = d + runs[occ]
    k = int(np.argmax(total))
    return IndexReport(w, Fraction(int(total[k]), d), True, window.start + int(occ[k]))


def subshift_index(window: Window, max_period: int) -> IndexReport:
    """Largest index over all factors of length <= max_period."""
    best = IndexReport((), Fraction(0), False, None)
    for d in range(1, min(max_period, len(window)) + 1):
        runs = _runs(window.codes, d)
        i = int(np.argmax(runs))
        r = Fraction(d + int(runs[i]), d)
        if r > best.index:
            best = IndexReport(window.word(window.start + i, d), r, True, window.start + i)
    return best


@dataclass(frozen=True)
class RecurrenceReport:
    word: Word
    positions: np.ndarray
    gaps: np.ndarray
    max_gap: int
    max_gap_ratio: float
    frequency: float

    @property
    def count(self) -> int:
        return int(self.positions.size)


def recurrence_report(window: Window, word: Sequence[int]) -> RecurrenceReport:
    w = tuple(int(x) for x in word)
    occ = occurrences(window, w)
    if occ.size < 2:
        raise TooFewOccurrencesError(w, int(occ.size))
    gaps = np.diff(occ)
    mg = int(gaps.max())
    freq = occ.size / (len(window) - len(w) + 1)
    return RecurrenceReport(w, occ + window.start, gaps, mg, mg / len(w), float(freq))


@dataclass(frozen=True)
class BoshernitzanValue:
    n: int
    value: float
    argmin: Word
    saturated: bool


def boshernitzan_quantity(window: Window, n: int) -> BoshernitzanValue:
    """min over length-n factors w of n * freq(w)."""
    _require(window, n, f"frequencies at n={n}")
    rows, first, counts = _factor_table(window.codes, n)
    k = int(np.argmin(counts))
    total = len(window) - n + 1
    return BoshernitzanValue(n, n * int(counts[k]) / total, _as_word(window, rows[k]),
                             _saturated(first, len(window), n))


def boshernitzan_profile(window: Window, ns: Iterable[int]) -> list[BoshernitzanValue]:
    return [boshernitzan_quantity(window, n) for n in ns]
