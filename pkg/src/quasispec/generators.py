"""Windows of Sturmian, substitution, rotation-coding and interval-exchange sequences.

Slopes are handled as exact rationals: floats are taken at their exact binary
value, ``mpmath`` numbers at their working precision. Sturmian and rotation
codings are evaluated in fixed-point integer arithmetic with ``FIXED_BITS``
fractional bits, so the two endpoint conventions never get mixed up by
floating-point rounding.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Sequence

import mpmath
import numpy as np

from .errors import (PartitionError, RationalThetaError, SubstitutionError,
                     WindowTooShortError)
from .words import MARGIN, Window, Word, complexity_profile

FIXED_BITS = 256
_ONE = 1 << FIXED_BITS


def exact_value(x) -> Fraction:
    """The exact rational value of a number as stored in memory."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, mpmath.mpf):
        sign, man, exp, _ = x._mpf_
        v = Fraction(int(man)) * (Fraction(2) ** int(exp))
        return -v if sign else v
    if isinstance(x, str):
        with mpmath.workprec(FIXED_BITS + 64):
            return exact_value(mpmath.mpf(x))
    if isinstance(x, Real):
        return Fraction(float(x))
    raise TypeError(f"cannot interpret {x!r} as a real number")


def golden_theta() -> mpmath.mpf:
    """(sqrt(5) - 1) / 2 to 512 bits."""
    with mpmath.workprec(512):
        return (mpmath.sqrt(5) - 1) / 2


def quadratic_theta(coefficients: Sequence[int], bits: int = 512) -> mpmath.mpf:
    """Value of the purely periodic continued fraction [0; a1, a2, ..., ak, a1, ...]."""
    with mpmath.workprec(bits):
        x = mpmath.mpf(1)
        # Fixed-point iteration of x = 1/(a1 + 1/(a2 + ... + 1/(ak + x))) converges
        # geometrically; 4 * bits sweeps are plenty.
        for _ in range(4 * bits // max(len(coefficients), 1) + 8):
            y = x
            for a in reversed(coefficients):
                y = 1 / (a + y)
            x = y
        return x


@dataclass(frozen=True)
class ContinuedFraction:
    """Coefficients a_1..a_K with convergents p_k/q_k for k = 0..K."""

    coefficients: tuple[int, ...]
    p: tuple[int, ...]
    q: tuple[int, ...]
    theta: Fraction | None = None

    @classmethod
    def from_coefficients(cls, coefficients: Sequence[int], theta=None) -> "ContinuedFraction":
        a = tuple(int(x) for x in coefficients)
        if not a or any(x < 1 for x in a):
            raise ValueError("continued fraction coefficients must be positive integers")
        p, q = [0, 1], [1, a[0]]
        for k in range(2, len(a) + 1):
            p.append(a[k - 1] * p[k - 1] + p[k - 2])
            q.append(a[k - 1] * q[k - 1] + q[k - 2])
        return cls(a, tuple(p), tuple(q), None if theta is None else exact_value(theta))

    @property
    def depth(self) -> int:
        return len(self.coefficients)

    def a(self, k: int) -> int:
        """1-based coefficient a_k."""
        return self.coefficients[k - 1]

    def convergent(self, k: int) -> Fraction:
        return Fraction(self.p[k], self.q[k])


def continued_fraction(theta, depth: int) -> ContinuedFraction:
    """Expansion theta = 1/(a_1 + 1/(a_2 + ...)) to ``depth`` coefficients.

    Raises RationalThetaError when the expansion of the stored value
    terminates before ``depth``.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    x = exact_value(theta)
    if not 0 < x < 1:
        raise ValueError("theta must lie in (0, 1)")
    coeffs = []
    r = x
    for k in range(1, depth + 1):
        if r == 0:
            raise RationalThetaError(x, k)
        inv = 1 / r
        a = inv.numerator // inv.denominator
        coeffs.append(int(a))
        r = inv - a
    cf = ContinuedFraction.from_coefficients(coeffs, x)
    for k in range(1, depth + 1):
        if r == 0 and k == depth:
            break
        if not abs(x - cf.convergent(k)) < Fraction(1, cf.q[k] ** 2):
            raise ArithmeticError(f"convergent {k} fails the approximation bound")
    return cf


@dataclass(frozen=True)
class SturmianParams:
    """Slope, phase and endpoint convention of s_n = chi_I(n theta + phi).

    ``variant="left"`` uses I = [1 - theta, 1), ``"right"`` uses (1 - theta, 1].
    """

    theta: Fraction
    phi: Fraction = Fraction(0)
    variant: str = "left"

    def __init__(self, theta, phi=0, variant: str = "left"):
        t = exact_value(theta)
        if not 0 < t < 1:
            raise ValueError("theta must lie in (0, 1)")
        _reject_numerically_rational(t)
        f = exact_value(phi)
        if not 0 <= f < 1:
            raise ValueError("phi must lie in [0, 1)")
        if variant not in ("left", "right"):
            raise ValueError("variant must be 'left' or 'right'")
        object.__setattr__(self, "theta", t)
        object.__setattr__(self, "phi", f)
        object.__setattr__(self, "variant", variant)

    @property
    def fixed_theta(self) -> int:
        return math.floor(self.theta * _ONE)

    @property
    def fixed_phi(self) -> int:
        return math.floor(self.phi * _ONE)

    def continued_fraction(self, depth: int) -> ContinuedFraction:
        return continued_fraction(self.theta, depth)


def _reject_numerically_rational(t: Fraction, depth: int = 24, max_coeff: int = 10**9) -> None:
    r = t
    for k in range(1, depth + 1):
        if r == 0:
            raise RationalThetaError(t, k)
        inv = 1 / r
        a = inv.numerator // inv.denominator
        if a > max_coeff:
            raise RationalThetaError(_truncate(t, k), k)
        r = inv - a


def _truncate(t: Fraction, k: int) -> Fraction:
    """Convergent p_{k-1}/q_{k-1} of t, the rational it is numerically equal to."""
    coeffs, r = [], t
    for _ in range(k - 1):
        inv = 1 / r
        a = inv.numerator // inv.denominator
        coeffs.append(a)
        r = inv - a
    if not coeffs:
        return Fraction(0)
    cf = ContinuedFraction.from_coefficients(coeffs)
    return cf.convergent(len(coeffs))


def _rotation_fracs(theta_fixed: int, phi_fixed: int, start: int, stop: int) -> list[int]:
    """Fixed-point fractional parts of n*theta + phi for start <= n < stop."""
    mask = _ONE - 1
    x = (start * theta_fixed + phi_fixed) & mask
    out = []
    append = out.append
    for _ in range(stop - start):
        append(x)
        x = (x + theta_fixed) & mask
    return out


def sturmian_window(params: SturmianParams, start: int, stop: int) -> Window:
    """s_n for start <= n < stop."""
    if stop < start:
        raise ValueError("empty or reversed index range")
    th = params.fixed_theta
    cut = _ONE - th
    fr = _rotation_fracs(th, params.fixed_phi, start, stop)
    if params.variant == "left":
        bits = [1 if f >= cut else 0 for f in fr]
    else:
        bits = [1 if (f > cut or f == 0) else 0 for f in fr]
    return Window.from_symbols(np.array(bits, dtype=np.int64), start, alphabet=(0, 1))


@dataclass(frozen=True)
class StandardWords:
    words: tuple[Word, ...]
    cf: ContinuedFraction

    def __getitem__(self, k: int) -> Word:
        return self.words[k]

    def __len__(self) -> int:
        return len(self.words)

    def as_strings(self) -> list[str]:
        return ["".join(map(str, w)) for w in self.words]


def standard_words(cf: ContinuedFraction, k: int) -> StandardWords:
    """w_0 = 0, w_1 = 0^(a_1 - 1) 1, w_{j+1} = w_j^(a_{j+1}) w_{j-1}."""
    if k < 0 or k > cf.depth:
        raise ValueError(f"k={k} outside 0..{cf.depth}")
    words: list[Word] = [(0,)]
    if k >= 1:
        words.append((0,) * (cf.a(1) - 1) + (1,))
    for j in range(1, k):
        words.append(words[j] * cf.a(j + 1) + words[j - 1])
    for j, w in enumerate(words):
        if len(w) != cf.q[j]:
            raise ArithmeticError(f"|w_{j}| = {len(w)} differs from q_{j} = {cf.q[j]}")
    return StandardWords(tuple(words), cf)


@dataclass(frozen=True)
class Block:
    kind: int          # k for w_k, k - 1 for w_{k-1}
    start: int         # absolute index of the first covered symbol
    length: int        # symbols covered inside the window
    partial: bool      # cut by a window edge


@dataclass(frozen=True)
class KPartition:
    k: int
    blocks: tuple[Block, ...]

    def kinds(self) -> list[int]:
        return [b.kind for b in self.blocks]

    def runs(self) -> list[int]:
        """Lengths of maximal runs of w_k blocks strictly between two w_{k-1} blocks."""
        out, run, seen = [], 0, False
        for b in self.blocks:
            if b.kind == self.k:
                run += 1
            else:
                if seen:
                    out.append(run)
                seen, run = True, 0
        return out


def k_partition(window: Window, cf: ContinuedFraction, k: int) -> KPartition:
    """Parse a Sturmian window into blocks w_k and w_{k-1}.

    Blocks of type w_{k-1} are isolated and runs of w_k between them have
    length a_{k+1} or a_{k+1} + 1 (for k = 0, where w_{-1} = 1, runs of 0 have
    length a_1 - 1 or a_1). The first and last blocks may be cut by the window
    edges. Raises PartitionError with the first index no consistent parse covers.
    """
    if k < 0 or k + 1 > cf.depth:
        raise ValueError(f"k={k} needs continued fraction depth >= {k + 1}")
    sw = standard_words(cf, max(k, 1))
    big = sw[k]
    small = sw[k - 1] if k >= 1 else (1,)
    lo, hi = (cf.a(k + 1), cf.a(k + 1) + 1) if k >= 1 else (cf.a(1) - 1, cf.a(1))
    if window.alphabet != (0, 1):
        window = Window.from_symbols(window.labels(), window.start, alphabet=(0, 1))
    s = window.codes
    L = s.size
    blocks_arr = {k: np.array(big, dtype=np.uint8), k - 1: np.array(small, dtype=np.uint8)}

    def fits(kind, pos, offset=0):
        b = blocks_arr[kind][offset:]
        n = min(b.size, L - pos)
        return n > 0 and np.array_equal(s[pos:pos + n], b[:n]), n

    # state: (pos, last_kind, run, seen_small); run counts w_k blocks since the last w_{k-1}
    starts = [((0, None, 0, False), None)]
    for kind in (k, k - 1):
        for off in range(1, blocks_arr[kind].size):
            starts.append(((0, None, 0, False), (kind, off)))

    best_reach = 0
    for init, partial in starts:
        parent: dict = {}
        frontier = []
        if partial is None:
            frontier.append(init)
            parent[init] = None
        else:
            kind, off = partial
            ok, n = fits(kind, 0, off)
            if not ok:
                continue
            st = (n, kind, 1 if kind == k else 0, kind == k - 1)
            parent[st] = (None, Block(kind, window.start, n, True))
            frontier.append(st)
        while frontier:
            nxt = []
            for st in frontier:
                pos, last, run, seen = st
                best_reach = max(best_reach, pos)
                if pos >= L:
                    return KPartition(k, tuple(_backtrack(parent, st)))
                for kind in (k, k - 1):
                    if kind == k and run + 1 > hi:
                        continue
                    if kind == k - 1:
                        if last == k - 1 and k >= 1:
                            continue
                        if seen and not lo <= run <= hi:
                            continue
                        if not seen and run > hi:
                            continue
                    ok, n = fits(kind, pos)
                    if not ok:
                        continue
                    full = n == blocks_arr[kind].size
                    new = (pos + n, kind, run + 1 if kind == k else 0, seen or kind == k - 1)
                    if new in parent:
                        continue
                    parent[new] = (st, Block(kind, window.start + pos, n, not full))
                    nxt.append(new)
            frontier = nxt
    raise PartitionError(window.start + best_reach, k)


def _backtrack(parent, st) -> list[Block]:
    out = []
    while parent.get(st) is not None:
        prev, block = parent[st]
        out.append(block)
        if prev is None:
            break
        st = prev
    return out[::-1]


@dataclass(frozen=True)
class Substitution:
    rules: dict[int, tuple[int, ...]]

    def __init__(self, rules: dict):
        clean = {}
        for a, img in rules.items():
            if isinstance(img, str):
                img = [int(c) for c in img]
            img = tuple(int(x) for x in img)
            if not img:
                raise SubstitutionError(f"image of {a} is empty")
            clean[int(a)] = img
        missing = {b for img in clean.values() for b in img} - set(clean)
        if missing:
            raise SubstitutionError(f"symbols {sorted(missing)} have no rule")
        object.__setattr__(self, "rules", clean)

    @property
    def alphabet(self) -> tuple[int, ...]:
        return tuple(sorted(self.rules))

    @property
    def matrix(self) -> np.ndarray:
        """M[a, b] = number of b's in S(a), rows and columns in alphabet order."""
        idx = {a: i for i, a in enumerate(self.alphabet)}
        m = np.zeros((len(idx), len(idx)), dtype=np.int64)
        for a, img in self.rules.items():
            for b in img:
                m[idx[a], idx[b]] += 1
        return m

    def apply(self, word: Sequence[int]) -> tuple[int, ...]:
        out: list[int] = []
        for a in word:
            out.extend(self.rules[int(a)])
        return tuple(out)

    def power(self, m: int) -> "Substitution":
        rules = {a: (a,) for a in self.rules}
        for _ in range(m):
            rules = {a: self.apply(w) for a, w in rules.items()}
        return Substitution(rules)


def primitivity_check(sub: Substitution) -> tuple[bool, int | None]:
    """Whether some S^k(a) contains every b for all a; returns the least such k."""
    n = len(sub.alphabet)
    bound = (n - 1) ** 2 + 1
    m = (sub.matrix > 0).astype(np.int64)
    p = m.copy()
    for k in range(1, bound + 1):
        if (p > 0).all():
            return True, k
        p = ((p @ m) > 0).astype(np.int64)
    return False, None


def _iterate_codes(images: list[np.ndarray], seed_code: int, length: int) -> np.ndarray:
    lens = np.array([img.size for img in images], dtype=np.int64)
    flat = np.concatenate(images)
    offs = np.concatenate([[0], np.cumsum(lens)[:-1]])
    w = np.array([seed_code], dtype=np.int64)
    while w.size < length:
        w = w[:length]
        ln = lens[w]
        total = int(ln.sum())
        base = np.repeat(offs[w] - (np.cumsum(ln) - ln), ln)
        nxt = flat[base + np.arange(total)]
        if nxt.size <= w.size:
            raise SubstitutionError("iteration does not grow")
        w = nxt
    return w[:length]


def substitution_fixed_point(sub: Substitution, seed: int, length: int) -> Window:
    """Prefix of the one-sided fixed point obtained by iterating on ``seed``.

    If S(seed) does not start with ``seed`` or has length 1, the smallest power
    S^m for which it does is used instead.
    """
    alphabet = sub.alphabet
    if seed not in sub.rules:
        raise SubstitutionError(f"seed {seed} not in alphabet {alphabet}")
    n = len(alphabet)
    bound = max(n * n + 1, 4)
    use = None
    for m in range(1, bound + 1):
        sm = sub.power(m)
        img = sm.rules[seed]
        if img[0] == seed and len(img) >= 2:
            use = sm
            break
    if use is None:
        raise SubstitutionError(f"no power S^m, m <= {bound}, fixes a prefix at seed {seed}")
    idx = {a: i for i, a in enumerate(alphabet)}
    images = [np.array([idx[b] for b in use.rules[a]], dtype=np.int64) for a in alphabet]
    codes = _iterate_codes(images, idx[seed], length)
    return Window.from_symbols(np.asarray(alphabet, dtype=np.int64)[codes], 0, alphabet=alphabet)


@dataclass(frozen=True)
class RotationCoding:
    """Labels of n theta + phi in [0, 1) = I_1 u ... u I_l, I_j = [c_{j-1}, c_j)."""

    theta: Fraction
    phi: Fraction
    cuts: tuple[Fraction, ...]
    labels: tuple[int, ...]

    def __init__(self, theta, phi, cuts: Sequence, labels: Sequence[int]):
        params = SturmianParams(theta, phi)
        cs = tuple(exact_value(c) for c in cuts)
        if len(labels) != len(cs) + 1:
            raise ValueError("need exactly one label per interval")
        edges = (Fraction(0),) + cs + (Fraction(1),)
        if any(not edges[i] < edges[i + 1] for i in range(len(edges) - 1)):
            raise ValueError("partition points must be strictly increasing inside (0, 1)")
        object.__setattr__(self, "theta", params.theta)
        object.__setattr__(self, "phi", params.phi)
        object.__setattr__(self, "cuts", cs)
        object.__setattr__(self, "labels", tuple(int(x) for x in labels))

    @classmethod
    def sturmian(cls, params: SturmianParams) -> "RotationCoding":
        th = Fraction(params.fixed_theta, _ONE)
        return cls(params.theta, params.phi, [1 - th], [0, 1])


def rotation_coding_window(rc: RotationCoding, start: int, stop: int) -> Window:
    th = math.floor(rc.theta * _ONE)
    ph = math.floor(rc.phi * _ONE)
    cuts = [math.floor(c * _ONE) for c in rc.cuts]
    labels = rc.labels
    fr = _rotation_fracs(th, ph, start, stop)
    out = [labels[bisect.bisect_right(cuts, f)] for f in fr]
    return Window.from_symbols(np.array(out, dtype=np.int64), start,
                               alphabet=tuple(sorted(set(labels))))


@dataclass(frozen=True)
class IETParams:
    """Interval exchange of I_i = [mu_{i-1}, mu_i) according to tau (1-based)."""

    lengths: tuple
    perm: tuple[int, ...]

    def __init__(self, lengths: Sequence, perm: Sequence[int]):
        lam = tuple(lengths)
        tau = tuple(int(t) for t in perm)
        m = len(lam)
        if m < 1 or len(tau) != m or sorted(tau) != list(range(1, m + 1)):
            raise ValueError("perm must be a permutation of 1..m")
        if any(x <= 0 for x in lam):
            raise ValueError("interval lengths must be positive")
        exact = all(isinstance(x, (Fraction, int)) for x in lam)
        total = sum(lam)
        if (exact and total != 1) or (not exact and abs(float(total) - 1) > 1e-12):
            raise ValueError("interval lengths must sum to 1")
        if exact:
            lam = tuple(Fraction(x) for x in lam)
        else:
            lam = tuple(float(x) for x in lam)
        object.__setattr__(self, "lengths", lam)
        object.__setattr__(self, "perm", tau)

    @property
    def exact(self) -> bool:
        return isinstance(self.lengths[0], Fraction)

    @property
    def m(self) -> int:
        return len(self.lengths)

    def _cumsum(self, lam) -> list:
        zero = Fraction(0) if self.exact else 0.0
        out = [zero]
        for x in lam:
            out.append(out[-1] + x)
        return out

    @property
    def mu(self) -> list:
        return self._cumsum(self.lengths)

    @property
    def permuted_lengths(self) -> tuple:
        inv = self.inverse_perm
        return tuple(self.lengths[inv[j] - 1] for j in range(self.m))

    @property
    def inverse_perm(self) -> tuple[int, ...]:
        inv = [0] * self.m
        for i, t in enumerate(self.perm):
            inv[t - 1] = i + 1
        return tuple(inv)

    def inverse(self) -> "IETParams":
        return IETParams(self.permuted_lengths, self.inverse_perm)

    def interval_of(self, x) -> int:
        """0-based index i with x in I_{i+1}."""
        mu = self.mu
        return min(max(bisect.bisect_right(mu, x) - 1, 0), self.m - 1)

    def __call__(self, x):
        mu = self.mu
        mut = self._cumsum(self.permuted_lengths)
        i = self.interval_of(x)
        y = x - mu[i] + mut[self.perm[i] - 1]
        if not self.exact:
            if y >= 1.0:
                y -= 1.0
            elif y < 0.0:
                y += 1.0
        return y


def iet_coding(params: IETParams, x0, start: int, stop: int) -> Window:
    """omega_n = i when T^n(x0) lies in I_i, for start <= n < stop."""
    if stop < start:
        raise ValueError("empty or reversed index range")
    x0 = Fraction(x0) if params.exact else float(x0)
    if not 0 <= x0 < 1:
        raise ValueError("x0 must lie in [0, 1)")
    fwd, inv = params, params.inverse()
    x = x0
    if start > 0:
        for _ in range(start):
            x = fwd(x)
    elif start < 0:
        for _ in range(-start):
            x = inv(x)
    out = []
    for _ in range(stop - start):
        out.append(params.interval_of(x) + 1)
        x = fwd(x)
    return Window.from_symbols(np.array(out, dtype=np.int64), start,
                               alphabet=tuple(range(1, params.m + 1)))


@dataclass(frozen=True)
class KeaneReport:
    satisfied: bool
    collision: tuple[int, int, int] | None   # (i, n, j): T^n(mu_i) = mu_j
    horizon: int


def keane_check(params: IETParams, horizon: int = 100_000, tol: float = 1e-11) -> KeaneReport:
    """Look for T^n(mu_i) = mu_j with 1 <= n <= horizon among interior discontinuities.

    Exact for rational lengths; with floats, coincidences within ``tol`` count.
    A clean report only says nothing was found up to the horizon.
    """
    mu = params.mu[1:-1]
    if not mu:
        return KeaneReport(True, None, horizon)
    targets = {x: j + 1 for j, x in enumerate(mu)} if params.exact else None
    sorted_mu = np.array(sorted(float(x) for x in mu))
    for i, start in enumerate(mu, start=1):
        x = start
        for n in range(1, horizon + 1):
            x = params(x)
            if params.exact:
                j = targets.get(x)
                if j is not None:
                    return KeaneReport(False, (i, n, j), horizon)
            else:
                k = int(np.searchsorted(sorted_mu, x))
                for kk in (k - 1, k):
                    if 0 <= kk < sorted_mu.size and abs(sorted_mu[kk] - x) <= tol:
                        return KeaneReport(False, (i, n, kk + 1), horizon)
    return KeaneReport(True, None, horizon)


@dataclass(frozen=True)
class EntropyEstimate:
    values: tuple[float, ...]     # (1/n) log p(n), n = 1..n_max
    final: float
    subadditive: bool


def entropy_estimate(window: Window, n_max: int) -> EntropyEstimate:
    if len(window) < MARGIN * n_max:
        raise WindowTooShortError(len(window), MARGIN * n_max, f"entropy up to n={n_max}")
    prof = complexity_profile(window, n_max)
    logs = {n: math.log(prof[n]) for n in range(1, n_max + 1)}
    vals = tuple(logs[n] / n for n in range(1, n_max + 1))
    sub = all(logs[a + b] <= logs[a] + logs[b] + 1e-12
              for a in range(1, n_max) for b in range(1, n_max - a + 1))
    return EntropyEstimate(vals, vals[-1], sub)
