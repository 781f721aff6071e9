"""Discrete Schrodinger operators with potentials sampled from sequences.

Conventions: the one-step matrix at site n is A(n) = [[E - V(n), -1], [1, 0]],
U(n) = (u(n), u(n-1)) and U(n) = A(n-1) ... A(0) U(0).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numba
import numpy as np

from .errors import RepetitionError, SamplingError, WindowTooShortError
from .words import Window, Word

RESCALE_EVERY = 64


def word_key(word: Sequence[int]) -> str:
    """String key used for sampling tables: concatenated digits, or comma separated."""
    if all(0 <= int(a) <= 9 for a in word):
        return "".join(str(int(a)) for a in word)
    return ",".join(str(int(a)) for a in word)


def _scalar(v):
    if isinstance(v, Mapping):
        v = complex(float(v["re"]), float(v.get("im", 0.0)))
    v = complex(v)
    return v.real if v.imag == 0 else v


def _json_scalar(v):
    return {"re": v.real, "im": v.imag} if isinstance(v, complex) else v


@dataclass(frozen=True)
class SamplingFunction:
    """f(omega) = h(omega_{-M} ... omega_N) for a finite table h."""

    M: int
    N: int
    table: Mapping[Word, float]
    alphabet: tuple[int, ...]

    def __init__(self, table: Mapping, alphabet: Sequence[int], M: int = 0, N: int = 0):
        if M < 0 or N < 0:
            raise ValueError("window offsets must be non-negative")
        width = M + N + 1
        clean: dict[Word, float] = {}
        for k, v in table.items():
            if isinstance(k, str):
                k = tuple(int(x) for x in (k.split(",") if "," in k else k))
            elif isinstance(k, int):
                k = (k,)
            k = tuple(int(x) for x in k)
            if len(k) != width:
                raise SamplingError(f"table key {k} has length {len(k)}, expected {width}")
            clean[k] = _scalar(v)
        alph = tuple(int(a) for a in alphabet)
        missing = [w for w in itertools.product(alph, repeat=width) if w not in clean]
        if missing:
            raise SamplingError(f"table is not total: no value for {missing[0]}"
                                f" ({len(missing)} words missing)")
        object.__setattr__(self, "M", int(M))
        object.__setattr__(self, "N", int(N))
        object.__setattr__(self, "table", clean)
        object.__setattr__(self, "alphabet", alph)

    @classmethod
    def symbolwise(cls, values: Mapping[int, float]) -> "SamplingFunction":
        """M = N = 0: V(n) = g(s_n)."""
        return cls({(a,): v for a, v in values.items()}, list(values))

    @property
    def width(self) -> int:
        return self.M + self.N + 1

    def to_json(self) -> dict:
        return {"M": self.M, "N": self.N, "alphabet": list(self.alphabet),
                "table": {word_key(k): _json_scalar(v) for k, v in sorted(self.table.items())}}

    @classmethod
    def from_json(cls, obj: Mapping) -> "SamplingFunction":
        return cls(obj["table"], obj["alphabet"], obj.get("M", 0), obj.get("N", 0))


@dataclass(frozen=True, eq=False)
class Potential:
    """Real values V(n) for start <= n < start + len(values)."""

    values: np.ndarray
    start: int = 0

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def stop(self) -> int:
        return self.start + len(self)

    def __call__(self, n):
        n = np.asarray(n)
        if (n < self.start).any() or (n >= self.stop).any():
            raise IndexError(f"index outside potential support [{self.start}, {self.stop})")
        return self.values[n - self.start]

    def segment(self, a: int, b: int) -> np.ndarray:
        """V(a), ..., V(b) inclusive."""
        if a < self.start or b >= self.stop or b < a - 1:
            raise IndexError(f"[{a}, {b}] outside potential support [{self.start}, {self.stop})")
        return self.values[a - self.start:b - self.start + 1]

    @property
    def value_set(self) -> tuple[float, ...]:
        return tuple(float(x) for x in np.unique(self.values))

    @property
    def sup_norm(self) -> float:
        return float(np.abs(self.values).max()) if len(self) else 0.0

    @classmethod
    def constant(cls, value: float, start: int, stop: int) -> "Potential":
        return cls(np.full(stop - start, float(value)), start)


def sample_values(window: Window, f: SamplingFunction, start: int, stop: int) -> np.ndarray:
    """h(s[n-M .. n+N]) for start <= n < stop; complex if any table value is."""
    lo, hi = start - f.M, stop - 1 + f.N
    if lo < window.start or hi >= window.stop:
        raise WindowTooShortError(len(window), hi - lo + 1,
                                  f"sampling on [{start}, {stop}) with M={f.M}, N={f.N}")
    labels = window.labels()[lo - window.start:hi - window.start + 1]
    alph = np.asarray(f.alphabet, dtype=np.int64)
    order = np.argsort(alph)
    pos = np.minimum(np.searchsorted(alph[order], labels), alph.size - 1)
    if (alph[order][pos] != labels).any():
        raise SamplingError("window contains symbols outside the sampling alphabet")
    idx = order[pos]
    base = alph.size
    width = f.width
    n = stop - start
    key = np.zeros(n, dtype=np.int64)
    for j in range(width):
        key = key * base + idx[j:j + n]
    dtype = complex if any(isinstance(v, complex) for v in f.table.values()) else float
    lut = np.empty(base ** width, dtype=dtype)
    for i, w in enumerate(itertools.product(range(base), repeat=width)):
        lut[i] = f.table[tuple(int(alph[c]) for c in w)]
    return lut[key]


def potential_from_sampling(window: Window, f: SamplingFunction, start: int, stop: int) -> Potential:
    """V(n) = h(s[n-M .. n+N]) for start <= n < stop."""
    vals = sample_values(window, f, start, stop)
    if np.iscomplexobj(vals):
        raise SamplingError("Schrodinger potentials must be real")
    return Potential(vals, start)


@numba.njit(cache=True)
def _products(vals, energies, every):
    """Rescaled products A(b)...A(a) for each energy; returns (mats, logscale)."""
    K = energies.size
    mats = np.empty((K, 2, 2), dtype=energies.dtype)
    logs = np.zeros(K)
    for k in range(K):
        E = energies[k]
        a, b, c, d = E * 0 + 1, E * 0, E * 0, E * 0 + 1
        ls = 0.0
        for n in range(vals.size):
            t = E - vals[n]
            a, b, c, d = t * a - c, t * b - d, a, b
            if (n + 1) % every == 0:
                s = max(max(abs(a), abs(b)), max(abs(c), abs(d)))
                if s > 1e8 or s < 1e-8:
                    a, b, c, d = a / s, b / s, c / s, d / s
                    ls += math.log(s)
        mats[k, 0, 0] = a
        mats[k, 0, 1] = b
        mats[k, 1, 0] = c
        mats[k, 1, 1] = d
        logs[k] = ls
    return mats, logs


@numba.njit(cache=True)
def _prefix_lognorms(vals, E, every):
    """log ||A(n) ... A(0)|| after each step, for one energy."""
    out = np.empty(vals.size)
    a, b, c, d = E * 0 + 1, E * 0, E * 0, E * 0 + 1
    ls = 0.0
    for n in range(vals.size):
        t = E - vals[n]
        a, b, c, d = t * a - c, t * b - d, a, b
        S = abs(a) ** 2 + abs(b) ** 2 + abs(c) ** 2 + abs(d) ** 2
        det = abs(a * d - b * c)
        disc = max(S * S - 4 * det * det, 0.0)
        out[n] = 0.5 * math.log(0.5 * (S + math.sqrt(disc))) + ls
        if (n + 1) % every == 0:
            s = max(max(abs(a), abs(b)), max(abs(c), abs(d)))
            if s > 1e8 or s < 1e-8:
                a, b, c, d = a / s, b / s, c / s, d / s
                ls += math.log(s)
    return out


def spectral_norm(m: np.ndarray) -> np.ndarray:
    """Largest singular value of 2x2 matrices (..., 2, 2) in closed form."""
    m = np.asarray(m)
    S = np.sum(np.abs(m) ** 2, axis=(-2, -1))
    det = np.abs(m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0])
    disc = np.sqrt(np.maximum(S * S - 4 * det * det, 0.0))
    return np.sqrt(0.5 * (S + disc))


def _energy_array(E):
    arr = np.atleast_1d(np.asarray(E))
    if np.iscomplexobj(arr):
        return arr.astype(np.complex128)
    return arr.astype(np.float64)


@dataclass(frozen=True, eq=False)
class TransferProduct:
    """A = exp(log_scale) * matrix, with the determinant certificate."""

    matrix: np.ndarray
    log_scale: float
    a: int
    b: int
    energy: complex

    @property
    def log_norm(self) -> float:
        return float(np.log(spectral_norm(self.matrix))) + self.log_scale

    @property
    def det_error(self) -> float:
        """|det A - 1| relative to ||A||^2."""
        m = self.matrix
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        nrm2 = spectral_norm(m) ** 2
        ls2 = 2 * self.log_scale
        if ls2 > 700:
            return float(abs(det) / nrm2)
        return float(abs(det - math.exp(-ls2)) / nrm2)

    @property
    def half_trace(self):
        if self.log_scale > 700:
            return math.inf
        t = 0.5 * (self.matrix[0, 0] + self.matrix[1, 1]) * math.exp(self.log_scale)
        return t

    def full(self) -> np.ndarray:
        """Unscaled matrix; may overflow to inf for huge products."""
        return self.matrix * math.exp(self.log_scale)


def transfer_products(V: Potential, energies, a: int, b: int) -> tuple[np.ndarray, np.ndarray]:
    """Rescaled products A(b) ... A(a) for an array of energies: (matrices, log scales)."""
    seg = V.segment(a, b)
    return _products(np.ascontiguousarray(seg), _energy_array(energies), RESCALE_EVERY)


def transfer_product(V: Potential, E, a: int, b: int, check_det: bool = True) -> TransferProduct:
    """Ordered product A(b) ... A(a) over the sites a..b inclusive."""
    mats, logs = transfer_products(V, E, a, b)
    E_out = complex(E) if np.iscomplexobj(np.asarray(E)) else float(E)
    tp = TransferProduct(mats[0], float(logs[0]), a, b, E_out)
    if check_det and tp.det_error > 1e-10:
        raise ArithmeticError(f"determinant certificate failed: {tp.det_error:.2e}")
    return tp


def prefix_log_norms(V: Potential, E, a: int, b: int) -> np.ndarray:
    """log ||A(m) ... A(a)|| for m = a..b."""
    seg = np.ascontiguousarray(V.segment(a, b))
    Ev = _energy_array(E)[0]
    return _prefix_lognorms(seg, Ev, RESCALE_EVERY)


def one_step(v: float, E) -> np.ndarray:
    return np.array([[E - v, -1.0], [1.0, 0.0]], dtype=np.result_type(E, float))


def cocycle(V: Potential, E, n: int) -> np.ndarray:
    """The matrix taking U(0) to U(n), for positive or negative n (unscaled)."""
    if n == 0:
        return np.eye(2, dtype=np.result_type(E, float))
    if n > 0:
        return transfer_product(V, E, 0, n - 1, check_det=False).full()
    # U(0) = A(-1) ... A(n) U(n)
    fwd = transfer_product(V, E, n, -1, check_det=False).full()
    return np.array([[fwd[1, 1], -fwd[0, 1]], [-fwd[1, 0], fwd[0, 0]]])


@numba.njit(cache=True)
def _solve(vals, E, u0, um1, us):
    n = vals.size
    logsc = np.zeros(n + 1)
    cur, prev = u0, um1
    ls = 0.0
    us[0] = cur
    for i in range(n):
        nxt = (E - vals[i]) * cur - prev
        prev, cur = cur, nxt
        s = max(abs(cur), abs(prev))
        if s > 1e100:
            cur, prev = cur / s, prev / s
            ls += math.log(s)
        us[i + 1] = cur
        logsc[i + 1] = ls
    return us, logsc


@dataclass(frozen=True, eq=False)
class SolutionProfile:
    """u(n) for n = 0..L as scaled values times exp(log_scale[n])."""

    n: np.ndarray
    u_scaled: np.ndarray
    log_scale: np.ndarray
    log_cumulative: np.ndarray     # log (sum_{m=1}^{n} |u(m)|^2)^{1/2}, n >= 1
    gamma: float                   # least-squares slope of log_cumulative vs log L
    gamma1: float                  # smallest local slope over dyadic blocks
    gamma2: float                  # largest local slope over dyadic blocks
    residual: float                # rms residual of the power-law fit
    power_law: bool                # False when the fit is poor (e.g. exponential growth)

    @property
    def u(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return self.u_scaled * np.exp(self.log_scale)

    @property
    def log_abs_u(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.u_scaled)) + self.log_scale


def solve_equation(V: Potential, E, U0: Sequence, L: int,
                   fit_from: int = 8, residual_limit: float = 0.1) -> SolutionProfile:
    """Solve u(n+1) + u(n-1) + V(n) u(n) = E u(n) for n = 0..L-1 from U(0) = (u(0), u(-1)).

    U0 must be normalized. The cumulative norm is fitted by a power law
    C L^gamma; gamma1 and gamma2 are the extreme slopes between dyadic scales.
    """
    u0, um1 = U0
    if abs(math.hypot(abs(u0), abs(um1)) - 1) > 1e-12:
        raise ValueError("U(0) must be normalized: |u(0)|^2 + |u(-1)|^2 = 1")
    vals = np.ascontiguousarray(V.segment(0, L - 1))
    cplx = np.iscomplexobj(np.asarray(E)) or isinstance(u0, complex) or isinstance(um1, complex)
    Ev = complex(E) if cplx else float(E)
    us = np.empty(L + 1, dtype=complex if cplx else float)
    if cplx:
        us, logsc = _solve(vals.astype(complex), Ev, complex(u0), complex(um1), us)
    else:
        us, logsc = _solve(vals, Ev, float(u0), float(um1), us)
    with np.errstate(divide="ignore"):
        la = 2 * (np.log(np.abs(us[1:])) + logsc[1:])
    logcum = 0.5 * np.logaddexp.accumulate(la)
    ns = np.arange(1, L + 1)
    sel = np.unique(np.geomspace(max(fit_from, 1), L, num=min(64, L)).astype(int))
    sel = sel[np.isfinite(logcum[sel - 1])]
    x, y = np.log(sel), logcum[sel - 1]
    if sel.size >= 2:
        A = np.column_stack([x, np.ones_like(x)])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        res = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
        gamma = float(coef[0])
        scales = [2 ** j for j in range(int(math.log2(max(fit_from, 1))), int(math.log2(L)) + 1)]
        slopes = [(logcum[2 * s - 1] - logcum[s - 1]) / math.log(2)
                  for s in scales if 2 * s <= L and np.isfinite(logcum[s - 1])]
        g1 = float(min(slopes)) if slopes else gamma
        g2 = float(max(slopes)) if slopes else gamma
    else:
        gamma = g1 = g2 = float("nan")
        res = float("inf")
    return SolutionProfile(np.arange(0, L + 1), us, logsc, logcum, gamma, g1, g2, res,
                           res <= residual_limit)


def propagate(V: Potential, E, U: Sequence, a: int, b: int) -> np.ndarray:
    """Move U(a) = (u(a), u(a-1)) to U(b) step by step, forwards or backwards."""
    cur, prev = U
    if b >= a:
        for n in range(a, b):
            cur, prev = (E - V(n)) * cur - prev, cur
    else:
        for n in range(a - 1, b - 1, -1):
            # u(n-1) = (E - V(n)) u(n) - u(n+1)
            cur, prev = prev, (E - V(n)) * prev - cur
    return np.array([cur, prev])


def _check_repetition(V: Potential, p: int, lo: int, hi: int) -> None:
    """V(m + p) = V(m) for lo <= m <= hi, else RepetitionError at the first failure."""
    if lo < V.start or hi + p >= V.stop:
        raise WindowTooShortError(len(V), hi + p - lo + 1, f"repetition check with p={p}")
    a = V.segment(lo, hi)
    b = V.segment(lo + p, hi + p)
    bad = np.flatnonzero(a != b)
    if bad.size:
        raise RepetitionError(int(lo + bad[0]), p)


@dataclass(frozen=True)
class GordonRecord:
    p: int
    lhs: float
    bound: float
    satisfied: bool
    half_trace: float


def _unit(U0) -> np.ndarray:
    U = np.asarray(U0, dtype=complex if np.iscomplexobj(np.asarray(U0)) else float)
    return U


def gordon_two_block(V: Potential, p: int, E, U0) -> GordonRecord:
    """max(||U(2p)||, ||U(p)||) >= ||U(0)|| / (2 max(|Tr A_p|, 1)) under V(m+p) = V(m), 0 <= m < p."""
    _check_repetition(V, p, 0, p - 1)
    U = _unit(U0)
    Ap = cocycle(V, E, p)
    A2p = cocycle(V, E, 2 * p)
    tr = Ap[0, 0] + Ap[1, 1]
    lhs = max(np.linalg.norm(A2p @ U), np.linalg.norm(Ap @ U))
    bound = np.linalg.norm(U) / (2 * max(abs(tr), 1.0))
    return GordonRecord(p, float(lhs), float(bound), bool(lhs >= bound * (1 - 1e-12)),
                        float(np.real(tr) / 2) if np.isrealobj(tr) else complex(tr / 2))


def gordon_three_block(V: Potential, p: int, E, U0) -> GordonRecord:
    """max(||U(2p)||, ||U(p)||, ||U(-p)||) >= ||U(0)|| / 2 under V(m+p) = V(m), -p <= m < p."""
    _check_repetition(V, p, -p, p - 1)
    U = _unit(U0)
    Ap = cocycle(V, E, p)
    A2p = cocycle(V, E, 2 * p)
    Am = cocycle(V, E, -p)
    tr = Ap[0, 0] + Ap[1, 1]
    lhs = max(np.linalg.norm(A2p @ U), np.linalg.norm(Ap @ U), np.linalg.norm(Am @ U))
    bound = 0.5 * np.linalg.norm(U)
    return GordonRecord(p, float(lhs), float(bound), bool(lhs >= bound * (1 - 1e-12)),
                        float(np.real(tr) / 2) if np.isrealobj(tr) else complex(tr / 2))


@dataclass(frozen=True)
class SquarePeriods:
    two_block: tuple[int, ...]     # V(m+p) = V(m) on [0, p-1]
    three_block: tuple[int, ...]   # V(m+p) = V(m) on [-p, p-1]


def find_square_periods(seq, p_max: int, origin: int = 0) -> SquarePeriods:
    """Scan p = 1..p_max for repetitions aligned at ``origin``.

    ``seq`` is a Window or a Potential; only p whose test range fits inside
    it are examined.
    """
    if isinstance(seq, Window):
        arr, start = seq.codes, seq.start
    else:
        arr, start = seq.values, seq.start
    o = origin - start
    two, three = [], []
    for p in range(1, p_max + 1):
        if o >= 0 and o + 2 * p <= arr.size and np.array_equal(arr[o:o + p], arr[o + p:o + 2 * p]):
            two.append(p)
            if o - p >= 0 and np.array_equal(arr[o - p:o], arr[o:o + p]):
                three.append(p)
    return SquarePeriods(tuple(two), tuple(three))
