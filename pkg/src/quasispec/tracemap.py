"""Trace maps for Fibonacci and Sturmian Hamiltonians.

Half-traces x_k = Tr(M_k)/2 of the block transfer matrices
M_{-1} = [[1, -lam], [0, 1]], M_0 = [[E, -1], [1, 0]] and
M_{k+1} = M_{k-1} M_k^{a_{k+1}}. For a_k = 1 this is the Fibonacci map
x_{k+2} = 2 x_{k+1} x_k - x_{k-1} with invariant 1 + lam^2 / 4.

Orbits are computed in high precision while |x_k| <= EXACT_LIMIT; after that
they continue at low precision with unbounded exponent, which is enough to
follow the growth but too coarse to evaluate the invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy.linalg import eig_banded

from .generators import ContinuedFraction, standard_words
from .intervals import IntervalSet

EXACT_LIMIT = 1e100
EXACT_BITS = 1024
LOG_BITS = 64


def _mp(E):
    return mpmath.mpc(E) if isinstance(E, complex) or np.iscomplexobj(E) else mpmath.mpf(E)


def _to_num(x):
    """Python float/complex for representable values, else nan."""
    if abs(x) > 1e300:
        return complex("nan") if isinstance(x, mpmath.mpc) else math.nan
    return complex(x) if isinstance(x, mpmath.mpc) else float(x)


TERM_LIMIT = 1e250


def _invariant(xp, x, xm):
    """x+^2 + x^2 + x-^2 - 2 x+ x x-, or None when the terms are too large to cancel reliably."""
    big = max(abs(xp) ** 2, abs(x) ** 2, abs(xm) ** 2, 2 * abs(xp * x * xm))
    if big > TERM_LIMIT:
        return None
    return xp * xp + x * x + xm * xm - 2 * xp * x * xm


@dataclass(frozen=True, eq=False)
class TraceOrbit:
    """x_k for k = -1..K; entries ``exact`` were computed at full precision."""

    lam: float
    energy: complex | float
    x: tuple                    # mpmath numbers x_{-1}, x_0, ..., x_K
    exact: np.ndarray           # bool per entry
    invariant: np.ndarray       # I at pairs (k-1, k, k+1) for k = 0..K-1; nan when not evaluable
    escape_index: int | None
    recursion_residual: float   # largest relative defect of the recursion
    metadata: dict = field(default_factory=dict)
    invariant_error: np.ndarray | None = None   # I_k - (1 + lam^2/4) taken before rounding

    @property
    def k_max(self) -> int:
        return len(self.x) - 2

    def value(self, k: int):
        return _to_num(self.x[k + 1])

    @property
    def values(self) -> np.ndarray:
        return np.array([_to_num(v) for v in self.x])

    @property
    def log_abs(self) -> np.ndarray:
        return np.array([float(mpmath.log(abs(v))) if v != 0 else -math.inf for v in self.x])

    @property
    def expected_invariant(self) -> float:
        return 1 + self.lam ** 2 / 4

    @property
    def invariant_deviation(self) -> float:
        """max |I_k - (1 + lam^2/4)| over the evaluated k; nan if none."""
        if self.invariant_error is not None:
            dev = np.abs(self.invariant_error)
        else:
            dev = np.abs(self.invariant - self.expected_invariant)
        dev = dev[np.isfinite(dev)]
        return float(dev.max()) if dev.size else math.nan

    def rows(self) -> list[tuple]:
        """(k, Re x_k, Im x_k, log-scale flag) with exact decimal strings."""
        out = []
        for i, v in enumerate(self.x):
            re = mpmath.re(v)
            im = mpmath.im(v)
            out.append((i - 1, mpmath.nstr(re, 17), mpmath.nstr(im, 17), int(not self.exact[i])))
        return out


def _escape_index(x) -> int | None:
    """First k0 >= 0 with |x_{k0-1}| <= 1 < |x_{k0}|, |x_{k0+1}| (list index = k + 1)."""
    mags = [abs(v) for v in x]
    for i in range(1, len(mags) - 1):
        if mags[i - 1] <= 1 < mags[i] and mags[i + 1] > 1:
            return i - 1
    return None


def fib_orbit(lam: float, E, k_max: int, exact_limit: float = EXACT_LIMIT) -> TraceOrbit:
    """Fibonacci trace-map orbit from (x_{-1}, x_0, x_1) = (1, E/2, (E - lam)/2)."""
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    cplx = isinstance(E, complex)
    xs = []
    exact = []
    prec = EXACT_BITS
    with mpmath.workprec(EXACT_BITS):
        Em = _mp(E)
        lm = mpmath.mpf(lam)
        xs = [mpmath.mpf(1) if not cplx else mpmath.mpc(1), Em / 2, (Em - lm) / 2]
    exact = [True, True, True]
    worst = 0.0
    for _ in range(k_max - 1):
        if prec == EXACT_BITS and max(abs(xs[-1]), abs(xs[-2])) > exact_limit:
            prec = LOG_BITS
        with mpmath.workprec(prec):
            a, b, c = xs[-1], xs[-2], xs[-3]
            prod = 2 * a * b
            nxt = prod - c
            scale = max(abs(prod), abs(c), abs(nxt))
            if scale:
                worst = max(worst, float(abs(nxt - (prod - c)) / scale))
        xs.append(nxt)
        exact.append(prec == EXACT_BITS)
    inv = np.full(len(xs) - 2, math.nan, dtype=complex if cplx else float)
    err = inv.copy()
    conv = complex if cplx else float
    with mpmath.workprec(EXACT_BITS):
        target = 1 + mpmath.mpf(lam) ** 2 / 4
        for i in range(1, len(xs) - 1):
            if exact[i - 1] and exact[i] and exact[i + 1] and abs(xs[i + 1]) <= exact_limit:
                v = _invariant(xs[i + 1], xs[i], xs[i - 1])
                if v is not None:
                    inv[i - 1], err[i - 1] = conv(v), conv(v - target)
    k0 = None if cplx else _escape_index(xs)
    return TraceOrbit(float(lam), E, tuple(xs), np.array(exact), inv, k0, worst,
                      {"exact_limit": exact_limit, "exact_bits": EXACT_BITS}, err)


@dataclass(frozen=True)
class EscapeReport:
    escaped: bool
    k0: int | None
    unique: bool
    growth_ok: bool             # |x_{k+2}| > |x_{k+1} x_k| > 1 for all stored k >= k0
    fitted_C: float | None      # min over k >= k0 of |x_k|^(1/F_{k-k0})
    bound_ok: bool | None       # bounded prefix stays within 1 + lam/2
    applied_assumption: bool = False


def _fib(n: int) -> int:
    a, b = 1, 1
    for _ in range(n):
        a, b = b, a + b
    return a


def escape_classify(orbit: TraceOrbit) -> EscapeReport:
    """Escaped(k0) with a doubly-exponential growth certificate, or bounded so far."""
    xs = orbit.x
    if len(xs) < 3:
        raise ValueError("orbit too short")
    assumption = bool(orbit.metadata.get("applied_assumption", False))
    k0 = _escape_index(xs)
    if k0 is None:
        bound = 1 + orbit.lam / 2
        ok = all(abs(v) <= bound + 1e-12 for v in xs)
        return EscapeReport(False, None, True, False, None, ok, assumption)
    mags = [abs(v) for v in xs]
    others = [i - 1 for i in range(1, len(mags) - 1)
              if mags[i - 1] <= 1 < mags[i] and mags[i + 1] > 1]
    unique = others == [k0]
    i0 = k0 + 1
    growth = all(mags[i + 2] > mags[i + 1] * mags[i] > 1 for i in range(i0, len(mags) - 2))
    logs = [float(mpmath.log(mags[i])) / _fib(i - i0) for i in range(i0, len(mags))]
    C = math.exp(min(logs))
    return EscapeReport(True, k0, unique, growth, C, None, assumption)


def b_infty_member(lam: float, E: float, k_max: int) -> bool:
    """|x_k| <= 1 + lam/2 for every k <= k_max."""
    orb = fib_orbit(lam, E, k_max)
    bound = 1 + lam / 2
    return all(abs(v) <= bound for v in orb.x)


def fib_traces(lam: float, energies, k_max: int) -> np.ndarray:
    """Float half-traces x_{-1}..x_{k_max} for many energies, shape (k_max + 2, n)."""
    E = np.asarray(energies)
    dt = np.complex128 if np.iscomplexobj(E) else np.float64
    out = np.empty((k_max + 2,) + E.shape, dtype=dt)
    out[0] = 1
    out[1] = E / 2
    if k_max >= 1:
        out[2] = (E - lam) / 2
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(3, k_max + 2):
            out[k] = 2 * out[k - 1] * out[k - 2] - out[k - 3]
    return out


def b_infty_scan(lam: float, energies, k_max: int) -> np.ndarray:
    """Vectorized membership test; an orbit leaving the bound never returns."""
    x = fib_traces(lam, energies, k_max)
    with np.errstate(invalid="ignore"):
        ok = np.abs(x) <= 1 + lam / 2
    return ok.all(axis=0)


def _floquet_edges(potential: np.ndarray) -> np.ndarray:
    """Sorted periodic and antiperiodic eigenvalues of the period-q operator."""
    q = potential.size
    if q == 1:
        v = float(potential[0])
        return np.array([v - 2.0, v + 2.0])
    if q == 2:
        per = np.array([[potential[0], 2.0], [2.0, potential[1]]])
        anti = np.diag(potential.astype(float))
        return np.sort(np.concatenate([np.linalg.eigvalsh(per), np.linalg.eigvalsh(anti)]))
    # Interleaving the sites as 0, q-1, 1, q-2, ... turns the cyclic matrix into a
    # pentadiagonal one, so a banded solver applies.
    order = np.empty(q, dtype=np.int64)
    order[0::2] = np.arange((q + 1) // 2)
    order[1::2] = q - 1 - np.arange(q // 2)
    pos = np.empty(q, dtype=np.int64)
    pos[order] = np.arange(q)
    out = []
    for corner in (1.0, -1.0):
        band = np.zeros((3, q))
        band[0] = potential[order]
        for i in range(q - 1):
            a, b = sorted((pos[i], pos[i + 1]))
            band[b - a, a] = 1.0
        a, b = sorted((pos[0], pos[q - 1]))
        band[b - a, a] += corner
        out.append(eig_banded(band, lower=True, eigvals_only=True))
    return np.sort(np.concatenate(out))


def block_half_traces(potential: np.ndarray, energies) -> np.ndarray:
    """Tr(A(q) ... A(1)) / 2 for one period of a potential, vectorized over energies."""
    E = np.asarray(energies, dtype=float)
    a = np.ones_like(E)
    b = np.zeros_like(E)
    c = np.zeros_like(E)
    d = np.ones_like(E)
    for v in potential:
        t = E - v
        a, b, c, d = t * a - c, t * b - d, a, b
    return 0.5 * (a + d)


@dataclass(frozen=True, eq=False)
class BandSet:
    """sigma_k = {E : |x_k(E)| <= 1} as closed bands."""

    k: int
    lam: float
    bands: IntervalSet
    period: int
    certified: np.ndarray       # per band: both endpoints bracket a sign change of |x_k| - 1
    resolution: float

    @property
    def all_certified(self) -> bool:
        return bool(self.certified.all())

    @property
    def measure(self) -> float:
        return self.bands.measure


def sigma_k(lam: float, k: int, resolution: float = 1e-10,
            cf: ContinuedFraction | None = None, merge_tol: float = 1e-12) -> BandSet:
    """Band set of the period-q_k approximant with potential lam * w_k.

    Band edges are the periodic/antiperiodic eigenvalues; each edge is then
    certified by |x_k| <= 1 just inside and > 1 at distance ``resolution``
    outside (unless the neighbouring gap is closed).
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    if cf is None:
        cf = ContinuedFraction.from_coefficients([1] * max(k + 1, 2))
    if k == -1:
        raise ValueError("sigma_{-1} is not a band set")
    w = np.array(standard_words(cf, k)[k], dtype=float) if k >= 1 else np.array([0.0])
    pot = lam * w
    e = _floquet_edges(pot)
    raw = e.reshape(-1, 2)
    bands = IntervalSet(raw, merge_gap=merge_tol)
    if len(bands) > pot.size:
        raise ArithmeticError(f"{len(bands)} bands exceed the period {pot.size}")
    B = bands.bounds
    inside = block_half_traces(pot, 0.5 * (B[:, 0] + B[:, 1]))
    left = block_half_traces(pot, B[:, 0] - resolution)
    right = block_half_traces(pot, B[:, 1] + resolution)
    cert = (np.abs(inside) <= 1 + 1e-12) & (np.abs(left) > 1) & (np.abs(right) > 1)
    return BandSet(k, float(lam), bands, int(pot.size), cert, float(resolution))


@dataclass(frozen=True, eq=False)
class SturmianTraceOrbit:
    lam: float
    coefficients: tuple[int, ...]
    energy: complex | float
    x: tuple                    # x_{-1}, ..., x_K
    invariant: np.ndarray       # Fricke invariant of (M_{k-1}, M_k), k = 0..K; nan past EXACT_LIMIT
    escape_index: int | None
    metadata: dict = field(default_factory=dict)
    invariant_error: np.ndarray | None = None

    def value(self, k: int):
        return _to_num(self.x[k + 1])

    @property
    def values(self) -> np.ndarray:
        return np.array([_to_num(v) for v in self.x])

    @property
    def invariant_deviation(self) -> float:
        if self.invariant_error is not None:
            dev = np.abs(self.invariant_error)
        else:
            dev = np.abs(self.invariant - (1 + self.lam ** 2 / 4))
        dev = dev[np.isfinite(dev)]
        return float(dev.max()) if dev.size else math.nan


def _entry_max(M):
    return max(abs(M[i, j]) for i in range(2) for j in range(2))


def _mat_power(M, a: int):
    """M^a = U_{a-1}(x) M - U_{a-2}(x) I with x = Tr(M)/2 (Chebyshev, second kind)."""
    x = (M[0, 0] + M[1, 1]) / 2
    u_prev, u = 0, 1          # U_{-1}, U_0
    for _ in range(a - 1):
        u_prev, u = u, 2 * x * u - u_prev
    I = mpmath.eye(2)
    return u * M - u_prev * I


def sturmian_orbit(lam: float, cf: ContinuedFraction, E, k_max: int,
                   exact_limit: float = EXACT_LIMIT) -> SturmianTraceOrbit:
    """Half-traces of M_{k+1} = M_{k-1} M_k^{a_{k+1}} for k = -1..k_max."""
    if cf.depth < k_max:
        raise ValueError(f"continued fraction depth {cf.depth} < k_max {k_max}")
    prec = EXACT_BITS
    with mpmath.workprec(prec):
        Em = _mp(E)
        lm = mpmath.mpf(lam)
        Mm = mpmath.matrix([[1, -lm], [0, 1]])
        M0 = mpmath.matrix([[Em, -1], [1, 0]])
    mats = [Mm, M0]
    exact = [True, True]
    for k in range(0, k_max):
        if prec == EXACT_BITS and max(_entry_max(mats[-1]), _entry_max(mats[-2])) > exact_limit:
            prec = LOG_BITS
        with mpmath.workprec(prec):
            nxt = mats[-2] * _mat_power(mats[-1], cf.a(k + 1))
        mats.append(nxt)
        exact.append(prec == EXACT_BITS)
    with mpmath.workprec(EXACT_BITS):
        xs = tuple((M[0, 0] + M[1, 1]) / 2 for M in mats)
    inv = np.full(len(mats) - 1, math.nan, dtype=complex if isinstance(E, complex) else float)
    err = inv.copy()
    conv = complex if isinstance(E, complex) else float
    with mpmath.workprec(EXACT_BITS):
        target = 1 + mpmath.mpf(lam) ** 2 / 4
        for i in range(1, len(mats)):
            if exact[i] and exact[i - 1]:
                A, B = mats[i - 1], mats[i]
                z = (A * B)[0, 0] + (A * B)[1, 1]
                if max(_entry_max(A), _entry_max(B)) <= exact_limit:
                    v = _invariant(z / 2, xs[i], xs[i - 1])
                    if v is not None:
                        inv[i - 1], err[i - 1] = conv(v), conv(v - target)
    k0 = None if isinstance(E, complex) else _escape_index(xs)
    return SturmianTraceOrbit(float(lam), cf.coefficients[:k_max], E, xs, inv, k0,
                              {"applied_assumption": True, "exact_limit": exact_limit}, err)


def complex_escape_time(lam: float, z, k_max: int) -> int | None:
    """First k >= 0 with |x_k(z)| > 1 and |x_{k+1}(z)| > 1, or None up to k_max."""
    with mpmath.workprec(LOG_BITS * 2):
        zm = mpmath.mpc(z)
        xs = [mpmath.mpc(1), zm / 2, (zm - lam) / 2]
        for k in range(0, k_max + 1):
            while len(xs) < k + 3:
                xs.append(2 * xs[-1] * xs[-2] - xs[-3])
            if abs(xs[k + 1]) > 1 and abs(xs[k + 2]) > 1:
                return k
    return None


def complex_escape_times(lam: float, zs, k_max: int) -> np.ndarray:
    """Vectorized escape times; -1 where no escape is seen by k_max."""
    x = fib_traces(lam, np.asarray(zs, dtype=complex), k_max + 1)
    with np.errstate(invalid="ignore"):
        big = ~(np.abs(x) <= 1)          # nan (overflow) counts as outside
    both = big[1:-1] & big[2:]
    hit = both.any(axis=0)
    first = np.argmax(both, axis=0)
    return np.where(hit, first, -1)
