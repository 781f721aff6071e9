"""CMV and extended CMV matrices from Verblunsky coefficients sampled along a subshift.

Conventions: rho_n = sqrt(1 - |alpha_n|^2) and C = L M where L collects the
blocks Theta_j = [[conj(alpha_j), rho_j], [rho_j, -alpha_j]] on (j, j+1) for
even j and M those for odd j. The first row of the half-line matrix is then
conj(alpha_0), conj(alpha_1) rho_0, rho_1 rho_0, 0, ...
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import SamplingError
from .generators import SturmianParams, quadratic_theta, sturmian_window
from .intervals import IntervalSet
from .schrodinger import SamplingFunction, sample_values
from .words import Window

UNITARITY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class VerblunskyCoefficients:
    """alpha_n for start <= n < start + len(alpha), all strictly inside the unit disk."""

    alpha: np.ndarray
    start: int = 0

    def __post_init__(self):
        a = np.ascontiguousarray(self.alpha, dtype=complex)
        if a.ndim != 1:
            raise ValueError("coefficients must be one-dimensional")
        bad = np.flatnonzero(np.abs(a) >= 1)
        if bad.size:
            n = int(bad[0]) + self.start
            raise SamplingError(f"|alpha_{n}| = {abs(a[bad[0]])} is not < 1")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    def __len__(self) -> int:
        return self.alpha.size

    @property
    def stop(self) -> int:
        return self.start + self.alpha.size

    @property
    def rho(self) -> np.ndarray:
        return np.sqrt(1 - np.abs(self.alpha) ** 2)

    @property
    def consistency_error(self) -> float:
        """max | |alpha|^2 + rho^2 - 1 |."""
        if not len(self):
            return 0.0
        return float(np.max(np.abs(np.abs(self.alpha) ** 2 + self.rho ** 2 - 1)))

    def __call__(self, n: int) -> complex:
        if not self.start <= n < self.stop:
            raise IndexError(f"alpha_{n} outside [{self.start}, {self.stop})")
        return complex(self.alpha[n - self.start])


def verblunsky_from_subshift(window: Window, f: SamplingFunction,
                             start: int | None = None, stop: int | None = None) -> VerblunskyCoefficients:
    """alpha_n = f(T^n omega) along the window; the offending word is named if |f| >= 1."""
    bad = [w for w, v in f.table.items() if abs(v) >= 1]
    if bad:
        raise SamplingError(f"sampling value {f.table[bad[0]]} on word {bad[0]} is not inside the unit disk")
    lo = window.start + f.M if start is None else start
    hi = window.stop - f.N if stop is None else stop
    return VerblunskyCoefficients(sample_values(window, f, lo, hi), lo)


@dataclass(frozen=True, eq=False)
class CMVMatrix:
    matrix: np.ndarray
    first: int                  # coefficient index of the first row
    variant: str                # "half-line" or "extended"
    closure: complex
    unitarity_error: float      # ||C* C - I||_max

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def certified(self) -> bool:
        return self.unitarity_error < UNITARITY_TOL

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.matrix)

    def eigenphases(self) -> np.ndarray:
        """Sorted arguments in [0, 2 pi)."""
        return np.sort(np.mod(np.angle(self.eigenvalues()), 2 * math.pi))

    def bandwidth(self) -> int:
        nz = np.argwhere(np.abs(self.matrix) > 0)
        return int(np.max(np.abs(nz[:, 0] - nz[:, 1]))) if nz.size else 0


def _theta_factor(size: int, first: int, coef: Callable[[int], complex], parity: int,
                  left: complex | None, right: complex) -> np.ndarray:
    """Direct sum of the 2x2 blocks Theta_j with j = parity mod 2 on rows first..first+size-1.

    A block cut by the left edge contributes -c at the corner (rho = 0 for the
    closure value c); one cut by the right edge contributes conj(c).
    """
    F = np.zeros((size, size), dtype=complex)
    j = first - 1 if (first - 1) % 2 == parity % 2 else first
    while j < first + size:
        i = j - first
        if i < 0:
            F[0, 0] = 1.0 if left is None else -left
        elif i == size - 1:
            F[i, i] = np.conj(right)
        else:
            a = coef(j)
            r = math.sqrt(max(0.0, 1 - abs(a) ** 2))
            F[i, i], F[i, i + 1] = np.conj(a), r
            F[i + 1, i], F[i + 1, i + 1] = r, -a
        j += 2
    return F


def _build(alpha: VerblunskyCoefficients, first: int, size: int, variant: str,
           left: complex | None, closure: complex) -> CMVMatrix:
    if size < 1:
        raise ValueError("size must be positive")
    if abs(abs(closure) - 1) > 1e-14 or (left is not None and abs(abs(left) - 1) > 1e-14):
        raise ValueError("closure values must have modulus 1")
    need_lo, need_hi = first, first + size - 1
    if need_lo < alpha.start or need_hi > alpha.stop:
        raise ValueError(f"size {size} at index {first} needs alpha on [{need_lo}, {need_hi}),"
                         f" have [{alpha.start}, {alpha.stop})")
    coef = alpha.__call__
    L = _theta_factor(size, first, coef, 0, left, closure)
    M = _theta_factor(size, first, coef, 1, left, closure)
    C = L @ M
    err = float(np.max(np.abs(C.conj().T @ C - np.eye(size))))
    return CMVMatrix(C, first, variant, complex(closure), err)


def build_cmv(alpha: VerblunskyCoefficients, size: int, closure: complex = -1) -> CMVMatrix:
    """Half-line CMV matrix on alpha_0 .. alpha_{size-2}, closed by a modulus-1 last coefficient."""
    if alpha.start > 0:
        raise ValueError("half-line matrix needs alpha_0")
    return _build(alpha, 0, size, "half-line", None, closure)


def build_extended_cmv(alpha: VerblunskyCoefficients, center: int, size: int,
                       closure: complex = -1) -> CMVMatrix:
    """Section of the extended CMV matrix on indices center - size//2 .. with both edges closed."""
    first = center - size // 2
    return _build(alpha, first, size, "extended", closure, closure)


def covered_arc(phases: np.ndarray, eps: float) -> float:
    """Length of the union of arcs of radius eps around each phase on the circle of length 2 pi."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if eps >= math.pi:
        return 2 * math.pi
    p = np.mod(np.asarray(phases, dtype=float), 2 * math.pi)
    iv = np.column_stack([p - eps, p + eps])
    # unwrap arcs crossing 0 or 2 pi
    parts = [iv[(iv[:, 0] >= 0) & (iv[:, 1] <= 2 * math.pi)]]
    lo, hi = iv[iv[:, 0] < 0], iv[iv[:, 1] > 2 * math.pi]
    parts += [np.column_stack([np.zeros(len(lo)), lo[:, 1]]),
              np.column_stack([lo[:, 0] + 2 * math.pi, np.full(len(lo), 2 * math.pi)]),
              np.column_stack([hi[:, 0], np.full(len(hi), 2 * math.pi)]),
              np.column_stack([np.zeros(len(hi)), hi[:, 1] - 2 * math.pi])]
    return min(2 * math.pi, IntervalSet(np.vstack(parts)).measure)


@dataclass
class VerblunskyFamily:
    """alpha^(j)_n for phases j: a window source (phase, start, stop) and a sampling function."""

    window_for: Callable[[int, int, int], Window]
    f: SamplingFunction
    phase_count: int = 1

    def coefficients(self, phase: int, start: int, stop: int) -> VerblunskyCoefficients:
        w = self.window_for(phase, start - self.f.M, stop + self.f.N)
        return verblunsky_from_subshift(w, self.f, start, stop)


def sturmian_family(values: Sequence[complex], coefficients: Sequence[int] = (1,),
                    phase_count: int = 16) -> VerblunskyFamily:
    """alpha_n = values[s_n] on the Sturmian sequence with the given periodic expansion."""
    theta = quadratic_theta(tuple(int(a) for a in coefficients))

    def source(phase, start, stop):
        params = SturmianParams(theta, Fraction(phase % phase_count, phase_count))
        return sturmian_window(params, start, stop)

    return VerblunskyFamily(source, SamplingFunction.symbolwise(dict(enumerate(values))), phase_count)


def constant_family(alpha: complex) -> VerblunskyFamily:
    def source(phase, start, stop):
        return Window(np.zeros(stop - start, dtype=np.uint8), (0,), start)

    return VerblunskyFamily(source, SamplingFunction.symbolwise({0: alpha}), 1)


@dataclass(frozen=True, eq=False)
class CMVSpectrumApprox:
    size: int
    phases: np.ndarray = field(repr=False)      # union over phase samples, sorted
    eps: tuple[float, ...]
    covered: tuple[float, ...]                  # covered arc length per eps
    max_modulus_error: float
    max_unitarity_error: float


def cmv_spectrum_approx(family: VerblunskyFamily, size: int, phase_samples: int = 1,
                        eps: Sequence[float] | None = None, closure: complex = -1) -> CMVSpectrumApprox:
    """Eigenphase clouds of extended sections centred at 0 and their eps-cover lengths.

    The default eps ladder is (pi/size) * (1/4, 1/2, 1, 2, 4), so covers of a
    continuous arc stay comparable across sizes while isolated clusters shrink.
    """
    if size < 64:
        raise ValueError("size must be >= 64")
    if eps is None:
        eps = [math.pi / size * s for s in (0.25, 0.5, 1, 2, 4)]
    eps = tuple(float(e) for e in eps)
    first = -(size // 2)
    clouds, mod_err, uni_err = [], 0.0, 0.0
    for j in range(phase_samples):
        alpha = family.coefficients(j, first - 1, first + size + 1)
        C = build_extended_cmv(alpha, 0, size, closure)
        z = C.eigenvalues()
        mod_err = max(mod_err, float(np.max(np.abs(np.abs(z) - 1))))
        uni_err = max(uni_err, C.unitarity_error)
        clouds.append(np.mod(np.angle(z), 2 * math.pi))
    ph = np.sort(np.concatenate(clouds))
    return CMVSpectrumApprox(size, ph, eps, tuple(covered_arc(ph, e) for e in eps), mod_err, uni_err)
