"""Lyapunov exponents, zero-set scans, band approximants and box-counting dimension."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .generators import (ContinuedFraction, SturmianParams, Substitution,
                         continued_fraction, quadratic_theta, sturmian_window,
                         substitution_fixed_point)
from .intervals import IntervalSet
from .schrodinger import Potential, spectral_norm, transfer_products
from .tracemap import BandSet, sigma_k


class Model:
    """A family of potentials V_omega indexed by a phase."""

    name = "model"

    def potential_on(self, phase: int, start: int, stop: int) -> Potential:
        """Sites start..stop-1 of the phase-th member of the family."""
        raise NotImplementedError

    def potential(self, phase: int, n: int) -> Potential:
        """Sites 0..n-1 of the phase-th member of the family."""
        return self.potential_on(phase, 0, n)

    @property
    def sup_norm(self) -> float:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"name": self.name}


@dataclass
class ConstantModel(Model):
    value: float = 0.0
    name = "constant"

    def potential_on(self, phase: int, start: int, stop: int) -> Potential:
        return Potential.constant(self.value, start, stop)

    @property
    def sup_norm(self) -> float:
        return abs(self.value)

    def describe(self) -> dict:
        return {"name": self.name, "value": self.value}


@dataclass
class SturmianModel(Model):
    """V(n) = lam * s_n(theta, phi) with phases phi_j = j / phase_count (golden theta by default)."""

    lam: float
    coefficients: Sequence[int] = (1,)
    phase_count: int = 16
    variant: str = "left"
    name = "sturmian"

    def __post_init__(self):
        self.coefficients = tuple(int(a) for a in self.coefficients)
        self._theta = quadratic_theta(self.coefficients)

    @property
    def theta(self):
        return self._theta

    def continued_fraction(self, depth: int) -> ContinuedFraction:
        return continued_fraction(self._theta, depth)

    def phase(self, j: int) -> Fraction:
        return Fraction(j % self.phase_count, self.phase_count)

    def potential_on(self, phase: int, start: int, stop: int) -> Potential:
        params = SturmianParams(self._theta, self.phase(phase), self.variant)
        w = sturmian_window(params, start, stop)
        return Potential(self.lam * w.labels().astype(float), start)

    @property
    def sup_norm(self) -> float:
        return abs(self.lam)

    def describe(self) -> dict:
        return {"name": self.name, "lambda": self.lam, "coefficients": list(self.coefficients),
                "phase_count": self.phase_count, "variant": self.variant}


@dataclass
class SubstitutionModel(Model):
    """V(n) = values[s_{n + shift}] on the one-sided fixed point; phase j shifts by j * stride."""

    rules: dict
    seed: int
    values: dict
    stride: int = 997
    name = "substitution"

    def __post_init__(self):
        self._sub = Substitution(self.rules)
        self._cache = None

    def _window(self, length: int):
        if self._cache is None or len(self._cache) < length:
            self._cache = substitution_fixed_point(self._sub, self.seed, length)
        return self._cache

    def potential_on(self, phase: int, start: int, stop: int) -> Potential:
        """The one-sided fixed point read from index phase * stride, placed at ``start``."""
        shift = phase * self.stride
        n = stop - start
        w = self._window(shift + n)
        labels = w.labels()[shift:shift + n]
        keys = np.array(sorted(int(k) for k in self.values))
        vals = np.array([float(self.values[k]) for k in sorted(self.values, key=int)])
        return Potential(vals[np.searchsorted(keys, labels)], start)

    @property
    def sup_norm(self) -> float:
        return max(abs(float(v)) for v in self.values.values())

    def describe(self) -> dict:
        return {"name": self.name, "rules": {str(k): list(v) for k, v in self._sub.rules.items()},
                "seed": self.seed, "values": {str(k): v for k, v in self.values.items()},
                "stride": self.stride}


@dataclass
class BernoulliModel(Model):
    """I.i.d. potential taking -lam or +lam with probability 1/2 each; phase selects the stream."""

    lam: float
    seed: int = 0
    name = "bernoulli"

    def potential_on(self, phase: int, start: int, stop: int) -> Potential:
        rng = np.random.default_rng([self.seed, phase])
        signs = 2 * rng.integers(0, 2, size=stop - start) - 1
        return Potential(self.lam * signs.astype(float), start)

    @property
    def sup_norm(self) -> float:
        return abs(self.lam)

    def describe(self) -> dict:
        return {"name": self.name, "lambda": self.lam, "seed": self.seed}


def fibonacci_model(lam: float, phase_count: int = 16) -> SturmianModel:
    return SturmianModel(lam, (1,), phase_count)


@dataclass(frozen=True)
class LyapunovEstimate:
    energy: float
    gamma: float
    n: int
    spread: float
    per_phase: tuple[float, ...] = field(default=(), repr=False)


def lyapunov_grid(model: Model, energies, n: int, phase_samples: int = 1) -> np.ndarray:
    """(1/n) log ||A_n(E)|| for each phase (rows) and energy (columns)."""
    if n < 100:
        raise ValueError("n must be >= 100")
    if phase_samples < 1:
        raise ValueError("phase_samples must be >= 1")
    E = np.atleast_1d(np.asarray(energies, dtype=float))
    out = np.empty((phase_samples, E.size))
    for j in range(phase_samples):
        V = model.potential(j, n)
        mats, logs = transfer_products(V, E, 0, n - 1)
        out[j] = (np.log(spectral_norm(mats)) + logs) / n
    return np.maximum(out, 0.0)


def lyapunov(model: Model, E: float, n: int, phase_samples: int = 1) -> LyapunovEstimate:
    """Mean over phases of (1/n) log ||A_n||, with max - min as the uniformity diagnostic."""
    g = lyapunov_grid(model, [E], n, phase_samples)[:, 0]
    return LyapunovEstimate(float(E), float(g.mean()), n, float(g.max() - g.min()), tuple(g.tolist()))


def grid_to_intervals(grid: np.ndarray, mask: np.ndarray) -> IntervalSet:
    """Maximal runs of flagged grid points as [first, last] intervals (single points allowed)."""
    grid = np.asarray(grid, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return IntervalSet()
    d = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    starts = np.flatnonzero(d == 1)
    stops = np.flatnonzero(d == -1) - 1
    return IntervalSet(np.column_stack([grid[starts], grid[stops]]))


@dataclass(frozen=True, eq=False)
class ZeroSet:
    intervals: IntervalSet
    grid: np.ndarray
    gamma: np.ndarray
    n: int
    tol: float

    @property
    def resolution(self) -> float:
        return float(np.max(np.diff(self.grid))) if self.grid.size > 1 else 0.0

    def padded(self) -> IntervalSet:
        """Intervals widened by half a grid step on each side."""
        return self.intervals.widen(self.resolution / 2)


def zset_scan(model: Model, grid, n: int, tol: float, phase_samples: int = 1) -> ZeroSet:
    """Grid points with gamma < tol, merged into intervals at grid resolution."""
    grid = np.asarray(grid, dtype=float)
    if grid.size > 1 and (np.diff(grid) <= 0).any():
        raise ValueError("energy grid must be strictly increasing")
    g = lyapunov_grid(model, grid, n, phase_samples).mean(axis=0)
    return ZeroSet(grid_to_intervals(grid, g < tol), grid, g, n, tol)


@dataclass(frozen=True, eq=False)
class SpectrumApprox:
    k: int
    lam: float
    intervals: IntervalSet
    levels: tuple[BandSet, BandSet]
    monotone: bool | None       # contained in the level k - 1 union (None for k = 1)

    @property
    def measure(self) -> float:
        return self.intervals.measure

    @property
    def band_count(self) -> int:
        return len(self.intervals)

    @property
    def certified(self) -> bool:
        return self.levels[0].all_certified and self.levels[1].all_certified


def _union(lam, k, cf, resolution):
    a = sigma_k(lam, k, resolution, cf)
    b = sigma_k(lam, k + 1, resolution, cf)
    return a, b, a.bands.union(b.bands)


def contained(inner: IntervalSet, outer: IntervalSet, tol: float) -> bool:
    """inner is a subset of outer widened by tol."""
    w = outer.widen(tol)
    return math.isclose(inner.intersection(w).measure, inner.measure, rel_tol=0, abs_tol=1e-15) \
        and all(w.contains(a) and w.contains(b) for a, b in inner)


def spectrum_approx(lam: float, k: int, coefficients: Sequence[int] = (1,),
                    resolution: float = 1e-10, tol: float = 1e-8) -> SpectrumApprox:
    """sigma_k u sigma_{k+1} for the Sturmian family with the given periodic coefficients."""
    if k < 1:
        raise ValueError("k must be >= 1")
    reps = (k + 2) // len(coefficients) + 1
    cf = ContinuedFraction.from_coefficients(list(coefficients) * reps)
    a, b, u = _union(lam, k, cf, resolution)
    mono = None
    if k > 1:
        _, _, prev = _union(lam, k - 1, cf, resolution)
        mono = contained(u, prev, tol)
    return SpectrumApprox(k, float(lam), u, (a, b), mono)


def box_counts(s: IntervalSet, eps: float) -> int:
    """Number of grid boxes [j eps, (j+1) eps) meeting the set."""
    if not len(s):
        return 0
    lo = np.floor(s.bounds[:, 0] / eps).astype(np.int64)
    hi = np.floor(s.bounds[:, 1] / eps).astype(np.int64)
    prev = np.concatenate([[lo[0] - 1], np.maximum.accumulate(hi)[:-1]])
    start = np.maximum(lo, prev + 1)
    return int(np.sum(np.maximum(hi - start + 1, 0)))


@dataclass(frozen=True)
class DimensionEstimate:
    dimension: float
    residual: float
    scales: tuple[float, ...]
    counts: tuple[int, ...]
    degenerate: bool


def box_dimension(s: IntervalSet, scales: Sequence[float]) -> DimensionEstimate:
    """Least-squares slope of log N(eps) against log(1/eps)."""
    eps = np.asarray(sorted(scales, reverse=True), dtype=float)
    if eps.size < 4 or eps[0] / eps[-1] < 100:
        raise ValueError("need at least 4 scales spanning at least 2 decades")
    counts = np.array([box_counts(s, e) for e in eps])
    degenerate = bool(counts.max() <= 1 or len(s) == 0)
    if degenerate:
        return DimensionEstimate(0.0, 0.0, tuple(eps), tuple(int(c) for c in counts), True)
    x = np.log(1 / eps)
    y = np.log(counts)
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return DimensionEstimate(float(coef[0]), res, tuple(eps.tolist()),
                             tuple(int(c) for c in counts), False)


def cantor_set(level: int) -> IntervalSet:
    """Middle-thirds Cantor approximant with 2^level intervals."""
    iv = [(0.0, 1.0)]
    for _ in range(level):
        nxt = []
        for a, b in iv:
            t = (b - a) / 3
            nxt += [(a, a + t), (b - t, b)]
        iv = nxt
    return IntervalSet(iv)
