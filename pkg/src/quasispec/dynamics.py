"""Wavepacket spreading on a finite lattice [-L, L].

Time averages are computed exactly from the eigendecomposition of the
truncated operator. For the Abelian weights

    a(n, T) = (2/T) int_0^inf exp(-2t/T) |<exp(-itH) psi0, delta_n>|^2 dt

the double sum over eigenpairs with kernel eps / (eps + i (E_j - E_l)),
eps = 2/T, is folded into resolvent solves at z_l = E_l + i eps:

    a(n, T) = eps * sum_l Im( conj(c_l) phi_l(n) [(H - z_l)^{-1} psi0](n) ),

which costs O(N^2) per T instead of O(N^3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np
from scipy import integrate, stats
from scipy.linalg import eigh, eigh_tridiagonal

from .errors import EdgeDecayError, QuadratureError
from .schrodinger import Potential, prefix_log_norms
from .spectrum import Model
from .tracemap import complex_escape_times, fib_traces

MAX_HALF_WIDTH = 2 ** 14
LEAKAGE_LIMIT = 0.01


class LatticeOperator:
    """(H psi)(n) = psi(n+1) + psi(n-1) + V(n) psi(n) on [-L, L] with hard truncation."""

    def __init__(self, potential: Potential, L: int):
        if L < 0:
            raise ValueError("L must be non-negative")
        self.L = int(L)
        self.diag = np.array(potential.segment(-L, L), dtype=float)
        self._eig = None

    @classmethod
    def from_model(cls, model: Model, L: int, phase: int = 0) -> "LatticeOperator":
        return cls(model.potential_on(phase, -L, L + 1), L)

    @property
    def size(self) -> int:
        return self.diag.size

    @property
    def sites(self) -> np.ndarray:
        return np.arange(-self.L, self.L + 1)

    def index(self, n: int) -> int:
        if abs(n) > self.L:
            raise IndexError(f"site {n} outside [-{self.L}, {self.L}]")
        return n + self.L

    def matvec(self, psi: np.ndarray) -> np.ndarray:
        out = self.diag * psi
        out[:-1] += psi[1:]
        out[1:] += psi[:-1]
        return out

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.eye(self.size, k=1) + np.eye(self.size, k=-1)

    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues and orthonormal eigenvectors (columns), cached."""
        if self._eig is None:
            if self.L > MAX_HALF_WIDTH:
                raise ValueError(f"L = {self.L} exceeds the dense eigensolve budget {MAX_HALF_WIDTH}")
            if self.size == 1:
                w, v = self.diag.copy(), np.ones((1, 1))
            else:
                try:
                    w, v = eigh_tridiagonal(self.diag, np.ones(self.size - 1))
                except np.linalg.LinAlgError:
                    # MRRR can fail on tight eigenvalue clusters (strong disorder).
                    w, v = eigh(self.dense(), driver="evd")
            self._eig = (w, np.asfortranarray(v))
        return self._eig

    def delta(self, n: int = 0) -> np.ndarray:
        psi = np.zeros(self.size, dtype=complex)
        psi[self.index(n)] = 1.0
        return psi


def _state(H: LatticeOperator, psi0) -> np.ndarray:
    if psi0 is None:
        return H.delta(0)
    psi = np.asarray(psi0, dtype=complex)
    if psi.shape != (H.size,):
        raise ValueError(f"initial state must have length {H.size}")
    return psi


def edge_mass(H: LatticeOperator, weights: np.ndarray) -> float:
    """Total weight at sites |n| > 0.9 L."""
    return float(np.sum(weights[np.abs(H.sites) > 0.9 * H.L]))


@dataclass(frozen=True, eq=False)
class WavePacket:
    amplitudes: np.ndarray
    t: float
    norm_error: float
    leakage: float

    @property
    def leakage_warning(self) -> bool:
        return self.leakage > LEAKAGE_LIMIT

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def evolve(H: LatticeOperator, psi0=None, t: float = 0.0) -> WavePacket:
    """exp(-itH) psi0 through the cached eigendecomposition."""
    psi = _state(H, psi0)
    w, v = H.eigh()
    c = v.T @ psi
    out = v @ (np.exp(-1j * t * w) * c)
    err = abs(np.linalg.norm(out) - np.linalg.norm(psi))
    return WavePacket(out, float(t), float(err), edge_mass(H, np.abs(out) ** 2))


@numba.njit(cache=True)
def _abelian(diag, w, v, c, psi, eps, out):
    N = diag.size
    cp = np.empty(N, dtype=np.complex128)
    dp = np.empty(N, dtype=np.complex128)
    g = np.empty(N, dtype=np.complex128)
    for n in range(N):
        out[n] = 0.0
    for l in range(N):
        cl = c[l]
        if cl.real == 0.0 and cl.imag == 0.0:
            continue
        z = w[l] + 1j * eps
        m = diag[0] - z
        cp[0] = 1.0 / m
        dp[0] = psi[0] / m
        for i in range(1, N):
            m = (diag[i] - z) - cp[i - 1]
            cp[i] = 1.0 / m
            dp[i] = (psi[i] - dp[i - 1]) / m
        g[N - 1] = dp[N - 1]
        for i in range(N - 2, -1, -1):
            g[i] = dp[i] - cp[i] * g[i + 1]
        ccl = cl.conjugate()
        for n in range(N):
            out[n] += (ccl * v[n, l] * g[n]).imag
    for n in range(N):
        out[n] *= eps


def abelian_weights(H: LatticeOperator, T: float, psi0=None) -> np.ndarray:
    """a(n, T) for every lattice site."""
    if T <= 0:
        raise ValueError("T must be positive")
    psi = _state(H, psi0)
    w, v = H.eigh()
    c = v.T @ psi
    out = np.empty(H.size)
    _abelian(H.diag, w, v, c.astype(np.complex128), psi, 2.0 / T, out)
    return out


def abelian_weight_direct(H: LatticeOperator, n: int, T: float, psi0=None) -> float:
    """a(n, T) from the eigenpair double sum with kernel eps / (eps + i (E_j - E_l))."""
    psi = _state(H, psi0)
    w, v = H.eigh()
    b = (v.T @ psi) * v[H.index(n)]
    eps = 2.0 / T
    total = 0.0 + 0.0j
    step = 1024
    for s in range(0, w.size, step):
        K = eps / (eps + 1j * (w[s:s + step, None] - w[None, :]))
        total += np.sum(b[s:s + step, None] * np.conj(b)[None, :] * K)
    return float(total.real)


@dataclass(frozen=True, eq=False)
class TransportReport:
    T: np.ndarray
    weights: np.ndarray                      # a(n, T), shape (len(T), 2L + 1)
    moments: dict                            # p -> <|X|^p>(T)
    leakage: np.ndarray
    normalization_error: np.ndarray          # |sum_n a(n, T) - 1|
    min_weight: float
    L: int
    metadata: dict = field(default_factory=dict)

    @property
    def usable(self) -> np.ndarray:
        return self.leakage <= LEAKAGE_LIMIT


def abelian_moments(H: LatticeOperator, T_grid: Sequence[float], p_set: Sequence[float],
                    psi0=None) -> TransportReport:
    """<|X|^p>(T) = sum_n |n|^p a(n, T) for each T and p."""
    T = np.asarray(sorted(T_grid), dtype=float)
    W = np.vstack([abelian_weights(H, t, psi0) for t in T])
    absn = np.abs(H.sites).astype(float)
    moments = {float(p): W @ absn ** p for p in p_set}
    leak = np.array([edge_mass(H, row) for row in W])
    norm_err = np.abs(W.sum(axis=1) - 1)
    return TransportReport(T, W, moments, leak, norm_err, float(W.min()), H.L)


@dataclass(frozen=True)
class TransportExponents:
    p: float
    beta_minus: float
    beta_plus: float
    slopes: tuple[float, ...]
    window: int
    points_used: int


def transport_exponents(report: TransportReport, p: float, window: int | None = None,
                        usable_only: bool = True, min_decades: float = 1.5) -> TransportExponents:
    """Min and max robust slopes of log<|X|^p> / (p log T) over sliding windows of T."""
    p = float(p)
    if p not in report.moments:
        raise KeyError(f"moment p={p} not in report")
    mask = report.usable if usable_only else np.ones(report.T.size, dtype=bool)
    T = report.T[mask]
    m = report.moments[p][mask]
    if T.size < 5 or T.max() / T.min() < 10 ** min_decades * (1 - 1e-12):
        raise ValueError(f"need at least 5 usable T values spanning {min_decades} decades")
    x, y = np.log(T), np.log(m) / p
    w = window or max(4, T.size // 3)
    slopes = []
    for s in range(0, T.size - w + 1):
        res = stats.theilslopes(y[s:s + w], x[s:s + w])
        slopes.append(float(res.slope))
    return TransportExponents(p, min(slopes), max(slopes), tuple(slopes), w, int(T.size))


def exponents_by_p(report: TransportReport, ps: Sequence[float],
                   window: int | None = None) -> tuple[list[TransportExponents], bool]:
    """Exponents for several p plus a monotonicity check in p with tolerance 0.02."""
    ex = [transport_exponents(report, p, window) for p in sorted(ps)]
    mono = all(b.beta_minus >= a.beta_minus - 0.02 and b.beta_plus >= a.beta_plus - 0.02
               for a, b in zip(ex, ex[1:]))
    return ex, mono


def _thomas(diag: np.ndarray, z: complex, rhs: np.ndarray) -> np.ndarray:
    N = diag.size
    cp = np.empty(N, dtype=complex)
    dp = np.empty(N, dtype=complex)
    m = diag[0] - z
    cp[0] = 1 / m
    dp[0] = rhs[0] / m
    for i in range(1, N):
        m = diag[i] - z - cp[i - 1]
        cp[i] = 1 / m
        dp[i] = (rhs[i] - dp[i - 1]) / m
    x = np.empty(N, dtype=complex)
    x[-1] = dp[-1]
    for i in range(N - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


@dataclass(frozen=True, eq=False)
class ResolventRow:
    z: complex
    u: np.ndarray
    residual: float         # max relative defect of the difference equation away from 0
    edge_weight: float      # max(|u(-L)|, |u(L)|) / max |u|


def resolvent_row(H: LatticeOperator, z: complex, edge_tol: float | None = 1e-8) -> ResolventRow:
    """u(n) = <(H - z)^{-1} delta_0, delta_n> by a complex tridiagonal solve."""
    if complex(z).imag == 0:
        raise ValueError("z must be non-real")
    u = _thomas(H.diag, complex(z), H.delta(0))
    scale = np.abs(u).max()
    N = H.size
    up = np.concatenate([u[1:], [0]])
    um = np.concatenate([[0], u[:-1]])
    res = up + um + (H.diag - z) * u
    res[H.index(0)] = 0
    resid = float(np.abs(res).max() / scale)
    edge = float(max(abs(u[0]), abs(u[-1])) / scale) if N > 1 else 0.0
    if edge_tol is not None and N > 1 and edge > edge_tol:
        raise EdgeDecayError(edge, H.L)
    return ResolventRow(complex(z), u, resid, edge)


@dataclass(frozen=True)
class PlancherelResult:
    n: int
    T: float
    lhs: float              # 2 pi int exp(-2t/T) |<...>|^2 dt = pi T a(n, T)
    rhs: float              # int |<(H - E - i/T)^{-1} psi0, delta_n>|^2 dE
    discrepancy: float      # |lhs - rhs| / |lhs|
    panels: int
    nodes: int
    floor: float            # roundoff scale of both spectral sums, relative to lhs

    @property
    def resolvable(self) -> bool:
        return self.floor < 1e-7


def _panel_quad(f, a: float, b: float, width: float, order: int) -> tuple[float, int]:
    panels = max(1, int(math.ceil((b - a) / width)))
    x, wts = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    vals = f(pts).reshape(panels, order)
    return float(np.sum(vals * (half[:, None] * wts[None, :]))), panels


def plancherel_check(H: LatticeOperator, n: int, T: float, psi0=None,
                     rtol: float = 1e-9, max_refine: int = 6) -> PlancherelResult:
    """Both sides of the Plancherel identity for the resolvent at E + i/T.

    The left side comes from the closed-form time integral; the right side
    from Gauss-Legendre panels no wider than 1/T over the spectrum padded by
    10/T, refined until successive values agree to ``rtol``, plus the two
    infinite tails integrated adaptively.

    Both sides are spectral sums whose terms can be far larger than their
    total, so each carries an absolute roundoff floor near eps (sum |b_j|)^2.
    ``floor`` reports it relative to the left side; when it is not small
    the weight sits below double precision and the discrepancy means nothing.
    """
    psi = _state(H, psi0)
    w, v = H.eigh()
    b = (v.T @ psi) * v[H.index(n)]
    keep = np.abs(b) > 0
    wk, bk = w[keep], b[keep]
    eta = 1.0 / T

    def f(E):
        E = np.atleast_1d(E)
        out = np.empty(E.size)
        step = max(1, 2 ** 22 // max(wk.size, 1))
        for s in range(0, E.size, step):
            R = (bk[None, :] / (wk[None, :] - E[s:s + step, None] - 1j * eta)).sum(axis=1)
            out[s:s + step] = np.abs(R) ** 2
        return out

    lhs = math.pi * T * abelian_weight_direct(H, n, T, psi)
    noise = 64 * np.finfo(float).eps * math.pi * T * float(np.abs(bk).sum()) ** 2
    a, bnd = float(w.min() - 10 * eta), float(w.max() + 10 * eta)
    width = eta
    prev, panels = _panel_quad(f, a, bnd, width, 16)
    for _ in range(max_refine):
        width /= 2
        cur, panels = _panel_quad(f, a, bnd, width, 16)
        if abs(cur - prev) <= rtol * abs(cur) + noise:
            break
        prev = cur
    else:
        raise QuadratureError("panel quadrature did not converge")
    tails = [integrate.quad(lambda E: f(E)[0], lo, hi, epsabs=noise, epsrel=1e-12, limit=200)[0]
             for lo, hi in ((-np.inf, a), (bnd, np.inf))]
    rhs = cur + sum(tails)
    disc = abs(lhs - rhs) / abs(lhs) if lhs else abs(rhs)
    floor = noise / abs(lhs) if lhs else math.inf
    return PlancherelResult(int(n), float(T), float(lhs), float(rhs), float(disc), panels, panels * 16,
                            float(floor))


def dtthm_lower_bound(alpha: float, p: float) -> float:
    """1/(1 + 2 alpha) - (1 + 8 alpha)/(p + 2 alpha p)."""
    if alpha <= 0 or p <= 0:
        raise ValueError("alpha and p must be positive")
    return 1 / (1 + 2 * alpha) - (1 + 8 * alpha) / (p + 2 * alpha * p)


def dt2lower_reference(alpha: float, p: float, kappa: float = 0.0126) -> float:
    """Piecewise Fibonacci lower bound: (p + 2 kappa)/((p + 1)(alpha + kappa + 1/2)) or 1/(alpha + 1)."""
    if alpha <= 0 or p <= 0:
        raise ValueError("alpha and p must be positive")
    if p <= 2 * alpha + 1:
        return (p + 2 * kappa) / ((p + 1) * (alpha + kappa + 0.5))
    return 1 / (alpha + 1)


@dataclass(frozen=True)
class GrowthFit:
    alpha: float
    C: float
    residual: float


def norm_growth_exponent(V: Potential, E: float, n_max: int, n_min: int = 10) -> GrowthFit:
    """Fit ||A_n^E|| <= C n^alpha through the running maxima of the norms on [n_min, n_max]."""
    ln = prefix_log_norms(V, E, 0, n_max - 1)
    run = np.maximum.accumulate(ln)
    ns = np.unique(np.geomspace(n_min, n_max, 40).astype(int))
    x, y = np.log(ns), run[ns - 1]
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    alpha = max(float(coef[0]), 1e-9)
    C = float(np.exp(np.max(run[n_min - 1:] - alpha * np.log(np.arange(n_min, n_max + 1)))))
    return GrowthFit(alpha, C, float(np.sqrt(np.mean((A @ coef - y) ** 2))))


@dataclass(frozen=True, eq=False)
class UpperBoundIntegrals:
    T: float
    K: float
    n_max: int
    right: float            # int (max_{1<=n<=n_max} ||A_n||^2)^{-1} dE
    left: float             # same for n = -1..-n_max
    trace_bound: float | None   # trace-map upper estimate of the right integrand's integral
    escape_fraction: float | None
    energies: np.ndarray = field(repr=False)
    integrand_right: np.ndarray = field(repr=False)
    integrand_left: np.ndarray = field(repr=False)


def _max_lognorm(V: Potential, energies: np.ndarray, a: int, b: int) -> np.ndarray:
    out = np.empty(energies.size)
    for i, z in enumerate(energies):
        out[i] = prefix_log_norms(V, z, a, b).max()
    return out


def upper_bound_integrals(model: Model, T: float, alpha: float, C: float,
                          grid_points: int = 4001, K: float | None = None,
                          phase: int = 0, fibonacci_lambda: float | None = None) -> UpperBoundIntegrals:
    """Both transfer-matrix integrals over [-K, K] at energies E + i/T.

    The integrands use exact norms of the products A(n-1)...A(0) and
    A(-1)^{-1}...A(-n)^{-1}. When ``fibonacci_lambda`` is given, a trace-map
    estimate is added: ||A_{q_k + 1}|| >= |x_k| / ||A(0)||, so
    ||A(0)||^2 / max |x_k|^2 bounds the right integrand from above.
    """
    if K is None:
        K = max(4.0, math.ceil(model.sup_norm + 3))
    n_max = max(1, int(math.floor(C * T ** alpha)))
    E = np.linspace(-K, K, grid_points)
    z = E + 1j / T
    Vr = model.potential_on(phase, 0, n_max)
    # A(-1)^{-1} ... A(-n)^{-1} has the norm of a forward product over V(-1), ..., V(-n).
    left_vals = model.potential_on(phase, -n_max, 0).values[::-1]
    Vl = Potential(left_vals.copy(), 0)
    lr = _max_lognorm(Vr, z, 0, n_max - 1)
    ll = _max_lognorm(Vl, z, 0, n_max - 1)
    fr = np.exp(-2 * lr)
    fl = np.exp(-2 * ll)
    right = float(integrate.trapezoid(fr, E))
    left = float(integrate.trapezoid(fl, E))
    tb = frac = None
    if fibonacci_lambda is not None:
        # largest k with F_k + 1 <= n_max
        q = [1, 1]
        while q[-1] + q[-2] + 1 <= n_max:
            q.append(q[-1] + q[-2])
        kmax = max(k for k in range(len(q)) if q[k] + 1 <= n_max) if n_max >= 2 else 0
        x = fib_traces(fibonacci_lambda, z, max(kmax, 1))
        with np.errstate(over="ignore", invalid="ignore"):
            best = np.nanmax(np.abs(x[2:kmax + 2]), axis=0) if kmax >= 1 else np.ones(E.size)
        best = np.where(np.isfinite(best), best, np.inf)
        A0 = np.sqrt(0.5 * (np.abs(z) ** 2 + 2 + np.sqrt((np.abs(z) ** 2 + 2) ** 2 - 4)))
        tb = float(integrate.trapezoid(np.minimum(A0 ** 2 / best ** 2, 1.0), E))
        frac = float(np.mean(complex_escape_times(fibonacci_lambda, z, max(kmax, 1)) >= 0))
    return UpperBoundIntegrals(float(T), float(K), n_max, right, left, tb, frac, E, fr, fl)
