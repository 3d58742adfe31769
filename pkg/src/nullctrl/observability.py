"""Gram matrices of low-frequency eigenfunction sums observed on a set.

For mode sums ``sum a_j e_j`` the best constant in
``sum a_j^2 <= C int_omega |sum a_j e_j|^2`` is ``1 / lambda_min`` of the Gram
matrix ``G_jk = int_omega e_j e_k``. These matrices become extremely
ill-conditioned (``lambda_min`` near 1e-57 for 32 sine modes on an interval
of length 0.2), so for the sine basis entries are assembled in closed form
in extended precision and the eigensolve is done there too.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import mpmath as mp
import numpy as np
from scipy import stats

from ._precision import MAX_DPS, sym_min_eig
from .sets import MeasurableSet1D
from .spectral_basis import Basis, _piece_quadrature

EIG_RESIDUAL_TOL = 1e-10
Y_WINDOW = (0.25, 0.75)


class UnobservableError(ArithmeticError):
    """The form is singular to working precision."""


class QuadratureError(ArithmeticError):
    """Gauss quadrature did not converge."""


class DegenerateFitError(ValueError):
    pass


@dataclass(frozen=True)
class ModeCoefficients:
    a: np.ndarray
    b: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        if self.b is not None:
            b = np.asarray(self.b, dtype=float)
            if b.shape != self.a.shape:
                raise ValueError("a and b must have equal length")
            object.__setattr__(self, "b", b)


@dataclass(frozen=True)
class ExtendedFunction:
    """``u(x, y) = sum_{w_j <= mu} (a_j e^{w_j y} + b_j e^{-w_j y}) e_j(x)``."""

    basis: Basis
    coeffs: ModeCoefficients
    mu: float

    def __post_init__(self):
        n = modes_below(self.basis, self.mu).size
        if self.coeffs.a.size != n:
            raise ValueError(f"expected {n} coefficients for mu={self.mu}")

    def __call__(self, x, y):
        idx = modes_below(self.basis, self.mu)
        w = self.basis.omegas[idx]
        b = self.coeffs.b if self.coeffs.b is not None else np.zeros_like(self.coeffs.a)
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        E = self.basis.truncate(idx[-1] + 1).evaluate(x.ravel())[idx]
        Y = self.coeffs.a[:, None] * np.exp(np.outer(w, y.ravel())) + b[:, None] * np.exp(-np.outer(w, y.ravel()))
        return (E * Y).sum(axis=0).reshape(x.shape)


@dataclass(frozen=True)
class QuadraticForm:
    """Symmetric PSD form; ``builder(dps)`` reassembles it in extended precision when available."""

    matrix: np.ndarray
    omegas: np.ndarray
    mu: float
    kind: str = "spatial"
    builder: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("form matrix must be square")
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.T).max() > 1e-12 * scale:
            raise ValueError("form matrix is not symmetric")
        object.__setattr__(self, "matrix", 0.5 * (m + m.T))

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def exact(self, dps: int) -> mp.matrix:
        if self.builder is None:
            raise ValueError("form has no extended-precision builder")
        return self.builder(dps)


def modes_below(basis: Basis, mu: float) -> np.ndarray:
    """Zero-based indices of modes with ``w_j <= mu`` (with a 1e-12 relative allowance)."""
    w = basis.omegas
    if mu > w[-1] * (1 + 1e-12):
        raise ValueError(f"mu={mu} exceeds the largest computed frequency {w[-1]}; increase J")
    idx = np.nonzero(w <= mu * (1 + 1e-12))[0]
    if idx.size == 0:
        raise ValueError(f"no modes below mu={mu}")
    return idx


def _select(basis: Basis, mu, modes):
    if modes is None:
        return modes_below(basis, mu)
    idx = np.asarray(list(modes), dtype=int) - 1
    if idx.min() < 0 or idx.max() >= len(basis):
        raise ValueError("mode index out of range")
    return idx


# -- sine basis in closed form ------------------------------------------------

def _sine_gram_mp(js, intervals, dps: int) -> mp.matrix:
    """``int 2 sin(j pi x) sin(k pi x)`` over a union of intervals, at ``dps`` digits."""
    with mp.workdps(dps):
        pi = mp.pi
        ends = [(mp.mpf(lo), mp.mpf(hi)) for lo, hi in intervals]
        n = len(js)
        G = mp.matrix(n, n)

        def prim(m, x):  # primitive of cos(m pi x)
            return x if m == 0 else mp.sin(m * pi * x) / (m * pi)

        for p in range(n):
            for q in range(p, n):
                j, k = int(js[p]), int(js[q])
                s = mp.mpf(0)
                for a, b in ends:
                    s += (prim(j - k, b) - prim(j - k, a)) - (prim(j + k, b) - prim(j + k, a))
                G[p, q] = s
                G[q, p] = s
        return G


def _quadrature_gram(basis: Basis, idx, omega_set: MeasurableSet1D, tol=1e-12, max_splits=4096):
    """Gauss-Legendre Gram on ``omega``, split at density breaks, refined until converged."""
    pieces = []
    br = basis.density.breaks
    for iv in omega_set.intervals:
        cuts = np.unique(np.r_[iv.lo, br[(br > iv.lo) & (br < iv.hi)], iv.hi])
        pieces.extend(zip(cuts[:-1], cuts[1:]))
    wmax = float(basis.omegas[idx].max() * np.sqrt(basis.density.values.max()))
    splits = max(1, int(wmax / 4))
    t, w = np.polynomial.legendre.leggauss(32)
    sub = basis.truncate(int(idx.max()) + 1)

    def assemble(nsplit):
        G = np.zeros((idx.size, idx.size))
        for lo, hi in pieces:
            edges = np.linspace(lo, hi, nsplit + 1)
            h = np.diff(edges)
            x = (0.5 * h[:, None] * t + 0.5 * (edges[:-1] + edges[1:])[:, None]).ravel()
            wt = (0.5 * h[:, None] * w).ravel()
            V = sub.evaluate(x)[idx]
            G += (V * wt) @ V.T
        return G

    G = assemble(splits)
    while splits <= max_splits:
        G2 = assemble(2 * splits)
        if np.abs(G2 - G).max() <= tol:
            return G2
        G, splits = G2, 2 * splits
    raise QuadratureError("Gram quadrature did not reach the requested tolerance")


def spatial_gram(basis: Basis, omega_set: MeasurableSet1D, mu: float, modes=None) -> QuadraticForm:
    """``G_jk = int_omega e_j e_k dx`` for the modes below ``mu`` (or the 1-based ``modes``)."""
    if omega_set.measure <= 0:
        raise ValueError("observation set must have positive measure")
    idx = _select(basis, mu, modes)
    w = basis.omegas[idx]
    if basis.is_sine:
        js = idx + 1
        pairs = omega_set.as_pairs()

        def builder(dps):
            return _sine_gram_mp(js, pairs, dps)

        with mp.workdps(30):
            G = np.array(builder(30).tolist(), dtype=float)
        return QuadraticForm(G, w, mu, "spatial", builder)
    G = _quadrature_gram(basis, idx, omega_set)
    return QuadraticForm(G, w, mu, "spatial")


def quadrature_spatial_gram(basis: Basis, omega_set: MeasurableSet1D, mu: float, modes=None) -> np.ndarray:
    """Quadrature Gram for any basis; used to cross-check the closed form."""
    return _quadrature_gram(basis, _select(basis, mu, modes), omega_set)


# -- constants -----------------------------------------------------------------

class SpectralConstant(NamedTuple):
    lambda_min: float
    C: float


def _initial_dps(n: int) -> int:
    return 30 + 3 * n


def spectral_constant(form: QuadraticForm) -> SpectralConstant:
    """Smallest eigenvalue of the form and ``C = 1 / lambda_min``.

    With an extended-precision builder the working precision is raised
    until ``lambda_min / lambda_max`` sits well above the rounding level;
    otherwise a double-precision symmetric eigensolve is used and forms
    singular to that precision are rejected.
    """
    if form.builder is not None:
        dps = _initial_dps(form.size)
        while dps <= MAX_DPS:
            lam, top, resid = sym_min_eig(form.exact(dps), dps)
            if lam > 0 and lam / top > mp.mpf(10) ** (-(dps - 20)):
                if resid > EIG_RESIDUAL_TOL * max(1.0, float(top)):
                    raise ArithmeticError(f"eigen residual {float(resid):.3e} too large")
                lam_f = float(lam)
                return SpectralConstant(lam_f, float(1 / lam))
            dps *= 2
        raise UnobservableError("form is singular up to the maximum working precision")
    evals, evecs = np.linalg.eigh(form.matrix)
    lam, top = float(evals[0]), float(evals[-1])
    v = evecs[:, 0]
    resid = float(np.linalg.norm(form.matrix @ v - lam * v))
    if lam <= 1e-13 * max(top, 1e-300):
        raise UnobservableError(f"lambda_min={lam:.3e} is at the rounding floor")
    if resid > EIG_RESIDUAL_TOL * max(1.0, top):
        raise ArithmeticError(f"eigen residual {resid:.3e} too large")
    return SpectralConstant(lam, 1.0 / lam)


# -- two-sided extension in y ---------------------------------------------------

def _y_integral(s, window=Y_WINDOW):
    """``int e^{s y} dy`` over the window, with the removable singularity at ``s = 0``."""
    lo, hi = (mp.mpf(window[0]), mp.mpf(window[1]))
    if s == 0:
        return hi - lo
    return (mp.exp(s * hi) - mp.exp(s * lo)) / s


def lr_form(basis: Basis, omega_set: MeasurableSet1D, mu: float, modes=None) -> QuadraticForm:
    """Form of ``int int_{omega x [1/4, 3/4]} |u|^2`` in the variables ``(a, b)``.

    Blocks are ``G o Y(w_j + w_k)``, ``G o Y(w_j - w_k)`` and
    ``G o Y(-w_j - w_k)`` where ``Y(s) = int e^{s y} dy``. Entries span many
    orders of magnitude, so the form is kept in extended precision instead of
    rescaling.
    """
    g = spatial_gram(basis, omega_set, mu, modes)
    idx = _select(basis, mu, modes)
    n = idx.size
    sine = basis.is_sine
    w_float = basis.omegas[idx]

    def builder(dps):
        with mp.workdps(dps):
            G = g.exact(dps) if g.builder is not None else mp.matrix(g.matrix.tolist())
            w = [mp.pi * (j + 1) for j in idx] if sine else [mp.mpf(x) for x in w_float]
            Q = mp.matrix(2 * n, 2 * n)
            for p in range(n):
                for q in range(n):
                    gpq = G[p, q]
                    Q[p, q] = gpq * _y_integral(w[p] + w[q])
                    Q[n + p, n + q] = gpq * _y_integral(-w[p] - w[q])
                    Q[p, n + q] = gpq * _y_integral(w[p] - w[q])
                    Q[n + q, p] = Q[p, n + q]
            return Q

    with mp.workdps(30):
        M = np.array(builder(30).tolist(), dtype=float)
    return QuadraticForm(M, np.r_[w_float, w_float], mu, "lr", builder)


def sinh_floor_check(omega: float, a: float, b: float, omega1: float, mu: float) -> bool:
    """Check ``int_0^1 (a e^{w y} + b e^{-w y})^2 dy >= e^{-mu} (sinh(w1)/w1 - 1)(a^2 + b^2)``."""
    if not (0 < omega1 <= omega * (1 + 1e-12) and omega <= mu * (1 + 1e-12)):
        raise ValueError("need 0 < omega1 <= omega <= mu")
    lhs = (a * a * math.expm1(2 * omega) / (2 * omega) + 2 * a * b
           - b * b * math.expm1(-2 * omega) / (2 * omega))
    rhs = math.exp(-mu) * (math.sinh(omega1) / omega1 - 1.0) * (a * a + b * b)
    return lhs >= rhs - 1e-13 * (abs(lhs) + abs(rhs))


# -- rate fitting -----------------------------------------------------------------

class FitResult(NamedTuple):
    N: float
    intercept: float
    residual: float
    r_squared: float


def fit_rate(points) -> FitResult:
    """Least-squares line through ``(mu, log C)``; residual is the max absolute deviation."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(p) < 3:
        raise DegenerateFitError("need at least three points")
    if np.any(p[:, 1] <= 0):
        raise DegenerateFitError("constants must be positive")
    if np.ptp(p[:, 0]) == 0:
        raise DegenerateFitError("all mu values coincide")
    mu, y = p[:, 0], np.log(p[:, 1])
    fit = stats.linregress(mu, y)
    dev = np.abs(y - (fit.intercept + fit.slope * mu))
    r2 = 1.0 if np.ptp(y) == 0 else float(fit.rvalue ** 2)
    return FitResult(float(fit.slope), float(fit.intercept), float(dev.max()), r2)


def constant_sweep(basis: Basis, omega_set: MeasurableSet1D, mus, form: str = "spatial") -> list[tuple]:
    """Rows ``(mu, n_modes, lambda_min, C, logC)`` for each ``mu``."""
    make = spatial_gram if form == "spatial" else lr_form
    rows = []
    for mu in mus:
        q = make(basis, omega_set, mu)
        lam, C = spectral_constant(q)
        n = q.size if form == "spatial" else q.size // 2
        rows.append((float(mu), n, lam, C, math.log(C)))
    return rows
