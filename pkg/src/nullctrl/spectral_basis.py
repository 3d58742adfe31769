"""Dirichlet eigenpairs of ``e'' + rho(x) w^2 e = 0`` on (0, 1) for piecewise-constant rho.

On each piece the solution is a combination of ``sin`` and ``cos`` of
``w sqrt(rho_i) (x - x_i)``, so eigenfunctions are carried across the
pieces by exact 2x2 transfer matrices. Frequencies are the roots of the
shooting function ``phi(w) = y(1)`` for ``y(0) = 0, y'(0) = 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

ROOT_XTOL = 1e-12


class MissedRootError(RuntimeError):
    """A bracketing scan lost an eigenvalue even after refinement."""


class SpectrumRangeError(ValueError):
    """A query went beyond the computed part of the spectrum."""


@dataclass(frozen=True)
class DensitySpec:
    """Piecewise-constant density: ``values[i]`` on ``[breaks[i], breaks[i+1]]``."""

    breaks: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if b.ndim != 1 or v.ndim != 1 or len(b) != len(v) + 1 or len(v) == 0:
            raise ValueError("need len(breaks) == len(values) + 1 >= 2")
        if abs(b[0]) > 1e-12 or abs(b[-1] - 1.0) > 1e-12 or np.any(np.diff(b) <= 0):
            raise ValueError("pieces must partition [0, 1] in increasing order")
        if np.any(~np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("density values must be positive and finite")
        b = b.copy()
        b[0], b[-1] = 0.0, 1.0
        b.setflags(write=False)
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, value: float = 1.0) -> "DensitySpec":
        return cls(np.array([0.0, 1.0]), np.array([float(value)]))

    @classmethod
    def from_triples(cls, triples, delta: float | None = None) -> "DensitySpec":
        """Parse ``[[lo, hi, value], ...]``; optionally require values in ``[delta, 1/delta]``."""
        t = np.asarray(triples, dtype=float).reshape(-1, 3)
        t = t[np.argsort(t[:, 0])]
        if np.any(np.abs(t[1:, 0] - t[:-1, 1]) > 1e-12):
            raise ValueError("density pieces must be contiguous")
        spec = cls(np.r_[t[:, 0], t[-1, 1]], t[:, 2])
        if delta is not None:
            if not (0 < delta <= 1):
                raise ValueError("delta must lie in (0, 1]")
            if spec.values.min() < delta or spec.values.max() > 1.0 / delta:
                raise ValueError(f"density values must lie in [{delta}, {1 / delta}]")
        return spec

    @property
    def kind(self) -> str:
        return "constant" if len(self.values) == 1 else "piecewise-constant"

    @property
    def delta(self) -> float:
        """Largest ``delta`` with all values in ``[delta, 1/delta]``."""
        return float(min(self.values.min(), 1.0 / self.values.max()))

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breaks)

    def piece_index(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.clip(np.searchsorted(self.breaks, x, side="right") - 1, 0, len(self.values) - 1)

    def __call__(self, x) -> np.ndarray:
        return self.values[self.piece_index(x)]

    def scaled(self, factor: float) -> "DensitySpec":
        return DensitySpec(self.breaks, self.values * factor)


@dataclass(frozen=True)
class EigenPair:
    """Mode ``A_i sin(k_i (x - x_i)) + B_i cos(k_i (x - x_i))`` on piece ``i``, ``k_i = w sqrt(rho_i)``."""

    omega: float
    density: DensitySpec
    A: np.ndarray
    B: np.ndarray
    norm_check: float = 0.0

    @property
    def eigenvalue(self) -> float:
        return self.omega ** 2

    @property
    def wavenumbers(self) -> np.ndarray:
        return self.omega * np.sqrt(self.density.values)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        i = self.density.piece_index(x)
        s = x - self.density.breaks[i]
        k = self.wavenumbers[i]
        return self.A[i] * np.sin(k * s) + self.B[i] * np.cos(k * s)

    def derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        i = self.density.piece_index(x)
        s = x - self.density.breaks[i]
        k = self.wavenumbers[i]
        return k * (self.A[i] * np.cos(k * s) - self.B[i] * np.sin(k * s))


@dataclass(frozen=True)
class Basis:
    density: DensitySpec
    pairs: tuple

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        w = self.omegas
        if len(w) and np.any(np.diff(w) <= 0):
            raise ValueError("frequencies must be strictly increasing")

    def __len__(self):
        return len(self.pairs)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([p.omega for p in self.pairs])

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.omegas ** 2

    @property
    def is_sine(self) -> bool:
        return self.density.kind == "constant" and self.density.values[0] == 1.0

    def evaluate(self, x) -> np.ndarray:
        """Matrix ``[e_j(x_m)]`` of shape ``(J, len(x))``."""
        x = np.asarray(x, dtype=float)
        return np.array([p(x) for p in self.pairs]).reshape(len(self.pairs), *x.shape)

    def truncate(self, J: int) -> "Basis":
        return Basis(self.density, self.pairs[:J])

    def weighted_gram(self, order: int = 64) -> np.ndarray:
        """``int rho e_i e_j dx`` by Gauss-Legendre on a fine split of each piece."""
        xg, wg = _piece_quadrature(self.density, order, max(1, int(self.omegas[-1] * 2)))
        V = self.evaluate(xg)
        return (V * (wg * self.density(xg))) @ V.T


def _piece_quadrature(density: DensitySpec, order: int, splits: int):
    t, w = np.polynomial.legendre.leggauss(order)
    xs, ws = [], []
    for a, b in zip(density.breaks[:-1], density.breaks[1:]):
        edges = np.linspace(a, b, splits + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            xs.append(0.5 * (hi - lo) * t + 0.5 * (hi + lo))
            ws.append(0.5 * (hi - lo) * w)
    return np.concatenate(xs), np.concatenate(ws)


def sine_basis(J: int) -> Basis:
    """``w_j = j pi``, ``e_j = sqrt(2) sin(j pi x)``."""
    if J < 1:
        raise ValueError("J must be >= 1")
    dens = DensitySpec.constant(1.0)
    pairs = [EigenPair(j * math.pi, dens, np.array([math.sqrt(2.0)]), np.array([0.0])) for j in range(1, J + 1)]
    return Basis(dens, pairs)


def _shoot(density: DensitySpec, omegas) -> tuple[np.ndarray, np.ndarray]:
    """Value and slope at ``x = 1`` for ``y(0) = 0, y'(0) = 1``, vectorized over ``omegas``."""
    w = np.atleast_1d(np.asarray(omegas, dtype=float))
    y = np.zeros_like(w)
    dy = np.ones_like(w)
    for L, r in zip(density.lengths, density.values):
        k = w * math.sqrt(r)
        c, s = np.cos(k * L), np.sin(k * L)
        y, dy = c * y + s / k * dy, -k * s * y + c * dy
    return y, dy


def secular(density: DensitySpec, omega) -> np.ndarray:
    return _shoot(density, omega)[0]


def _mode_from_omega(density: DensitySpec, omega: float) -> EigenPair:
    A, B = [], []
    y, dy = 0.0, 1.0
    norm2 = 0.0
    for L, r in zip(density.lengths, density.values):
        k = omega * math.sqrt(r)
        a, b = dy / k, y
        A.append(a)
        B.append(b)
        s2 = math.sin(2 * k * L) / (4 * k)
        norm2 += r * (a * a * (L / 2 - s2) + b * b * (L / 2 + s2) + a * b * math.sin(k * L) ** 2 / k)
        c, s = math.cos(k * L), math.sin(k * L)
        y, dy = c * y + s / k * dy, -k * s * y + c * dy
    scale = 1.0 / math.sqrt(norm2)
    pair = EigenPair(omega, density, np.array(A) * scale, np.array(B) * scale)
    xg, wg = _piece_quadrature(density, 32, max(1, int(omega)))
    check = abs(float(np.sum(wg * density(xg) * pair(xg) ** 2)) - 1.0)
    return EigenPair(omega, density, pair.A, pair.B, check)


def interior_sign_changes(pair: EigenPair, samples: int | None = None) -> int:
    n = samples or 64 * (int(pair.omega * math.sqrt(pair.density.values.max()) / math.pi) + 2)
    x = np.linspace(0.0, 1.0, n + 2)[1:-1]
    v = pair(x)
    v = v[v != 0]
    return int(np.count_nonzero(np.signbit(v[1:]) != np.signbit(v[:-1])))


def _scan_roots(density: DensitySpec, J: int, step: float) -> list[float]:
    roots = []
    lo = step
    f_lo = secular(density, lo)[0]
    chunk = 256
    while len(roots) < J:
        grid = lo + step * np.arange(1, chunk + 1)
        vals = secular(density, grid)
        prev = np.r_[f_lo, vals[:-1]]
        left = np.r_[lo, grid[:-1]]
        for i in np.nonzero(np.signbit(prev) != np.signbit(vals))[0]:
            if vals[i] == 0.0:
                roots.append(float(grid[i]))
            elif prev[i] != 0.0:
                roots.append(brentq(lambda w: float(secular(density, w)[0]), left[i], grid[i],
                                    xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps))
            if len(roots) == J:
                break
        lo, f_lo = grid[-1], vals[-1]
    return roots


def sturm_liouville_basis(density: DensitySpec, J: int, max_refinements: int = 3) -> Basis:
    """First ``J`` Dirichlet eigenpairs of ``e'' + rho w^2 e = 0``, normalized in ``L^2(rho dx)``.

    The bracketing step is ``pi delta / 4``. Each mode's interior zero
    count is compared with its index; a mismatch triggers a rescan with a
    halved step and eventually ``MissedRootError``.
    """
    if J < 1:
        raise ValueError("J must be >= 1")
    if len(density.values) > 64:
        raise ValueError("at most 64 density pieces are supported")
    step = math.pi * density.delta / 4.0
    for _ in range(max_refinements + 1):
        roots = _scan_roots(density, J, step)
        pairs = [_mode_from_omega(density, w) for w in roots]
        if all(interior_sign_changes(p) == j for j, p in enumerate(pairs)):
            return Basis(density, pairs)
        step /= 2.0
    raise MissedRootError("oscillation count mismatch persists after step refinement")


def count_below(basis: Basis, mu: float) -> int:
    """Number of ``w_j <= mu``; refuses to answer beyond the computed spectrum."""
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    w = basis.omegas
    if mu > w[-1]:
        raise SpectrumRangeError(f"mu={mu} exceeds the largest computed frequency {w[-1]}; increase J")
    return int(np.searchsorted(w, mu, side="right"))
