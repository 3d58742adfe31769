"""Forward solvers for the controlled heat equation.

``propagate_exact`` advances modal coefficients in closed form.
``crank_nicolson`` is an independent finite-difference integrator on a
uniform interior grid, used to cross-check controlled runs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .control import ControlFunction, HeatState, SynthesisResult
from .sets import MeasurableSet1D


class StageBoundaryError(ValueError):
    """A propagation span crosses a point where the control switches."""


def _control_gram(control: ControlFunction) -> np.ndarray:
    from .observability import spatial_gram

    b = control.basis
    return spatial_gram(b, control.omega_set, b.omegas[-1]).matrix


def propagate_exact(state: HeatState, control: ControlFunction | None, t0: float, t1: float,
                    gram: np.ndarray | None = None, basis=None) -> HeatState:
    """Modal state at ``t1`` from the state at ``t0``, with no time quadrature.

    ``alpha_j(t1) = e^{-lambda_j dt} alpha_j(t0) + sum_i G_ji c_i e^{-lambda_i (a - t1)}
    (1 - e^{-(lambda_i + lambda_j) dt}) / (lambda_i + lambda_j)`` on an
    active half ending at ``a``; pure decay elsewhere. Without a control the
    eigenvalues come from ``basis``.
    """
    if t1 < t0:
        raise ValueError("t1 must not precede t0")
    alpha = state.alpha
    if control is None:
        lam = None if basis is None else basis.eigenvalues[:alpha.size]
    else:
        lam = control.basis.eigenvalues
        if alpha.shape != lam.shape:
            raise ValueError("state and basis sizes differ")
        sched = control.schedule
        cuts = [s.t_start for s in sched.stages] + [s.active_end for s in sched.stages] + [sched.tail.lo]
        tol = 1e-13 * max(1.0, sched.T)
        if any(t0 + tol < c < t1 - tol for c in cuts):
            raise StageBoundaryError(f"[{t0}, {t1}] crosses a stage boundary")
    dt = t1 - t0
    if dt == 0:
        return HeatState(t1, alpha.copy())
    if lam is None:
        raise ValueError("eigenvalues are needed; pass a control or a basis")
    out = alpha * np.exp(-lam * dt)
    if control is None:
        return HeatState(t1, out)
    mid = 0.5 * (t0 + t1)
    st, c = control.stage_at(mid)
    if st is not None and mid <= st.active_end and len(c):
        G = gram if gram is not None else _control_gram(control)
        n = len(c)
        s = lam[:, None] + lam[None, :n]
        kernel = G[:, :n] * np.exp(-lam[None, :n] * (st.active_end - t1)) * (-np.expm1(-s * dt) / s)
        out = out + kernel @ c
    return HeatState(t1, out)


# -- grid integrator ---------------------------------------------------------------

@dataclass(frozen=True)
class GridState:
    n_points: int
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.n_points,):
            raise ValueError("values must hold the interior grid points")
        object.__setattr__(self, "values", v)

    @property
    def dx(self) -> float:
        return 1.0 / (self.n_points + 1)

    @property
    def x(self) -> np.ndarray:
        return grid_points(self.n_points)

    def l2_norm(self) -> float:
        return float(math.sqrt(self.dx) * np.linalg.norm(self.values))


def grid_points(n: int) -> np.ndarray:
    return np.arange(1, n + 1) / (n + 1)


def rasterize(omega_set: MeasurableSet1D, n: int, mode: str = "center") -> np.ndarray:
    """Weights of ``chi_omega`` on the grid cells ``[x_i - dx/2, x_i + dx/2]``.

    ``center``: 1 where the cell center lies in omega. ``fraction``: covered
    fraction of each cell.
    """
    x = grid_points(n)
    if mode == "center":
        return omega_set.contains(x).astype(float)
    if mode == "fraction":
        h = 1.0 / (n + 1)
        return np.asarray(omega_set.measure_in(x - h / 2, x + h / 2)) / h
    raise ValueError(f"unknown rasterization {mode!r}")


def raster_measure_error(omega_set: MeasurableSet1D, n: int, mode: str = "center") -> float:
    return abs(float(rasterize(omega_set, n, mode).sum()) / (n + 1) - omega_set.measure)


def _cn_bands(n: int, dt: float):
    r = dt / (2.0 * (1.0 / (n + 1)) ** 2)
    ab = np.zeros((3, n))
    ab[0, 1:] = -r
    ab[1, :] = 1 + 2 * r
    ab[2, :-1] = -r
    return ab, r


def crank_nicolson(grid: GridState, source: Callable | None, dt: float, steps: int) -> GridState:
    """``steps`` trapezoidal steps of ``u_t = u_xx + s(t)`` with homogeneous Dirichlet ends.

    ``source(t)`` returns the source on the interior grid (already masked by
    ``chi_omega``) or is ``None``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = grid.n_points
    ab, r = _cn_bands(n, dt)
    u = grid.values.copy()
    t = grid.time
    f_prev = source(t) if source is not None else None
    for _ in range(steps):
        rhs = (1 - 2 * r) * u
        rhs[1:] += r * u[:-1]
        rhs[:-1] += r * u[1:]
        if source is not None:
            f_next = source(t + dt)
            rhs += 0.5 * dt * (f_prev + f_next)
            f_prev = f_next
        u = solve_banded((1, 1), ab, rhs)
        t += dt
    return GridState(n, u, t)


def _phase_source(control: ControlFunction, stage, c, x, mask):
    n = len(c)
    E = control.basis.truncate(n).evaluate(x) * mask
    lam = control.basis.eigenvalues[:n]

    def source(t):
        return (c * np.exp(-lam * (stage.active_end - t))) @ E

    return source


def cn_controlled_run(run: SynthesisResult, n_points: int = 512, dt: float = 1e-4,
                      raster: str = "center") -> GridState:
    """Replay a synthesized control with Crank-Nicolson, phase by phase.

    Each phase gets a whole number of steps of size at most ``dt`` so that
    control switch times fall on step boundaries.
    """
    control = run.control
    x = grid_points(n_points)
    mask = rasterize(control.omega_set, n_points, raster)
    u0 = run.initial_state.alpha @ control.basis.evaluate(x)
    g = GridState(n_points, u0, 0.0)
    for st, c in zip(control.schedule.stages, control.coefficients):
        for lo, hi, src in ((st.t_start, st.active_end, _phase_source(control, st, c, x, mask)),
                            (st.active_end, st.t_end, None)):
            steps = max(1, math.ceil((hi - lo) / dt - 1e-9))
            g = crank_nicolson(GridState(n_points, g.values, lo), src, (hi - lo) / steps, steps)
    tail = control.schedule.tail
    steps = max(1, math.ceil(tail.length / dt - 1e-9))
    return crank_nicolson(GridState(n_points, g.values, tail.lo), None, tail.length / steps, steps)


def _l2_grid(v: np.ndarray, n: int) -> float:
    return float(np.linalg.norm(v) / math.sqrt(n + 1))


def _restrict_fine(v_fine: np.ndarray) -> np.ndarray:
    """Values of a ``2n+1`` grid at the points of the ``n`` grid."""
    return v_fine[1::2]


@dataclass(frozen=True)
class CrossValidation:
    distance: float
    model_error: float
    fine_distance: float
    measure_error: float
    n_points: int
    dt: float

    @property
    def ratio(self) -> float:
        return self.distance / self.model_error if self.model_error > 0 else (0.0 if self.distance == 0 else math.inf)


def cross_validate(run: SynthesisResult, n_points: int = 512, dt: float = 1e-4, raster: str = "center") -> CrossValidation:
    """Compare the modal final state with Crank-Nicolson at ``(dx, dt)`` and ``(dx/2, dt/2)``.

    ``distance`` is the discrete L2 gap at ``T`` on the coarse grid and
    ``model_error`` the gap between the two grid solutions, which estimates
    the coarse discretization error.
    """
    x = grid_points(n_points)
    exact = run.final_state.alpha @ run.control.basis.evaluate(x)
    coarse = cn_controlled_run(run, n_points, dt, raster).values
    fine = _restrict_fine(cn_controlled_run(run, 2 * n_points + 1, dt / 2, raster).values)
    return CrossValidation(
        distance=_l2_grid(exact - coarse, n_points),
        model_error=_l2_grid(coarse - fine, n_points),
        fine_distance=_l2_grid(exact - fine, n_points),
        measure_error=raster_measure_error(run.control.omega_set, n_points, raster),
        n_points=n_points,
        dt=dt,
    )


def decay_benchmark(n_points: int = 512, dt: float = 1e-4, t_end: float = 0.1) -> float:
    """Max error of Crank-Nicolson against ``e^{-pi^2 t} sqrt(2) sin(pi x)``."""
    x = grid_points(n_points)
    u0 = math.sqrt(2.0) * np.sin(math.pi * x)
    steps = round(t_end / dt)
    g = crank_nicolson(GridState(n_points, u0), None, t_end / steps, steps)
    return float(np.abs(g.values - math.exp(-math.pi ** 2 * t_end) * u0).max())
