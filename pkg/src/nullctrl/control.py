"""Stagewise null controls for ``u_t = u_xx + chi_omega f`` on (0, 1) with Dirichlet data.

Stage ``k`` of a dyadic schedule controls on its first half and lets the
solution decay on its second half. During the active half the control is
``f(x, t) = chi_omega(x) sum_i c_i e^{-lambda_i (a - t)} e_i(x)`` over the
modes with ``w_i <= mu_k`` (``a`` is the end of the active half), and the
coefficients solve the moment problem ``Lambda c = -d`` that sends those
modes exactly to zero at ``a``. This is the minimal-L2 control for those
moment conditions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np

from ._precision import MAX_DPS
from .observability import spatial_gram
from .sets import Interval, MeasurableSet1D
from .spectral_basis import Basis

ANNIHILATION_TOL = 1e-10
REGULARIZED_TOL = 1e-8
TIKHONOV_COND = 1e12


class ScheduleError(ValueError):
    pass


class ControlSolveError(ArithmeticError):
    pass


@dataclass(frozen=True)
class StagePlan:
    index: int
    t_start: float
    active_end: float
    t_end: float
    mu_k: float
    mode_count: int = 0

    def __post_init__(self):
        if not (self.t_start < self.active_end <= self.t_end):
            raise ScheduleError("stage times must satisfy t_start < active_end <= t_end")

    @property
    def active_length(self) -> float:
        return self.active_end - self.t_start

    @property
    def passive_length(self) -> float:
        return self.t_end - self.active_end


@dataclass(frozen=True)
class Schedule:
    stages: tuple
    T: float
    tail: Interval

    @property
    def K(self) -> int:
        return len(self.stages)


def make_schedule(T: float, mu0: float, K: int, basis: Basis | None = None,
                  min_phase: float | None = None) -> Schedule:
    """Dyadic plan: stage ``k`` spans ``[T(1-2^-k), T(1-2^-(k+1))]`` with ``mu_k = mu0 2^k``.

    ``min_phase`` is the shortest admissible active or passive half
    (typically the time step of a grid integrator).
    """
    if not T > 0:
        raise ScheduleError("T must be positive")
    if int(K) != K or K < 1:
        raise ScheduleError("K must be a positive integer")
    if not mu0 > 0:
        raise ScheduleError("mu0 must be positive")
    if basis is not None and mu0 < basis.omegas[0] * (1 - 1e-12):
        raise ScheduleError(f"mu0 must be at least the first frequency {basis.omegas[0]:.6g}")
    half = T * 2.0 ** (-(K + 1))
    floor = min_phase if min_phase is not None else 1e-12 * T
    if half < floor:
        raise ScheduleError(f"K={K} gives phases of length {half:.3e} below the resolution {floor:.3e}")
    stages = []
    for k in range(K):
        t0 = T * (1.0 - 2.0 ** (-k))
        t1 = T * (1.0 - 2.0 ** (-(k + 1)))
        mu = mu0 * 2.0 ** k
        n = 0 if basis is None else int(np.count_nonzero(basis.omegas <= mu * (1 + 1e-12)))
        stages.append(StagePlan(k, t0, 0.5 * (t0 + t1), t1, mu, n))
    return Schedule(tuple(stages), float(T), Interval(T * (1.0 - 2.0 ** (-K)), float(T)))


@dataclass(frozen=True)
class HeatState:
    """Modal coefficients at a time.

    ``exact`` optionally carries the same coefficients as ``mpf`` values so
    that amplitudes far below the double-precision range stay positive.
    """

    time: float
    alpha: np.ndarray
    exact: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.alpha))

    def exact_alpha(self) -> list:
        if self.exact is not None:
            return list(self.exact)
        return [mp.mpf(float(x)) for x in self.alpha]

    def decayed(self, eigenvalues, dt: float) -> "HeatState":
        alpha = self.alpha * np.exp(-np.asarray(eigenvalues) * dt)
        exact = None
        if self.exact is not None:
            exact = tuple(a * mp.exp(-mp.mpf(float(l)) * mp.mpf(dt)) for a, l in zip(self.exact, eigenvalues))
        return HeatState(self.time + dt, alpha, exact)


# -- Gram matrices in extended precision ------------------------------------

class GramCache:
    """Spatial Gram of all basis modes on ``omega``, reassembled lazily at higher precision."""

    def __init__(self, basis: Basis, omega_set: MeasurableSet1D):
        self.basis = basis
        self.omega_set = omega_set
        self.form = spatial_gram(basis, omega_set, basis.omegas[-1])
        self._mp = {}

    @property
    def matrix(self) -> np.ndarray:
        return self.form.matrix

    def exact(self, dps: int):
        if self.form.builder is None:
            return None
        if dps not in self._mp:
            self._mp[dps] = self.form.exact(dps)
        return self._mp[dps]

    def eigenvalues_mp(self, dps):
        with mp.workdps(dps):
            if self.basis.is_sine:
                return [(mp.pi * (j + 1)) ** 2 for j in range(len(self.basis))]
            return [mp.mpf(float(w)) ** 2 for w in self.basis.omegas]


def _time_factor(s, L):
    """``int_0^L e^{-s r} dr`` (``mp`` or float)."""
    if s == 0:
        return L
    return -mp.expm1(-s * L) / s if isinstance(s, mp.mpf) else -math.expm1(-s * L) / s


def stage_gramian(basis: Basis, omega_set: MeasurableSet1D, stage: StagePlan, gram: GramCache | None = None,
                  rows=None) -> np.ndarray:
    """``Lambda_ij = G_ij (1 - e^{-(lambda_i+lambda_j) L}) / (lambda_i + lambda_j)`` for the stage's modes.

    ``rows`` optionally selects other row modes (zero-based) for cross terms.
    """
    gram = gram or GramCache(basis, omega_set)
    n = stage.mode_count or int(np.count_nonzero(basis.omegas <= stage.mu_k * (1 + 1e-12)))
    rows = np.arange(n) if rows is None else np.asarray(rows)
    lam = basis.eigenvalues
    s = lam[rows][:, None] + lam[None, :n]
    return gram.matrix[np.ix_(rows, np.arange(n))] * (-np.expm1(-s * stage.active_length) / s)


def _stage_gramian_mp(gram: GramCache, n: int, J: int, L: float, dps: int):
    with mp.workdps(dps):
        G = gram.exact(dps)
        lam = gram.eigenvalues_mp(dps)
        Lm = mp.mpf(L)
        Lam = mp.matrix(J, n)
        for i in range(J):
            for j in range(n):
                Lam[i, j] = G[i, j] * _time_factor(lam[i] + lam[j], Lm)
        return Lam


@dataclass(frozen=True)
class StageResult:
    c: np.ndarray
    cost: float
    state_after_active: HeatState
    residual: float
    regularized: bool = False
    dps: int = 0
    cost_exact: object = field(default=None, compare=False, repr=False)


def _solve_mp(Lam_full, n, d_mp, dps):
    with mp.workdps(dps):
        A = Lam_full[:n, :n]
        c = mp.lu_solve(A, -d_mp)
        return c


def stage_control(state: HeatState, stage: StagePlan, basis: Basis, omega_set: MeasurableSet1D,
                  gram: GramCache | None = None) -> StageResult:
    """Coefficients ``c`` with ``Lambda c = -d``, the stage cost ``sqrt(c^T Lambda c)`` and the state at ``active_end``.

    ``d_i = e^{-lambda_i L} alpha_i`` is the free evolution at the end of the
    active half. Modes above ``mu_k`` pick up the cross terms of the same
    source. For the sine basis the solve runs in extended precision with the
    digits raised until two precisions agree; otherwise a double-precision
    Cholesky solve is used, with Tikhonov damping if ``Lambda`` is too
    ill-conditioned.
    """
    gram = gram or GramCache(basis, omega_set)
    J = len(basis)
    alpha = state.alpha
    if alpha.shape != (J,):
        raise ValueError(f"state has {alpha.size} modes, basis has {J}")
    n = stage.mode_count or int(np.count_nonzero(basis.omegas <= stage.mu_k * (1 + 1e-12)))
    L = stage.active_length
    lam = basis.eigenvalues
    free = alpha * np.exp(-lam * L)

    if gram.form.builder is not None:
        return _stage_control_mp(state, stage, gram, n, J, L)

    d = free[:n]
    dnorm = float(np.linalg.norm(d))
    if dnorm == 0.0:
        return StageResult(np.zeros(n), 0.0, HeatState(stage.active_end, free), 0.0)

    Lam_full = stage_gramian(basis, omega_set, stage, gram, rows=np.arange(J))
    A = Lam_full[:n]
    evals = np.linalg.eigvalsh(A)
    regularized = evals[0] <= evals[-1] / TIKHONOV_COND
    if regularized:
        A_solve = A + 1e-12 * evals[-1] * np.eye(n)
    else:
        A_solve = A
    c = np.linalg.solve(A_solve, -d)
    after = free + Lam_full @ c
    resid = float(np.linalg.norm(after[:n]))
    tol = (REGULARIZED_TOL if regularized else ANNIHILATION_TOL) * dnorm
    if resid > tol:
        raise ControlSolveError(f"annihilation residual {resid:.3e} exceeds {tol:.3e}")
    cost = float(math.sqrt(max(c @ A @ c, 0.0)))
    return StageResult(c, cost, HeatState(stage.active_end, after), resid, bool(regularized))


def _stage_control_mp(state, stage, gram, n, J, L):
    lam_mp = gram.eigenvalues_mp(60)
    with mp.workdps(60):
        free = [a * mp.exp(-l * mp.mpf(L)) for a, l in zip(state.exact_alpha(), lam_mp)]
        dnorm = mp.sqrt(mp.fsum(x ** 2 for x in free[:n]))
    if dnorm == 0:
        after = np.array([float(x) for x in free])
        return StageResult(np.zeros(n), 0.0, HeatState(stage.active_end, after, tuple(free)), 0.0,
                           cost_exact=mp.mpf(0))
    dps = 30 + 4 * n
    prev = None
    while True:
        if dps > MAX_DPS:
            raise ControlSolveError("extended-precision solve did not stabilize")
        Lam = _stage_gramian_mp(gram, n, J, L, dps)
        with mp.workdps(dps):
            lam = gram.eigenvalues_mp(dps)
            free = [a * mp.exp(-l * mp.mpf(L)) for a, l in zip(state.exact_alpha(), lam)]
            c = _solve_mp(Lam, n, mp.matrix(free[:n]), dps)
            if prev is not None and mp.norm(c - prev) <= mp.mpf(10) ** -14 * mp.norm(c):
                break
            prev = c
        dps = int(dps * 1.5)
    with mp.workdps(dps):
        after = mp.matrix(free) + Lam * c
        resid = mp.norm(after[:n])
        cost2 = mp.fsum(c[i] * mp.fsum(Lam[i, j] * c[j] for j in range(n)) for i in range(n))
        cost = mp.sqrt(max(cost2, 0))
        exact = tuple(+after[i] for i in range(J))
        dn = mp.sqrt(mp.fsum(x ** 2 for x in free[:n]))
        if resid > ANNIHILATION_TOL * dn:
            raise ControlSolveError(f"annihilation residual {float(resid):.3e} exceeds tolerance")
        rel = float(resid / dn)
    alpha_after = np.array([float(x) for x in exact])
    c_f = np.array([float(x) for x in c])
    return StageResult(c_f, float(cost), HeatState(stage.active_end, alpha_after, exact), rel * float(dn), False,
                       dps, cost)


# -- full synthesis ------------------------------------------------------------

@dataclass(frozen=True)
class ControlFunction:
    """Per-stage coefficients of the control; zero outside active halves."""

    basis: Basis
    omega_set: MeasurableSet1D
    schedule: Schedule
    coefficients: tuple  # one array per stage, length = stage mode count

    def stage_at(self, t: float):
        for st, c in zip(self.schedule.stages, self.coefficients):
            if st.t_start <= t <= st.active_end:
                return st, c
        return None, None

    def __call__(self, x, t: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        st, c = self.stage_at(t)
        if st is None or not len(c):
            return np.zeros_like(x)
        lam = self.basis.eigenvalues[:len(c)]
        w = c * np.exp(-lam * (st.active_end - t))
        vals = w @ self.basis.truncate(len(c)).evaluate(x.ravel())
        return (self.omega_set.contains(x.ravel()) * vals).reshape(x.shape)


@dataclass(frozen=True)
class SynthesisResult:
    control: ControlFunction
    trace: list
    cost_total: float
    ratio: float
    initial_state: HeatState
    final_state: HeatState
    stage_costs: tuple
    stage_residuals: tuple
    gram: GramCache = field(repr=False, compare=False, default=None)
    stage_costs_exact: tuple = field(repr=False, compare=False, default=())

    def low_projection_norm(self, mu: float | None = None) -> float:
        mu = self.control.schedule.stages[-1].mu_k if mu is None else mu
        n = int(np.count_nonzero(self.control.basis.omegas <= mu * (1 + 1e-12)))
        return float(np.linalg.norm(self.final_state.alpha[:n]))


def active_response(alpha0, lam, G_rows, c, L, tau):
    """Modal state ``tau`` into an active half of length ``L`` (float closed form).

    ``alpha_j(tau) = e^{-lambda_j tau} alpha_j + sum_i G_ji c_i e^{-lambda_i (L - tau)}
    (1 - e^{-(lambda_i + lambda_j) tau}) / (lambda_i + lambda_j)``.
    """
    n = len(c)
    if n == 0:
        return alpha0 * np.exp(-lam * tau)
    s = lam[:, None] + lam[None, :n]
    kernel = G_rows[:, :n] * np.exp(-lam[None, :n] * (L - tau)) * (-np.expm1(-s * tau) / s)
    return alpha0 * np.exp(-lam * tau) + kernel @ c


def synthesize(u0: HeatState, T: float, omega_set: MeasurableSet1D, mu0: float, K: int, basis: Basis,
               samples_per_phase: int = 4, min_phase: float | None = None) -> SynthesisResult:
    """Run all stages and the tail; returns the control, an ``(t, ||u||, stage, cumulative_cost)`` trace and costs.

    The trace samples each phase at ``samples_per_phase`` interior times using
    the closed-form modal response.
    """
    schedule = make_schedule(T, mu0, K, basis, min_phase)
    if u0.alpha.shape != (len(basis),):
        raise ValueError("initial state and basis sizes differ")
    gram = GramCache(basis, omega_set)
    lam = basis.eigenvalues
    exact = tuple(mp.mpf(float(x)) for x in u0.alpha) if gram.form.builder is not None else None
    state = HeatState(0.0, u0.alpha, exact)
    trace = [(0.0, state.norm, 0, 0.0)]
    costs, resids, coeffs, exact_costs = [], [], [], []
    cum2 = 0.0
    for st in schedule.stages:
        res = stage_control(state, st, basis, omega_set, gram)
        exact_costs.append(res.cost_exact if res.cost_exact is not None else mp.mpf(res.cost))
        for tau in np.linspace(0, st.active_length, samples_per_phase + 2)[1:-1]:
            a = active_response(state.alpha, lam, gram.matrix, res.c, st.active_length, tau)
            trace.append((st.t_start + tau, float(np.linalg.norm(a)), st.index, math.sqrt(cum2)))
        cum2 += res.cost ** 2
        state = res.state_after_active
        trace.append((st.active_end, state.norm, st.index, math.sqrt(cum2)))
        for tau in np.linspace(0, st.passive_length, samples_per_phase + 2)[1:]:
            trace.append((st.active_end + tau, state.decayed(lam, tau).norm, st.index, math.sqrt(cum2)))
        state = state.decayed(lam, st.passive_length)
        state = HeatState(st.t_end, state.alpha, state.exact)
        costs.append(res.cost)
        resids.append(res.residual)
        coeffs.append(res.c)
    tail = schedule.tail.length
    for tau in np.linspace(0, tail, samples_per_phase + 2)[1:]:
        trace.append((schedule.tail.lo + tau, state.decayed(lam, tau).norm, K, math.sqrt(cum2)))
    final = HeatState(T, state.decayed(lam, tail).alpha)
    total = math.sqrt(cum2)
    n0 = u0.norm
    ratio = total / n0 if n0 > 0 else 0.0
    control = ControlFunction(basis, omega_set, schedule, tuple(coeffs))
    return SynthesisResult(control, trace, total, ratio, u0, final, tuple(costs), tuple(resids), gram,
                           tuple(exact_costs))


@dataclass(frozen=True)
class CostAudit:
    stage_costs: tuple
    N_eff: float
    peak_stage: int
    ratios: tuple
    decays_after_peak: bool


def cost_audit(run: SynthesisResult) -> CostAudit:
    """Per-stage costs, the observed cost ratio and whether costs shrink after their maximum."""
    exact = list(run.stage_costs_exact) or [mp.mpf(c) for c in run.stage_costs]
    peak = max(range(len(exact)), key=lambda i: exact[i]) if exact else 0
    if not any(exact):
        return CostAudit(tuple(map(float, run.stage_costs)), float(run.ratio), 0, (), True)
    # ratios are formed from the extended-precision costs, which do not underflow
    ratios = tuple(float(b / a) if a != 0 else (0.0 if b == 0 else math.inf) for a, b in zip(exact[:-1], exact[1:]))
    decays = all(r < 1.0 for r in ratios[peak:])
    return CostAudit(tuple(map(float, run.stage_costs)), float(run.ratio), peak, ratios, decays)
