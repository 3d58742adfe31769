import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nullctrl import control as ctl
from nullctrl.control import (
    ControlSolveError,
    GramCache,
    HeatState,
    ScheduleError,
    StagePlan,
    cost_audit,
    make_schedule,
    stage_control,
    stage_gramian,
    synthesize,
)
from nullctrl.sets import MeasurableSet1D
from nullctrl.simulate import propagate_exact
from nullctrl.spectral_basis import DensitySpec, sine_basis, sturm_liouville_basis

FULL = MeasurableSet1D.from_pairs([[0, 1]])
THREE = MeasurableSet1D.from_pairs([[0.1, 0.15], [0.4, 0.5], [0.8, 0.85]])


def single_stage(L=0.1, mu=math.pi):
    return StagePlan(0, 0.0, L, 2 * L, mu, 0)


def test_schedule_examples():
    s = make_schedule(1.0, math.pi, 3)
    assert [(st.t_start, st.t_end) for st in s.stages] == [(0, 0.5), (0.5, 0.75), (0.75, 0.875)]
    assert (s.tail.lo, s.tail.hi) == (0.875, 1.0)
    assert [st.mu_k for st in s.stages] == pytest.approx([math.pi, 2 * math.pi, 4 * math.pi])
    s1 = make_schedule(2.0, 4.0, 1)
    assert (s1.stages[0].t_start, s1.stages[0].t_end, s1.tail.lo) == (0, 1.0, 1.0)
    assert s1.stages[0].active_end == 0.5


@given(st.floats(0.01, 100), st.integers(1, 30))
def test_schedule_partitions_time(T, K):
    s = make_schedule(T, 1.0, K)
    total = sum(st.t_end - st.t_start for st in s.stages) + s.tail.length
    assert total == pytest.approx(T, rel=1e-14)
    for a, b in zip(s.stages, s.stages[1:]):
        assert a.t_end == b.t_start


def test_schedule_errors():
    with pytest.raises(ScheduleError):
        make_schedule(0.0, 1.0, 1)
    with pytest.raises(ScheduleError):
        make_schedule(1.0, 1.0, 0)
    with pytest.raises(ScheduleError):
        make_schedule(1.0, 1.0, 3, min_phase=0.1)
    with pytest.raises(ScheduleError):
        make_schedule(1.0, 1.0, 2, basis=sine_basis(4))
    with pytest.raises(ScheduleError):
        StagePlan(0, 0.5, 0.4, 0.6, 1.0)


def test_stage_gramian_scalar():
    b = sine_basis(1)
    Lam = stage_gramian(b, FULL, single_stage())
    assert Lam[0, 0] == pytest.approx((1 - math.exp(-2 * math.pi ** 2 * 0.1)) / (2 * math.pi ** 2), rel=1e-14)
    assert Lam[0, 0] == pytest.approx(0.04362, abs=5e-6)


def test_stage_gramian_diagonal_for_identity_gram():
    b = sine_basis(2)
    Lam = stage_gramian(b, FULL, single_stage(mu=2 * math.pi))
    assert abs(Lam[0, 1]) < 1e-15 and Lam[0, 0] > Lam[1, 1] > 0


@settings(max_examples=100)
@given(st.floats(0, 0.8), st.floats(0.05, 0.2), st.integers(1, 8), st.floats(0.01, 0.3))
def test_stage_gramian_psd(lo, length, n, L):
    b = sine_basis(8)
    E = MeasurableSet1D.from_pairs([[lo, min(1.0, lo + length)]])
    Lam = stage_gramian(b, E, StagePlan(0, 0.0, L, 2 * L, n * math.pi, 0))
    assert np.linalg.eigvalsh(Lam).min() >= -1e-15 * np.abs(Lam).max()


def test_stage_control_single_mode_example():
    b = sine_basis(1)
    r = stage_control(HeatState(0.0, [1.0]), single_stage(), b, FULL)
    d = math.exp(-math.pi ** 2 * 0.1)
    assert d == pytest.approx(0.3727, abs=1e-4)
    Lam = (1 - math.exp(-2 * math.pi ** 2 * 0.1)) / (2 * math.pi ** 2)
    assert r.c[0] == pytest.approx(-d / Lam, rel=1e-12)
    assert r.c[0] == pytest.approx(-8.545, abs=2e-3)
    assert r.cost == pytest.approx(1.785, abs=1e-3)
    assert abs(r.state_after_active.alpha[0]) <= 1e-10 * d


def test_stage_control_zero_state():
    b = sine_basis(3)
    r = stage_control(HeatState(0.0, np.zeros(3)), single_stage(mu=3 * math.pi), b, THREE)
    assert np.all(r.c == 0) and r.cost == 0


def test_stage_control_decoupled_modes():
    b = sine_basis(2)
    st2 = single_stage(mu=2 * math.pi)
    both = stage_control(HeatState(0.0, [1.0, 0.5]), st2, b, FULL)
    lam = b.eigenvalues
    for i, a in enumerate([1.0, 0.5]):
        Lii = (1 - math.exp(-2 * lam[i] * 0.1)) / (2 * lam[i])
        assert both.c[i] == pytest.approx(-a * math.exp(-lam[i] * 0.1) / Lii, rel=1e-12)


def test_stage_control_annihilates_low_modes():
    b = sine_basis(12)
    rng = np.random.default_rng(5)
    a = rng.normal(size=12)
    st6 = single_stage(L=0.05, mu=6 * math.pi)
    r = stage_control(HeatState(0.0, a), st6, b, THREE)
    d = a[:6] * np.exp(-b.eigenvalues[:6] * 0.05)
    assert np.abs(r.state_after_active.alpha[:6]).max() <= 1e-10 * np.linalg.norm(d)
    # high modes pick up exactly the closed-form cross terms
    ctrl = ctl.ControlFunction(b, THREE, ctl.Schedule((st6,), 0.1, ctl.Interval(0.1, 0.1)), (r.c,))
    via_propagate = propagate_exact(HeatState(0.0, a), ctrl, 0.0, 0.05)
    np.testing.assert_allclose(via_propagate.alpha[6:], r.state_after_active.alpha[6:], rtol=1e-9, atol=1e-12)


def test_float_path_matches_extended_precision():
    # the same sine problem solved through a general-density basis takes the float path
    sine = sine_basis(4)
    general = sturm_liouville_basis(DensitySpec.constant(1.0 + 1e-15), 4)
    E = MeasurableSet1D.from_pairs([[0.2, 0.6]])
    stg = single_stage(mu=4 * math.pi)
    a = np.array([1.0, -0.5, 0.25, 0.1])
    r1 = stage_control(HeatState(0.0, a), stg, sine, E)
    r2 = stage_control(HeatState(0.0, a * np.sign(general.pairs[0].A[0])), stg, general, E)
    assert r1.cost == pytest.approx(r2.cost, rel=1e-6)


def test_tikhonov_path(monkeypatch):
    monkeypatch.setattr(ctl, "TIKHONOV_COND", 1.0)
    b = sturm_liouville_basis(DensitySpec([0, 0.5, 1], [1, 2]), 3)
    r = stage_control(HeatState(0.0, [1.0, 0.3, 0.1]), single_stage(mu=b.omegas[-1]), b,
                      MeasurableSet1D.from_pairs([[0.2, 0.7]]))
    assert r.regularized
    assert r.residual <= 1e-8


def test_solve_failure_is_loud(monkeypatch):
    monkeypatch.setattr(ctl, "REGULARIZED_TOL", 0.0)
    monkeypatch.setattr(ctl, "ANNIHILATION_TOL", 0.0)
    monkeypatch.setattr(ctl, "TIKHONOV_COND", 1.0)
    b = sturm_liouville_basis(DensitySpec([0, 0.5, 1], [1, 2]), 3)
    with pytest.raises(ControlSolveError):
        stage_control(HeatState(0.0, [1.0, 0.3, 0.1]), single_stage(mu=b.omegas[-1]), b,
                      MeasurableSet1D.from_pairs([[0.2, 0.7]]))


def test_synthesize_single_mode_kills_everything():
    b = sine_basis(1)
    run = synthesize(HeatState(0.0, [1.0]), 0.4, FULL, math.pi, 1, b)
    assert run.final_state.norm <= 1e-10
    audit = cost_audit(run)
    assert audit.N_eff == pytest.approx(1.785, abs=1e-3)
    assert audit.stage_costs[0] == pytest.approx(audit.N_eff)


def test_synthesize_zero_data():
    b = sine_basis(8)
    run = synthesize(HeatState(0.0, np.zeros(8)), 1.0, THREE, math.pi, 2, b)
    assert run.cost_total == 0 and run.ratio == 0
    assert cost_audit(run).N_eff == 0


def test_synthesize_is_homogeneous():
    b = sine_basis(10)
    rng = np.random.default_rng(8)
    a = rng.normal(size=10)
    r1 = synthesize(HeatState(0.0, a), 1.0, THREE, math.pi, 2, b)
    r2 = synthesize(HeatState(0.0, -3.0 * a), 1.0, THREE, math.pi, 2, b)
    np.testing.assert_allclose(r2.stage_costs, 3.0 * np.array(r1.stage_costs), rtol=1e-10)
    assert r2.cost_total == pytest.approx(3.0 * r1.cost_total, rel=1e-10)


def test_passive_phases_do_not_increase_energy():
    b = sine_basis(10)
    rng = np.random.default_rng(9)
    run = synthesize(HeatState(0.0, rng.normal(size=10)), 1.0, THREE, math.pi, 3, b)
    sched = run.control.schedule
    for st in sched.stages:
        seg = [n for t, n, _, _ in run.trace if st.active_end <= t <= st.t_end]
        assert all(y <= x * (1 + 1e-12) for x, y in zip(seg, seg[1:]))
    tail = [n for t, n, _, _ in run.trace if t >= sched.tail.lo]
    assert all(y <= x * (1 + 1e-12) for x, y in zip(tail, tail[1:]))


def test_trace_matches_propagate_exact():
    b = sine_basis(8)
    a = np.linspace(1, 0.2, 8)
    run = synthesize(HeatState(0.0, a), 1.0, THREE, 2 * math.pi, 2, b)
    st0 = run.control.schedule.stages[0]
    t_mid = [t for t, *_ in run.trace if 0 < t < st0.active_end][0]
    norm_mid = [n for t, n, *_ in run.trace if t == t_mid][0]
    s = propagate_exact(HeatState(0.0, a), run.control, 0.0, t_mid, gram=run.gram.matrix)
    assert s.norm == pytest.approx(norm_mid, rel=1e-10)


def test_larger_set_does_not_cost_more():
    b = sine_basis(12)
    a = np.ones(12) / math.sqrt(12)
    small = MeasurableSet1D.from_pairs([[0.4, 0.5]])
    big = MeasurableSet1D.from_pairs([[0.35, 0.55]])
    for K in (1, 2):
        r_small = synthesize(HeatState(0.0, a), 1.0, small, math.pi, K, b)
        r_big = synthesize(HeatState(0.0, a), 1.0, big, math.pi, K, b)
        assert cost_audit(r_big).N_eff <= cost_audit(r_small).N_eff * (1 + 1e-9)


def test_gram_cache_is_reused():
    g = GramCache(sine_basis(3), THREE)
    assert g.exact(40) is g.exact(40)
    assert len(g.eigenvalues_mp(30)) == 3
