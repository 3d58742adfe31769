import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import dblquad

from nullctrl.observability import (
    DegenerateFitError,
    ExtendedFunction,
    ModeCoefficients,
    QuadraticForm,
    UnobservableError,
    constant_sweep,
    fit_rate,
    lr_form,
    modes_below,
    quadrature_spatial_gram,
    sinh_floor_check,
    spatial_gram,
    spectral_constant,
)
from nullctrl.sets import MeasurableSet1D, fat_cantor
from nullctrl.spectral_basis import DensitySpec, sine_basis, sturm_liouville_basis
from oracles import sine_gram_quad


def test_full_interval_is_orthonormal():
    b = sine_basis(16)
    q = spatial_gram(b, MeasurableSet1D.from_pairs([[0, 1]]), 16 * math.pi)
    np.testing.assert_allclose(q.matrix, np.eye(16), atol=1e-14)
    assert spectral_constant(q).lambda_min == pytest.approx(1.0, abs=1e-10)


def test_half_interval_two_modes_closed_form():
    b = sine_basis(4)
    q = spatial_gram(b, MeasurableSet1D.from_pairs([[0, 0.5]]), 0, modes=[1, 2])
    lam, C = spectral_constant(q)
    assert lam == pytest.approx(0.5 - 4 / (3 * math.pi), abs=1e-10)
    assert C == pytest.approx(1 / lam)


def test_sine_gram_matches_quadrature():
    b = sine_basis(8)
    E = MeasurableSet1D.from_pairs([[0.1, 0.15], [0.4, 0.5], [0.8, 0.85]])
    q = spatial_gram(b, E, 8 * math.pi)
    np.testing.assert_allclose(q.matrix, sine_gram_quad(range(1, 9), E.as_pairs()), atol=1e-13)
    np.testing.assert_allclose(q.matrix, quadrature_spatial_gram(b, E, 8 * math.pi), atol=1e-13)


def test_fat_cantor_gram_is_psd_and_subadditive():
    b = sine_basis(6)
    E = fat_cantor(3, 0.25)
    q = spatial_gram(b, E, 6 * math.pi)
    full = spatial_gram(b, MeasurableSet1D.from_pairs([[0, 1]]), 6 * math.pi)
    assert np.linalg.eigvalsh(q.matrix).min() > 0
    assert np.linalg.eigvalsh(full.matrix - q.matrix).min() > -1e-13


def test_general_density_uses_quadrature():
    b = sturm_liouville_basis(DensitySpec([0, 0.5, 1], [1, 4]), 6)
    E = MeasurableSet1D.from_pairs([[0, 1]])
    q = spatial_gram(b, E, b.omegas[-1])
    assert q.builder is None
    # int e_j e_k dx is not the identity: normalization is in L^2(rho dx)
    assert np.abs(q.matrix - np.eye(6)).max() > 1e-3
    lam, _ = spectral_constant(q)
    assert 0 < lam <= 1


@given(st.floats(0.05, 0.5), st.floats(0.0, 0.5))
def test_monotone_in_the_observation_set(length, start):
    b = sine_basis(6)
    lo = min(start, 1 - length)
    small = MeasurableSet1D.from_pairs([[lo, lo + length / 2]])
    big = MeasurableSet1D.from_pairs([[lo, lo + length]])
    mu = 6 * math.pi
    assert spectral_constant(spatial_gram(b, small, mu)).C >= spectral_constant(spatial_gram(b, big, mu)).C * (1 - 1e-9)


def test_modes_below_and_select():
    b = sine_basis(5)
    np.testing.assert_array_equal(modes_below(b, 3 * math.pi), [0, 1, 2])
    with pytest.raises(ValueError):
        modes_below(b, 1.0)
    with pytest.raises(ValueError):
        modes_below(b, 100.0)
    with pytest.raises(ValueError):
        spatial_gram(b, MeasurableSet1D.from_pairs([[0, 1]]), 0, modes=[0])


def test_singular_float_form_is_rejected():
    q = QuadraticForm(np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([1.0, 2.0]), 2.0)
    with pytest.raises(UnobservableError):
        spectral_constant(q)
    with pytest.raises(ValueError):
        QuadraticForm(np.array([[1.0, 2.0], [0.0, 1.0]]), np.array([1.0, 2.0]), 2.0)


def test_lr_form_matches_direct_integration():
    b = sine_basis(3)
    E = MeasurableSet1D.from_pairs([[0.3, 0.5]])
    q = lr_form(b, E, 2 * math.pi)
    a = np.array([0.3, -0.7])
    bb = np.array([0.2, 0.5])
    u = ExtendedFunction(b, ModeCoefficients(a, bb), 2 * math.pi)
    direct, _ = dblquad(lambda y, x: float(u(x, y)) ** 2, 0.3, 0.5, 0.25, 0.75, epsabs=1e-13, epsrel=1e-11)
    v = np.r_[a, bb]
    assert v @ q.matrix @ v == pytest.approx(direct, rel=1e-9)
    lam, _ = spectral_constant(q)
    assert lam > 0


def test_extended_function_checks_size():
    b = sine_basis(4)
    with pytest.raises(ValueError):
        ExtendedFunction(b, ModeCoefficients([1.0]), 2 * math.pi)
    with pytest.raises(ValueError):
        ModeCoefficients([1.0, 2.0], [1.0])


@given(st.floats(0.1, 20), st.floats(-5, 5), st.floats(-5, 5))
def test_sinh_floor(omega, a, b):
    assert sinh_floor_check(omega, a, b, min(omega, 1.0), omega)


def test_sinh_floor_preconditions():
    with pytest.raises(ValueError):
        sinh_floor_check(1.0, 1.0, 1.0, 2.0, 3.0)


def test_fit_rate():
    mus = np.array([1.0, 2.0, 3.0, 4.0])
    r = fit_rate(np.column_stack([mus, np.exp(2.0 * mus + 1.0)]))
    assert r.N == pytest.approx(2.0) and r.intercept == pytest.approx(1.0)
    assert r.residual < 1e-12 and r.r_squared == pytest.approx(1.0)
    with pytest.raises(DegenerateFitError):
        fit_rate([[1, 1], [2, 2]])
    with pytest.raises(DegenerateFitError):
        fit_rate([[1, 1], [1, 2], [1, 3]])
    with pytest.raises(DegenerateFitError):
        fit_rate([[1, 1], [2, -2], [3, 3]])


def test_constant_grows_with_frequency():
    b = sine_basis(16)
    E = MeasurableSet1D.from_pairs([[0.3, 0.5]])
    rows = constant_sweep(b, E, [4 * math.pi, 8 * math.pi, 12 * math.pi, 16 * math.pi])
    C = [r[3] for r in rows]
    assert all(x <= y for x, y in zip(C, C[1:]))
    assert [r[1] for r in rows] == [4, 8, 12, 16]
