import numpy as np
import pytest

from nullctrl.falsify import _sup_on_unit_interval, falsify, family_of, polynomial_trial, trig_trial


def test_exact_sup_normalization():
    # T_4 has sup 1 at five points of [-1, 1]
    assert _sup_on_unit_interval([1, 0, -8, 0, 8]) == pytest.approx(1.0, rel=1e-12)
    assert _sup_on_unit_interval([0.3]) == pytest.approx(0.3)
    assert _sup_on_unit_interval([0, -2]) == pytest.approx(2.0)
    c = np.random.default_rng(2).standard_normal(9)
    x = np.linspace(-1, 1, 200001)
    assert _sup_on_unit_interval(c) >= np.abs(np.polynomial.polynomial.polyval(x, c)).max() * (1 - 1e-12)


def test_family_schedule():
    fams = [family_of(i, 10) for i in range(20)]
    assert fams.count("trig-exponential") == 2 and fams[9] == "trig-exponential"
    assert family_of(9, 0) == "polynomial"


def test_single_trials_are_sound():
    rng = np.random.default_rng(0)
    for i in range(20):
        r = polynomial_trial(rng, i)
        assert r.margin >= 0 and r.true_sup <= 1.0 + 1e-12
    r = trig_trial(rng, 0)
    assert r.margin >= 0


def test_falsify_is_reproducible_and_worker_independent():
    a = falsify(25, seed=4, trig_every=5)
    b = falsify(25, seed=4, trig_every=5, workers=2)
    assert [r.row() for r in a] == [r.row() for r in b]
    assert [r.trial for r in a] == list(range(25))
    assert min(r.margin for r in a) >= 0
