"""Randomized soundness check for the smallness bounds.

Each trial draws a closed-form test function with a verified analyticity
bound, a set ``E`` inside the half ball, runs :func:`theorem3_report` and
compares the bound to a dense-grid sup on the target ball. A trial with
negative ``margin`` is a violation.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analytic_smallness import (
    TestFunction,
    polynomial_analytic_bound,
    taylor_bound_of_mode_sum,
    theorem3_report,
)
from .sets import MeasurableSet1D, RectSet, fat_cantor

CSV_COLUMNS = ("trial", "family", "measE", "epsE", "bound", "true_sup", "margin")


@dataclass(frozen=True)
class TrialResult:
    trial: int
    family: str
    measE: float
    epsE: float
    bound: float
    true_sup: float

    @property
    def margin(self) -> float:
        return self.bound - self.true_sup

    def row(self):
        return (self.trial, self.family, self.measE, self.epsE, self.bound, self.true_sup, self.margin)


def _random_intervals(rng, lo, hi, max_pieces=3):
    k = int(rng.integers(1, max_pieces + 1))
    pts = np.sort(rng.uniform(lo, hi, 2 * k))
    pairs = pts.reshape(-1, 2)
    pairs = pairs[pairs[:, 1] - pairs[:, 0] > 1e-3]
    if not len(pairs):
        mid = rng.uniform(lo + 0.05, hi - 0.05)
        pairs = np.array([[mid - 0.02, mid + 0.02]])
    return MeasurableSet1D.from_pairs(pairs, ambient=(lo, hi))


def _sup_on_unit_interval(c) -> float:
    """``max |p|`` on ``[-1, 1]`` from the endpoints and the real critical points."""
    P = np.polynomial.Polynomial(c)
    crit = P.deriv().roots() if P.degree() > 1 else np.array([])
    crit = crit[np.abs(crit.imag) < 1e-9].real
    pts = np.r_[-1.0, 1.0, crit[np.abs(crit) <= 1.0]]
    return float(np.abs(P(pts)).max())


def polynomial_trial(rng, trial: int, resolution=None) -> TrialResult:
    deg = int(rng.integers(0, 13))
    c = rng.standard_normal(deg + 1)
    f = TestFunction("polynomial", c / _sup_on_unit_interval(c))
    ab = polynomial_analytic_bound(f, R=1.0, rho=0.5)
    if rng.random() < 0.3:
        a = rng.uniform(-0.5, 0.2)
        E = fat_cantor(int(rng.integers(1, 5)), rng.uniform(0.05, 0.3), ambient=(a, a + 0.3))
        E = MeasurableSet1D.from_pairs(E.as_pairs(), ambient=(-0.5, 0.5))
    else:
        E = _random_intervals(rng, -0.5, 0.5)
    rep = theorem3_report(ab, E, f, resolution=resolution)
    x = np.linspace(-0.5, 0.5, 20001)
    true_sup = float(np.abs(f(x)).max())
    return TrialResult(trial, "polynomial", E.measure, rep.eps, rep.bound, true_sup)


def trig_trial(rng, trial: int, resolution=None) -> TrialResult:
    J = int(rng.integers(1, 4))
    ks = np.sort(rng.choice(np.arange(1, 4), size=J, replace=False))
    w = math.pi * ks
    a = rng.standard_normal(J)
    b = rng.standard_normal(J)
    f = TestFunction("trig-exponential", np.vstack([a, b]), w)
    omega = _random_intervals(rng, 0.2, 0.8, max_pieces=2)
    E = RectSet.product(omega, (0.25, 0.75))
    center = (0.5, 0.5)
    R = 2.0 * E.bounding_radius(center)
    ab = taylor_bound_of_mode_sum(a, b, w, strip=5.0, center=center).with_R(R)
    if abs(center[1]) + 2 * R > 5.0:
        raise ValueError("target ball leaves the strip of validity")
    rep = theorem3_report(ab, E, f, resolution=resolution)
    g = np.linspace(-R / 2, R / 2, 301)
    X, Y = np.meshgrid(g, g, indexing="ij")
    inside = X ** 2 + Y ** 2 <= (R / 2) ** 2
    true_sup = float(np.abs(f(center[0] + X[inside], center[1] + Y[inside])).max())
    return TrialResult(trial, "trig-exponential", E.measure, rep.eps, rep.bound, true_sup)


def family_of(trial: int, trig_every: int = 10) -> str:
    return "trig-exponential" if trig_every and trial % trig_every == trig_every - 1 else "polynomial"


def run_trial(args) -> TrialResult:
    trial, seed_seq, trig_every, resolution = args
    rng = np.random.default_rng(seed_seq)
    if family_of(trial, trig_every) == "polynomial":
        return polynomial_trial(rng, trial, resolution)
    return trig_trial(rng, trial, resolution)


def falsify(n_trials: int = 1000, seed: int = 0, trig_every: int = 10, workers: int = 1,
            resolution=None) -> list[TrialResult]:
    """Run ``n_trials`` independent trials; each has its own spawned seed stream.

    Results are ordered by trial index and independent of ``workers``.
    """
    seqs = np.random.SeedSequence(seed).spawn(n_trials)
    jobs = [(i, s, trig_every, resolution) for i, s in enumerate(seqs)]
    if workers <= 1:
        return [run_trial(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_trial, jobs, chunksize=16))
