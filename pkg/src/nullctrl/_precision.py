"""Small helpers around mpmath for the ill-conditioned Gram computations."""
from __future__ import annotations

import mpmath as mp
import numpy as np

DEFAULT_DPS = 40
MAX_DPS = 1200


def to_mp(a, dps: int | None = None) -> mp.matrix:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    with mp.workdps(dps or mp.mp.dps):
        return mp.matrix(a.tolist())


def to_numpy(m: mp.matrix) -> np.ndarray:
    return np.array([[float(m[i, j]) for j in range(m.cols)] for i in range(m.rows)], dtype=float)


def sym_min_eig(m: mp.matrix, dps: int):
    """Smallest and largest eigenvalue of a symmetric mp matrix, plus the
    residual ``||A v - lambda v||`` of the smallest eigenpair."""
    with mp.workdps(dps):
        evals, evecs = mp.eigsy(m)
        k = min(range(len(evals)), key=lambda i: evals[i])
        lam = evals[k]
        v = evecs[:, k]
        r = m * v - lam * v
        resid = mp.norm(r)
        return lam, max(evals), resid


def hadamard(a: mp.matrix, b: mp.matrix) -> mp.matrix:
    out = mp.matrix(a.rows, a.cols)
    for i in range(a.rows):
        for j in range(a.cols):
            out[i, j] = a[i, j] * b[i, j]
    return out
