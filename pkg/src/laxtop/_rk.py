"""Dormand-Prince 5(4) with PI step control and quartic dense output.

Pure-Python reference implementation. ``_kernels.pyx`` mirrors the same
step logic for the Euler-Poisson right-hand sides; both must accept and
reject the same steps up to floating-point roundoff.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "IntegrationError",
    "StepSizeUnderflow",
    "Solution",
    "dopri5",
    "ep3_rhs_flat",
    "epn_rhs_flat",
    "integrate_ep3",
    "integrate_epn",
]

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# difference between the 5th and 4th order weights, including the FSAL stage
E = np.array(
    [-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40]
)
# Shampine's quartic continuous extension
P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0
BETA = 0.04
EXPO1 = 0.2 - 0.75 * BETA


class IntegrationError(RuntimeError):
    pass


class StepSizeUnderflow(IntegrationError):
    def __init__(self, t: float, h: float):
        super().__init__(f"step size underflow at t={t!r} (h={h:.3e})")
        self.t = t
        self.h = h


@dataclass
class Solution:
    t: np.ndarray
    y: np.ndarray
    nsteps: int
    nrejected: int
    t_stop: float
    y_stop: np.ndarray
    stopped: bool = False


def _norm(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(x * x)))


def _initial_step(fun, t0, y0, f0, rtol, atol, t_span) -> float:
    scale = atol + rtol * np.abs(y0)
    d0 = _norm(y0 / scale)
    d1 = _norm(f0 / scale)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, t_span)
    f1 = fun(t0 + h0, y0 + h0 * f0)
    d2 = _norm((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, t_span)


def dopri5(
    fun: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0,
    t_eval,
    rtol: float,
    atol: float,
    max_steps: int = 10_000_000,
    stop: Optional[Callable[[float, np.ndarray], bool]] = None,
) -> Solution:
    """Integrate ``y' = fun(t, y)`` from ``t0`` and sample at ``t_eval``.

    ``t_eval`` must be nondecreasing and start at or after ``t0``; the last
    entry is the final time. If ``stop(t, y)`` returns true after an
    accepted step, integration halts there and only the samples reached so
    far are returned.
    """
    y = np.array(y0, dtype=float)
    t_eval = np.asarray(t_eval, dtype=float)
    n_out = t_eval.shape[0]
    out = np.empty((n_out, y.shape[0]))
    t = float(t0)
    t_end = float(t_eval[-1]) if n_out else t
    k = 0
    while k < n_out and t_eval[k] <= t:
        out[k] = y
        k += 1
    if k == n_out:
        return Solution(t_eval, out, 0, 0, t, y)

    K = np.empty((7, y.shape[0]))
    f = fun(t, y)
    h = _initial_step(fun, t, y, f, rtol, atol, t_end - t)
    facold = 1e-4
    nsteps = nrejected = 0
    last_rejected = False
    eps = np.finfo(float).eps
    while t < t_end:
        if nsteps >= max_steps:
            raise IntegrationError(f"exceeded {max_steps} steps at t={t!r}")
        if 1.01 * h >= t_end - t:
            h = t_end - t
        if h <= 10 * eps * abs(t):
            raise StepSizeUnderflow(t, h)
        K[0] = f
        for s in range(1, 6):
            K[s] = fun(t + C[s] * h, y + h * (np.dot(A[s], K[:s])))
        y_new = y + h * (B @ K[:6])
        t_new = t + h if h < t_end - t else t_end
        f_new = fun(t_new, y_new)
        K[6] = f_new
        nsteps += 1
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = _norm(h * (E @ K) / sc)
        fac11 = err**EXPO1
        if err <= 1.0:
            fac = fac11 / facold**BETA
            fac = min(1.0 / FAC_MIN, max(1.0 / FAC_MAX, fac / SAFETY))
            h_new = h / fac
            facold = max(err, 1e-4)
            if last_rejected:
                h_new = min(h_new, h)
            last_rejected = False
            if k < n_out and t_eval[k] <= t_new:
                Q = K.T @ P
                while k < n_out and t_eval[k] <= t_new:
                    if t_eval[k] == t_new:
                        out[k] = y_new
                    else:
                        th = (t_eval[k] - t) / h
                        out[k] = y + h * (Q @ np.array([th, th * th, th**3, th**4]))
                    k += 1
            t, y, f = t_new, y_new, f_new
            h = h_new
            if stop is not None and stop(t, y):
                return Solution(t_eval[:k], out[:k], nsteps, nrejected, t, y, True)
        else:
            nrejected += 1
            last_rejected = True
            h = h / min(1.0 / FAC_MIN, fac11 / SAFETY)
    return Solution(t_eval, out, nsteps, nrejected, t, y)


def ep3_rhs_flat(y: np.ndarray, prm: np.ndarray) -> np.ndarray:
    """3D Euler-Poisson field; ``y = (M, gamma)``, ``prm = (I, r_C, P)``."""
    M, g = y[:3], y[3:]
    w = (M - prm[6:9]) / prm[0:3]
    return np.concatenate((np.cross(M, w) + np.cross(g, prm[3:6]), np.cross(g, w)))


def _pairs(n: int):
    return np.triu_indices(n, 1)


def epn_rhs_flat(y: np.ndarray, inertia: np.ndarray, X: np.ndarray) -> np.ndarray:
    """n-dimensional field on lexicographic pair coordinates ``(M, Gamma)``."""
    n = inertia.shape[0]
    iu = _pairs(n)
    m = iu[0].shape[0]
    M = np.zeros((n, n))
    G = np.zeros((n, n))
    M[iu] = y[:m]
    G[iu] = y[m:]
    M -= M.T
    G -= G.T
    W = M / (inertia[:, None] + inertia[None, :])
    dM = M @ W - W @ M + G @ X - X @ G
    dG = G @ W - W @ G
    return np.concatenate((dM[iu], dG[iu]))


def integrate_ep3(prm, y0, t_eval, rtol, atol, max_steps=10_000_000):
    prm = np.asarray(prm, dtype=float)
    return dopri5(lambda t, y: ep3_rhs_flat(y, prm), 0.0, y0, t_eval, rtol, atol, max_steps)


def integrate_epn(inertia, X, y0, t_eval, rtol, atol, max_steps=10_000_000):
    inertia = np.asarray(inertia, dtype=float)
    X = np.asarray(X, dtype=float)
    return dopri5(lambda t, y: epn_rhs_flat(y, inertia, X), 0.0, y0, t_eval, rtol, atol, max_steps)
