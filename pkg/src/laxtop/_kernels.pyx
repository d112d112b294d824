# cython: language_level=3
"""Compiled Dormand-Prince 5(4) loop for the Euler-Poisson fields.

Mirrors ``laxtop._rk`` step for step; the Python module is the reference.
Dimension is capped at n=8 (state length 56) by the fixed work buffers.
"""
from libc.math cimport fabs, sqrt, pow, fmin, fmax
from libc.stdlib cimport malloc, free

import numpy as np

from laxtop._rk import IntegrationError, Solution, StepSizeUnderflow

DEF MAXN = 8
DEF MAXDIM = 56

ctypedef void (*rhs_t)(const double* y, double* dy, const double* prm) noexcept nogil

cdef double[6] Cc = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0]
cdef double[6][5] Ac = [
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
]
cdef double[6] Bc = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0,
                     -2187.0 / 6784.0, 11.0 / 84.0]
cdef double[7] Ec = [-71.0 / 57600.0, 0.0, 71.0 / 16695.0, -71.0 / 1920.0,
                     17253.0 / 339200.0, -22.0 / 525.0, 1.0 / 40.0]
cdef double[7][4] Pc = [
    [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0,
     -12715105075.0 / 11282082432.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0,
     87487479700.0 / 32700410799.0],
    [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0,
     -10690763975.0 / 1880347072.0],
    [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0,
     701980252875.0 / 199316789632.0],
    [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0,
     -1453857185.0 / 822651844.0],
    [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0,
     69997945.0 / 29380423.0],
]

cdef double SAFETY = 0.9
cdef double FAC_MIN = 0.2
cdef double FAC_MAX = 10.0
cdef double BETA = 0.04
cdef double EXPO1 = 0.2 - 0.75 * 0.04
cdef double EPS = 2.220446049250313e-16


cdef void rhs3(const double* y, double* dy, const double* prm) noexcept nogil:
    # prm = I1 I2 I3 | x0 y0 z0 | P1 P2 P3
    cdef double w0 = (y[0] - prm[6]) / prm[0]
    cdef double w1 = (y[1] - prm[7]) / prm[1]
    cdef double w2 = (y[2] - prm[8]) / prm[2]
    dy[0] = y[1] * w2 - y[2] * w1 + y[4] * prm[5] - y[5] * prm[4]
    dy[1] = y[2] * w0 - y[0] * w2 + y[5] * prm[3] - y[3] * prm[5]
    dy[2] = y[0] * w1 - y[1] * w0 + y[3] * prm[4] - y[4] * prm[3]
    dy[3] = y[4] * w2 - y[5] * w1
    dy[4] = y[5] * w0 - y[3] * w2
    dy[5] = y[3] * w1 - y[4] * w0


cdef void rhsn(const double* y, double* dy, const double* prm) noexcept nogil:
    # prm = n | I[0..n) | X row-major n*n
    cdef int n = <int>prm[0]
    cdef int m = n * (n - 1) // 2
    cdef const double* I = prm + 1
    cdef const double* X = prm + 1 + n
    cdef double M[MAXN * MAXN]
    cdef double G[MAXN * MAXN]
    cdef double W[MAXN * MAXN]
    cdef int i, j, k, p = 0
    cdef double sM, sG
    for i in range(n):
        M[i * n + i] = 0.0
        G[i * n + i] = 0.0
        W[i * n + i] = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            M[i * n + j] = y[p]
            M[j * n + i] = -y[p]
            G[i * n + j] = y[m + p]
            G[j * n + i] = -y[m + p]
            W[i * n + j] = y[p] / (I[i] + I[j])
            W[j * n + i] = -W[i * n + j]
            p += 1
    p = 0
    for i in range(n):
        for j in range(i + 1, n):
            sM = 0.0
            sG = 0.0
            for k in range(n):
                sM += (M[i * n + k] * W[k * n + j] - W[i * n + k] * M[k * n + j]
                       + G[i * n + k] * X[k * n + j] - X[i * n + k] * G[k * n + j])
                sG += G[i * n + k] * W[k * n + j] - W[i * n + k] * G[k * n + j]
            dy[p] = sM
            dy[m + p] = sG
            p += 1


cdef double wnorm(const double* e, const double* y0, const double* y1,
                  int d, double rtol, double atol, double h) noexcept nogil:
    cdef double s = 0.0, sc, v
    cdef int i
    for i in range(d):
        sc = atol + rtol * fmax(fabs(y0[i]), fabs(y1[i]))
        v = h * e[i] / sc
        s += v * v
    return sqrt(s / d)


cdef object _run(rhs_t f, double* prm, double[::1] y0, double[::1] t_eval,
                 double rtol, double atol, long max_steps):
    cdef int d = y0.shape[0]
    cdef int n_out = t_eval.shape[0]
    if d > MAXDIM:
        raise ValueError("state too large for compiled kernel")
    out_arr = np.empty((n_out, d))
    cdef double[:, ::1] out = out_arr
    cdef double y[MAXDIM]
    cdef double ynew[MAXDIM]
    cdef double ytmp[MAXDIM]
    cdef double ev[MAXDIM]
    cdef double K[7][MAXDIM]
    cdef double Q[MAXDIM][4]
    cdef int i, s, j, k = 0
    cdef double t = 0.0, t_end, h, t_new, err, fac, fac11, facold = 1e-4, h_new, th
    cdef double d0, d1, d2, h0, h1, acc, sc
    cdef long nsteps = 0, nrej = 0
    cdef bint last_rej = False
    for i in range(d):
        y[i] = y0[i]
    while k < n_out and t_eval[k] <= t:
        for i in range(d):
            out[k, i] = y[i]
        k += 1
    if k == n_out:
        return Solution(np.asarray(t_eval), out_arr, 0, 0, t, np.asarray(y0).copy())
    t_end = t_eval[n_out - 1]

    f(y, K[0], prm)
    # initial step, same heuristic as the Python reference
    d0 = 0.0
    d1 = 0.0
    for i in range(d):
        sc = atol + rtol * fabs(y[i])
        d0 += (y[i] / sc) ** 2
        d1 += (K[0][i] / sc) ** 2
    d0 = sqrt(d0 / d)
    d1 = sqrt(d1 / d)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = fmin(h0, t_end - t)
    for i in range(d):
        ytmp[i] = y[i] + h0 * K[0][i]
    f(ytmp, K[1], prm)
    d2 = 0.0
    for i in range(d):
        sc = atol + rtol * fabs(y[i])
        d2 += ((K[1][i] - K[0][i]) / sc) ** 2
    d2 = sqrt(d2 / d) / h0
    if fmax(d1, d2) <= 1e-15:
        h1 = fmax(1e-6, h0 * 1e-3)
    else:
        h1 = pow(0.01 / fmax(d1, d2), 0.2)
    h = fmin(fmin(100.0 * h0, h1), t_end - t)

    while t < t_end:
        if nsteps >= max_steps:
            raise IntegrationError(f"exceeded {max_steps} steps at t={t!r}")
        if 1.01 * h >= t_end - t:
            h = t_end - t
        if h <= 10.0 * EPS * fabs(t):
            raise StepSizeUnderflow(t, h)
        for s in range(1, 6):
            for i in range(d):
                acc = 0.0
                for j in range(s):
                    acc += Ac[s][j] * K[j][i]
                ytmp[i] = y[i] + h * acc
            f(ytmp, K[s], prm)
        for i in range(d):
            acc = 0.0
            for j in range(6):
                acc += Bc[j] * K[j][i]
            ynew[i] = y[i] + h * acc
        t_new = t + h if h < t_end - t else t_end
        f(ynew, K[6], prm)
        nsteps += 1
        for i in range(d):
            acc = 0.0
            for j in range(7):
                acc += Ec[j] * K[j][i]
            ev[i] = acc
        err = wnorm(ev, y, ynew, d, rtol, atol, h)
        fac11 = pow(err, EXPO1)
        if err <= 1.0:
            fac = fac11 / pow(facold, BETA)
            fac = fmin(1.0 / FAC_MIN, fmax(1.0 / FAC_MAX, fac / SAFETY))
            h_new = h / fac
            facold = fmax(err, 1e-4)
            if last_rej:
                h_new = fmin(h_new, h)
            last_rej = False
            if k < n_out and t_eval[k] <= t_new:
                for i in range(d):
                    for s in range(4):
                        acc = 0.0
                        for j in range(7):
                            acc += K[j][i] * Pc[j][s]
                        Q[i][s] = acc
                while k < n_out and t_eval[k] <= t_new:
                    if t_eval[k] == t_new:
                        for i in range(d):
                            out[k, i] = ynew[i]
                    else:
                        th = (t_eval[k] - t) / h
                        for i in range(d):
                            out[k, i] = y[i] + h * (
                                Q[i][0] * th + Q[i][1] * th * th
                                + Q[i][2] * th * th * th + Q[i][3] * th * th * th * th)
                    k += 1
            t = t_new
            for i in range(d):
                y[i] = ynew[i]
                K[0][i] = K[6][i]
            h = h_new
        else:
            nrej += 1
            last_rej = True
            h = h / fmin(1.0 / FAC_MIN, fac11 / SAFETY)
    y_stop = np.array([y[i] for i in range(d)])
    return Solution(np.asarray(t_eval), out_arr, nsteps, nrej, t, y_stop)


def integrate_ep3(prm, y0, t_eval, double rtol, double atol, long max_steps=10_000_000):
    cdef double[::1] p = np.ascontiguousarray(prm, dtype=float)
    if p.shape[0] != 9:
        raise ValueError("ep3 parameters are (I1,I2,I3,x0,y0,z0,P1,P2,P3)")
    return _run(rhs3, &p[0], np.ascontiguousarray(y0, dtype=float),
                np.ascontiguousarray(t_eval, dtype=float), rtol, atol, max_steps)


def integrate_epn(inertia, X, y0, t_eval, double rtol, double atol, long max_steps=10_000_000):
    inertia = np.asarray(inertia, dtype=float)
    n = inertia.shape[0]
    if n > MAXN:
        raise ValueError(f"compiled kernel supports n <= {MAXN}")
    cdef double[::1] p = np.concatenate(([float(n)], inertia, np.asarray(X, dtype=float).ravel()))
    return _run(rhsn, &p[0], np.ascontiguousarray(y0, dtype=float),
                np.ascontiguousarray(t_eval, dtype=float), rtol, atol, max_steps)
