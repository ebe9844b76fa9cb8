# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for circular pipes; same contract as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, sqrt, fabs, cbrt, pow, M_PI

cnp.import_array()

BACKEND = "cython"

cdef double SERIES_X = 0.5
cdef int MAX_NEWTON = 60
# alpha is ill-conditioned near pi, so convergence is judged on the area
# residual, at the rounding level of the segment formula in use
cdef double RES_TOL = 4.5e-16


cdef inline double _segment(double alpha, double s, double c) noexcept nogil:
    # alpha - sin(alpha) cos(alpha); series near 0 avoids cancellation
    cdef double x = 2.0 * alpha
    cdef double x2 = x * x
    if x < SERIES_X:
        return x * x2 * (1.0 / 6.0 - x2 * (1.0 / 120.0 - x2 * (1.0 / 5040.0 - x2 * (1.0 / 362880.0 - x2 * (1.0 / 39916800.0 - x2 * (1.0 / 6227020800.0 - x2 * (1.0 / 1307674368000.0 - x2 / 355687428096000.0))))))) * 0.5
    return alpha - s * c


cdef inline double _alpha(double a) noexcept nogil:
    cdef double alpha, t, lo = 0.0, hi = M_PI, f, s, c, d1, d2, nxt, step
    cdef int k
    if a <= 0.0:
        return 0.0
    if a >= M_PI:
        return M_PI
    if a <= 0.5 * M_PI:
        t = cbrt(1.5 * a)
        alpha = t * (1.0 + t * t / 15.0)
    else:
        t = cbrt(1.5 * (M_PI - a))
        alpha = M_PI - t * (1.0 + t * t / 15.0)
    for k in range(MAX_NEWTON):
        s = sin(alpha)
        c = cos(alpha)
        f = _segment(alpha, s, c) - a
        if fabs(f) <= RES_TOL * (a if 2.0 * alpha < SERIES_X else 2.0 * alpha):
            break
        if f < 0.0:
            lo = alpha
        else:
            hi = alpha
        d1 = 2.0 * s * s
        d2 = 4.0 * s * c
        nxt = 2.0 * d1 * d1 - f * d2
        if nxt != 0.0:
            nxt = alpha - 2.0 * f * d1 / nxt
        else:
            nxt = lo - 1.0
        if not (nxt >= lo and nxt <= hi):
            nxt = 0.5 * (lo + hi)
        step = fabs(nxt - alpha)
        alpha = nxt
        if step <= 1e-15:
            break
    return alpha


cdef inline void _cell(double A, int E, double R, double cth, double c2, double g,
                       double *wet, double *level, double *alpha, double *I1,
                       double *p, double *cs) noexcept nogil:
    cdef double R2 = R * R, sa, T
    if E != 0:
        alpha[0] = M_PI
        wet[0] = M_PI * R2
        level[0] = R
        I1[0] = M_PI * R2 * R
        cs[0] = sqrt(c2)
    else:
        alpha[0] = _alpha(A / R2)
        sa = sin(alpha[0])
        wet[0] = A
        level[0] = -R * cos(alpha[0])
        I1[0] = level[0] * A + (2.0 / 3.0) * R2 * R * sa * sa * sa
        T = 2.0 * R * sa
        cs[0] = sqrt(g * A * cth / T) if T > 0.0 else 0.0
    p[0] = c2 * (A - wet[0]) + g * I1[0] * cth


def circle_alpha(a):
    cdef const double[::1] av = np.ascontiguousarray(np.atleast_1d(a), dtype=np.float64).ravel()
    cdef Py_ssize_t i, n = av.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _alpha(av[i])
    return out.reshape(np.shape(a))


def section_state(A, E, R, cos_theta, double c2, double g):
    shape = np.broadcast(A, E, R, cos_theta).shape
    cdef const double[::1] Av = np.ascontiguousarray(np.broadcast_to(A, shape), dtype=np.float64).ravel()
    cdef const long[::1] Ev = np.ascontiguousarray(np.broadcast_to(E, shape), dtype=np.int_).ravel()
    cdef const double[::1] Rv = np.ascontiguousarray(np.broadcast_to(R, shape), dtype=np.float64).ravel()
    cdef const double[::1] Cv = np.ascontiguousarray(np.broadcast_to(cos_theta, shape), dtype=np.float64).ravel()
    cdef Py_ssize_t i, n = Av.shape[0]
    outs = [np.empty(n) for _ in range(6)]
    cdef double[::1] wet = outs[0], level = outs[1], alpha = outs[2], I1 = outs[3], p = outs[4], cs = outs[5]
    with nogil:
        for i in range(n):
            _cell(Av[i], <int>Ev[i], Rv[i], Cv[i], c2, g,
                  &wet[i], &level[i], &alpha[i], &I1[i], &p[i], &cs[i])
    return tuple(o.reshape(shape) for o in outs)


def advance(const double[::1] A, const double[::1] Q, E, ghost_left, ghost_right,
            const double[::1] R, const double[::1] S, const double[::1] dSdX, const double[::1] dRdX,
            const double[::1] sin_t, const double[::1] cos_t, const double[::1] dcos_t,
            double dt, double dx, double c2, double g, double inv_ks2, double floor_frac):
    cdef Py_ssize_t n = A.shape[0], i, j
    cdef const long[::1] Ev = np.ascontiguousarray(E, dtype=np.int_)
    cdef double[::1] Ae = np.empty(n + 2), Qe = np.empty(n + 2)
    cdef int[::1] Ee = np.empty(n + 2, dtype=np.intc)
    cdef double[::1] wet = np.empty(n + 2), level = np.empty(n + 2), alpha = np.empty(n + 2)
    cdef double[::1] I1 = np.empty(n + 2), p = np.empty(n + 2), cs = np.empty(n + 2)
    cdef double[::1] FA = np.empty(n + 1), FQ = np.empty(n + 1)
    out_A = np.empty(n)
    out_Q = np.empty(n)
    cdef double[::1] An = out_A, Qn = out_Q
    cdef double uL, uR, sL, sR, s, fqL, fqR, r, sa, I2, zb, src, Qs, K, fl, Rc
    cdef Py_ssize_t bad = -1

    Ae[0] = ghost_left[0]; Qe[0] = ghost_left[1]; Ee[0] = int(ghost_left[2])
    Ae[n + 1] = ghost_right[0]; Qe[n + 1] = ghost_right[1]; Ee[n + 1] = int(ghost_right[2])
    with nogil:
        for i in range(n):
            Ae[i + 1] = A[i]
            Qe[i + 1] = Q[i]
            Ee[i + 1] = <int>Ev[i]
        for j in range(n + 2):
            i = j - 1
            if i < 0:
                i = 0
            elif i > n - 1:
                i = n - 1
            _cell(Ae[j], Ee[j], R[i], cos_t[i], c2, g,
                  &wet[j], &level[j], &alpha[j], &I1[j], &p[j], &cs[j])
        for j in range(n + 1):
            uL = Qe[j] / Ae[j]
            uR = Qe[j + 1] / Ae[j + 1]
            sL = fabs(uL) + cs[j]
            sR = fabs(uR) + cs[j + 1]
            s = sL if sL > sR else sR
            fqL = Qe[j] * uL + p[j]
            fqR = Qe[j + 1] * uR + p[j + 1]
            FA[j] = 0.5 * (Qe[j] + Qe[j + 1]) - 0.5 * s * (Ae[j + 1] - Ae[j])
            FQ[j] = 0.5 * (fqL + fqR) - 0.5 * s * (Qe[j + 1] - Qe[j])
        r = dt / dx
        for i in range(n):
            j = i + 1
            Rc = R[i]
            sa = 0.0 if Ee[j] != 0 else sin(alpha[j])
            I2 = 2.0 * Rc * dRdX[i] * (level[j] * alpha[j] + Rc * sa)
            zb = level[j] - I1[j] / wet[j]
            src = (-g * A[i] * sin_t[i] + c2 * (A[i] / wet[j] - 1.0) * dSdX[i]
                   + g * I2 * cos_t[i] - g * A[i] * zb * dcos_t[i])
            An[i] = A[i] - r * (FA[i + 1] - FA[i])
            Qs = Q[i] - r * (FQ[i + 1] - FQ[i]) + dt * src
            K = inv_ks2 * pow(2.0 * Rc * alpha[j] / wet[j], 4.0 / 3.0)
            fl = floor_frac * S[i]
            if An[i] < 0.0 and bad < 0:
                bad = i
            if An[i] < fl:
                An[i] = fl
                Qn[i] = 0.0
            else:
                Qn[i] = Qs / (1.0 + dt * g * K * fabs(Qs) / An[i])
    return out_A, out_Q, bad
