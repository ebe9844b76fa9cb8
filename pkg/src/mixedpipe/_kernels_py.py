"""Vectorised numpy kernels for circular pipes (fallback backend).

Mirrors ``_kernels.pyx`` function by function. All arrays are float64
except the indicator ``E`` (any integer dtype). Circular sections use the
wetted half-angle ``alpha`` (0 = dry, pi = full): with ``a = A / R**2``,
``a = alpha - sin(alpha) cos(alpha)`` and the free-surface level is
``-R cos(alpha)``.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

_PI = np.pi
_SERIES_X = 0.5
_MAX_NEWTON = 60
# alpha is ill-conditioned near pi, so convergence is judged on the area
# residual, at the rounding level of the segment formula in use
_RES_TOL = 4.5e-16


def _segment(alpha, s, c):
    """alpha - sin(alpha) cos(alpha), with a series near 0 to avoid cancellation."""
    x = 2.0 * alpha
    x2 = x * x
    series = x * x2 * (1.0 / 6.0 - x2 * (1.0 / 120.0 - x2 * (1.0 / 5040.0 - x2 * (1.0 / 362880.0 - x2 * (1.0 / 39916800.0 - x2 * (1.0 / 6227020800.0 - x2 * (1.0 / 1307674368000.0 - x2 / 355687428096000.0))))))) * 0.5
    return np.where(x < _SERIES_X, series, alpha - s * c)


def circle_alpha(a):
    """Half-angle alpha in [0, pi] with segment(alpha) = a, a in [0, pi]."""
    a = np.clip(np.asarray(a, dtype=float), 0.0, _PI)
    low = a <= 0.5 * _PI
    t = np.cbrt(1.5 * np.where(low, a, _PI - a))
    guess = t * (1.0 + t * t / 15.0)
    alpha = np.where(low, guess, _PI - guess)
    lo = np.zeros_like(a)
    hi = np.full_like(a, _PI)
    active = (a > 0.0) & (a < _PI)
    for _ in range(_MAX_NEWTON):
        if not active.any():
            break
        s = np.sin(alpha)
        c = np.cos(alpha)
        f = _segment(alpha, s, c) - a
        active &= np.abs(f) > _RES_TOL * np.where(2.0 * alpha < _SERIES_X, a, 2.0 * alpha)
        if not active.any():
            break
        lo = np.where(f < 0.0, alpha, lo)
        hi = np.where(f > 0.0, alpha, hi)
        d1 = 2.0 * s * s
        d2 = 4.0 * s * c
        den = 2.0 * d1 * d1 - f * d2
        with np.errstate(divide="ignore", invalid="ignore"):
            nxt = alpha - 2.0 * f * d1 / den
        bad = ~((nxt >= lo) & (nxt <= hi))
        nxt = np.where(bad, 0.5 * (lo + hi), nxt)
        step = np.abs(nxt - alpha)
        alpha = np.where(active, nxt, alpha)
        active &= step > 1e-15
    alpha = np.where(a <= 0.0, 0.0, alpha)
    alpha = np.where(a >= _PI, _PI, alpha)
    return alpha


def section_state(A, E, R, cos_theta, c2, g):
    """Closure quantities for each cell.

    Returns ``(wet, level, alpha, I1, p, cs)``: physical wet area, water
    level, wetted half-angle, hydrostatic integral, mixed pressure and
    wave speed.
    """
    A = np.asarray(A, dtype=float)
    press = np.asarray(E) != 0
    R = np.asarray(R, dtype=float)
    R2 = R * R
    S = _PI * R2
    alpha = np.where(press, _PI, circle_alpha(np.where(press, 0.0, A) / R2))
    sin_a = np.where(press, 0.0, np.sin(alpha))
    wet = np.where(press, S, A)
    level = np.where(press, R, -R * np.cos(alpha))
    I1 = np.where(press, _PI * R2 * R, level * A + (2.0 / 3.0) * R2 * R * sin_a**3)
    p = c2 * (A - wet) + g * I1 * cos_theta
    T = 2.0 * R * sin_a
    with np.errstate(divide="ignore", invalid="ignore"):
        cs_fs = np.sqrt(np.where(T > 0.0, g * A * cos_theta / T, 0.0))
    cs = np.where(press, np.sqrt(c2), cs_fs)
    return wet, level, alpha, I1, p, cs


def advance(A, Q, E, ghost_left, ghost_right, R, S, dSdX, dRdX, sin_t, cos_t, dcos_t,
            dt, dx, c2, g, inv_ks2, floor_frac):
    """One forward-Euler Rusanov step with centred sources.

    ``ghost_left``/``ghost_right`` are ``(A, Q, E)`` triples sharing the
    geometry of the adjacent cell. Returns ``(A_new, Q_new, bad)`` where
    ``bad`` is the index of the first cell whose area went negative, or -1.
    """
    n = A.shape[0]
    Ae = np.empty(n + 2)
    Qe = np.empty(n + 2)
    Ee = np.empty(n + 2, dtype=np.int8)
    Ae[1:-1], Qe[1:-1], Ee[1:-1] = A, Q, E
    Ae[0], Qe[0], Ee[0] = ghost_left
    Ae[-1], Qe[-1], Ee[-1] = ghost_right
    Re = np.concatenate(([R[0]], R, [R[-1]]))
    ce = np.concatenate(([cos_t[0]], cos_t, [cos_t[-1]]))

    wet, level, alpha, I1, p, cs = section_state(Ae, Ee, Re, ce, c2, g)
    u = Qe / Ae
    fq = Qe * u + p
    speed = np.abs(u) + cs
    s = np.maximum(speed[:-1], speed[1:])
    FA = 0.5 * (Qe[:-1] + Qe[1:]) - 0.5 * s * (Ae[1:] - Ae[:-1])
    FQ = 0.5 * (fq[:-1] + fq[1:]) - 0.5 * s * (Qe[1:] - Qe[:-1])

    w = wet[1:-1]
    lv = level[1:-1]
    al = alpha[1:-1]
    sin_a = np.where(np.asarray(E) != 0, 0.0, np.sin(al))
    I2 = 2.0 * R * dRdX * (lv * al + R * sin_a)
    zb = lv - I1[1:-1] / w
    src = -g * A * sin_t + c2 * (A / w - 1.0) * dSdX + g * I2 * cos_t - g * A * zb * dcos_t

    r = dt / dx
    A_new = A - r * (FA[1:] - FA[:-1])
    Q_star = Q - r * (FQ[1:] - FQ[:-1]) + dt * src

    perim = 2.0 * R * al
    K = inv_ks2 * (perim / w) ** (4.0 / 3.0)
    floor = floor_frac * S
    neg = A_new < 0.0
    bad = int(np.argmax(neg)) if neg.any() else -1
    dry = A_new < floor
    A_safe = np.where(dry, floor, A_new)
    Q_new = Q_star / (1.0 + dt * g * K * np.abs(Q_star) / A_safe)
    Q_new = np.where(dry, 0.0, Q_new)
    return A_safe, Q_new, bad
