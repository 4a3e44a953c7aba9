"""Numeric kernels: encoded vector fields and the event-aware RK integrator.

Systems are lowered to an ``(ip, fp)`` pair of flat int/float arrays so the
same stepping code runs under numba and under plain numpy (see
:mod:`pwchaos.backends`).  Two families are encoded:

* kind 0 -- cubic two-well halves ``f = (sv*y, sv*c*(x - x^3))`` with linear
  switching ``G = gy*y`` and forcing ``(0, amp*cos(omega*t + phase)*bump)``;
* kind 1 -- bivariate-polynomial halves, polynomial ``G`` and a polynomial
  forcing carrier scaled by the same cosine/bump factor.

The bump is a clamped quintic smoothstep in ``r^2``: identically zero inside
``r_lo``, identically one outside ``r_hi``.  The hard dead zone is what makes
the near-saddle dynamics exactly autonomous, which the deep loop maps rely on.

Integration: Dormand-Prince 5(4) with FSAL, error-per-step control, and
first-trigger monitors for region exit (sign change of ``G``), a radius
crossing, and escape.  Monitor roots are polished by re-stepping from the
step start, so event states carry full integrator accuracy.
"""

from __future__ import annotations

import numpy as np

from .backends import jit

# Dormand-Prince 5(4) tableau (exact rationals).
DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
DP_A = np.zeros((7, 7))
DP_A[1, 0] = 1 / 5
DP_A[2, :2] = (3 / 40, 9 / 40)
DP_A[3, :3] = (44 / 45, -56 / 15, 32 / 9)
DP_A[4, :4] = (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729)
DP_A[5, :5] = (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656)
DP_A[6, :6] = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
DP_B = DP_A[6].copy()
DP_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
                 -17253 / 339200, 22 / 525, -1 / 40])

KIND_CUBIC = 0
KIND_POLY = 1

# fp scalar head, shared by both kinds
FP_AMP, FP_OMEGA, FP_PHASE, FP_RLO2, FP_RHI2 = 0, 1, 2, 3, 4
# cubic-kind extras
FP_SV, FP_CPLUS, FP_CMINUS, FP_GY = 5, 6, 7, 8

# poly-kind slot table: 7 base matrices, then d/dx copies, then d/dy copies
SLOT_FM1, SLOT_FM2, SLOT_FP1, SLOT_FP2, SLOT_G, SLOT_GC1, SLOT_GC2 = range(7)
N_SLOTS = 21

# leg termination statuses
LEG_TEND = 0
LEG_GCROSS = 1
LEG_RADIUS = 2
LEG_ESCAPE = 3
LEG_STEPLIMIT = 4

_CONFIRM_FACTOR = 10.0


@jit
def _poly2(fp, off, nx, ny, x, y):
    acc = 0.0
    for i in range(nx, -1, -1):
        row = 0.0
        base = off + i * (ny + 1)
        for j in range(ny, -1, -1):
            row = row * y + fp[base + j]
        acc = acc * x + row
    return acc


@jit
def _eval_slot(ip, fp, s, x, y):
    nx = ip[1 + 3 * s]
    ny = ip[2 + 3 * s]
    off = ip[3 + 3 * s]
    return _poly2(fp, off, nx, ny, x, y)


@jit
def _bump(fp, x, y):
    """(value, d/du) of the quintic smoothstep in u = x^2 + y^2."""
    rhi2 = fp[FP_RHI2]
    if rhi2 <= 0.0:
        return 1.0, 0.0
    rlo2 = fp[FP_RLO2]
    u = x * x + y * y
    if u <= rlo2:
        return 0.0, 0.0
    if u >= rhi2:
        return 1.0, 0.0
    span = rhi2 - rlo2
    w = (u - rlo2) / span
    s = w * w * w * (10.0 + w * (-15.0 + 6.0 * w))
    ds = 30.0 * w * w * (1.0 - w) * (1.0 - w) / span
    return s, ds


@jit
def g_forcing(t, x, y, eps, ip, fp):
    """eps * g(t, (x, y), eps) as a pair."""
    if eps == 0.0:
        return 0.0, 0.0
    b, _ = _bump(fp, x, y)
    if b == 0.0:
        return 0.0, 0.0
    c = fp[FP_AMP] * np.cos(fp[FP_OMEGA] * t + fp[FP_PHASE]) * b * eps
    if ip[0] == KIND_CUBIC:
        return 0.0, c
    g1 = _eval_slot(ip, fp, SLOT_GC1, x, y)
    g2 = _eval_slot(ip, fp, SLOT_GC2, x, y)
    return c * g1, c * g2


@jit
def f_half(x, y, side, ip, fp):
    """Half-plane field f^side at (x, y); side is +1 or -1."""
    if ip[0] == KIND_CUBIC:
        sv = fp[FP_SV]
        c = fp[FP_CPLUS] if side > 0 else fp[FP_CMINUS]
        return sv * y, sv * c * (x - x * x * x)
    if side > 0:
        return (_eval_slot(ip, fp, SLOT_FP1, x, y),
                _eval_slot(ip, fp, SLOT_FP2, x, y))
    return (_eval_slot(ip, fp, SLOT_FM1, x, y),
            _eval_slot(ip, fp, SLOT_FM2, x, y))


@jit
def field(t, x, y, side, eps, ip, fp):
    f0, f1 = f_half(x, y, side, ip, fp)
    g0, g1 = g_forcing(t, x, y, eps, ip, fp)
    return f0 + g0, f1 + g1


@jit
def switch_value(x, y, ip, fp):
    if ip[0] == KIND_CUBIC:
        return fp[FP_GY] * y
    return _eval_slot(ip, fp, SLOT_G, x, y)


@jit
def switch_grad(x, y, ip, fp):
    if ip[0] == KIND_CUBIC:
        return 0.0, fp[FP_GY]
    return (_eval_slot(ip, fp, SLOT_G + 7, x, y),
            _eval_slot(ip, fp, SLOT_G + 14, x, y))


@jit
def jac_field(t, x, y, side, eps, ip, fp):
    """Jacobian of f^side + eps*g at (t, x, y) as (j00, j01, j10, j11)."""
    if ip[0] == KIND_CUBIC:
        sv = fp[FP_SV]
        c = fp[FP_CPLUS] if side > 0 else fp[FP_CMINUS]
        j00 = 0.0
        j01 = sv
        j10 = sv * c * (1.0 - 3.0 * x * x)
        j11 = 0.0
    else:
        if side > 0:
            s1, s2 = SLOT_FP1, SLOT_FP2
        else:
            s1, s2 = SLOT_FM1, SLOT_FM2
        j00 = _eval_slot(ip, fp, s1 + 7, x, y)
        j01 = _eval_slot(ip, fp, s1 + 14, x, y)
        j10 = _eval_slot(ip, fp, s2 + 7, x, y)
        j11 = _eval_slot(ip, fp, s2 + 14, x, y)
    if eps != 0.0:
        b, db = _bump(fp, x, y)
        if b != 0.0 or db != 0.0:
            c = fp[FP_AMP] * np.cos(fp[FP_OMEGA] * t + fp[FP_PHASE]) * eps
            if ip[0] == KIND_CUBIC:
                g1 = 0.0
                g2 = 1.0
                dg1x = dg1y = dg2x = dg2y = 0.0
            else:
                g1 = _eval_slot(ip, fp, SLOT_GC1, x, y)
                g2 = _eval_slot(ip, fp, SLOT_GC2, x, y)
                dg1x = _eval_slot(ip, fp, SLOT_GC1 + 7, x, y)
                dg1y = _eval_slot(ip, fp, SLOT_GC1 + 14, x, y)
                dg2x = _eval_slot(ip, fp, SLOT_GC2 + 7, x, y)
                dg2y = _eval_slot(ip, fp, SLOT_GC2 + 14, x, y)
            bx = db * 2.0 * x
            by = db * 2.0 * y
            j00 += c * (b * dg1x + g1 * bx)
            j01 += c * (b * dg1y + g1 * by)
            j10 += c * (b * dg2x + g2 * bx)
            j11 += c * (b * dg2y + g2 * by)
    return j00, j01, j10, j11


@jit
def _rhs(t, y, out, n, side, mode, eps, ip, fp):
    """Right-hand side; n = 2 (point) or 4 (point + tangent vector)."""
    F0, F1 = field(t, y[0], y[1], side, eps, ip, fp)
    out[0] = F0
    out[1] = F1
    if mode == 1 and n == 4:
        j00, j01, j10, j11 = jac_field(t, y[0], y[1], side, eps, ip, fp)
        out[2] = j00 * y[2] + j01 * y[3]
        out[3] = j10 * y[2] + j11 * y[3]


@jit
def _dp_step(t, y, h, k, n, side, mode, eps, ip, fp, ynew, yerr):
    """One DP5(4) step of size h; k[0] holds f(t, y) on entry; fills k[6]."""
    ytmp = np.empty(4)
    for s in range(1, 7):
        for i in range(n):
            acc = 0.0
            for j in range(s):
                acc += DP_A[s, j] * k[j, i]
            ytmp[i] = y[i] + h * acc
        _rhs(t + DP_C[s] * h, ytmp, k[s], n, side, mode, eps, ip, fp)
    for i in range(n):
        acc = 0.0
        erracc = 0.0
        for j in range(7):
            acc += DP_B[j] * k[j, i]
            erracc += DP_E[j] * k[j, i]
        ynew[i] = y[i] + h * acc
        yerr[i] = h * erracc
    # stage 6 evaluates f(t + h, ynew): FSAL slot k[6]


@jit
def _err_norm(y, ynew, yerr, n, rtol, atol):
    s = 0.0
    for i in range(n):
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        e = yerr[i] / sc
        s += e * e
    return np.sqrt(s / n)


@jit
def _refine_monitor(t, y, k1, hevt, n, side, mode, eps, ip, fp,
                    which, sgn, rad2, levelc, tol, yout):
    """Locate h* in (0, hevt] where the triggered monitor crosses zero.

    phi(h) = sgn * (G(x(h)) - levelc)      for which = 1,
    phi(h) = sgn * (r^2(x(h)) - rad2)      for which = 2,
    with phi(0) >= 0 > phi(hevt).  Bisection with a secant accelerant; every
    evaluation re-steps from (t, y) so the returned state has full accuracy.
    """
    k = np.empty((7, 4))
    ynew = np.empty(4)
    yerr = np.empty(4)
    for i in range(n):
        k[0, i] = k1[i]

    # work in the scaled step coordinate s = h/hevt in [0, 1] so that forward
    # and backward steps refine identically
    if which == 1:
        flo = sgn * (switch_value(y[0], y[1], ip, fp) - levelc)
    else:
        flo = sgn * (y[0] * y[0] + y[1] * y[1] - rad2)
    lo = 0.0
    hi = 1.0
    _dp_step(t, y, hevt, k, n, side, mode, eps, ip, fp, ynew, yerr)
    if which == 1:
        fhi = sgn * (switch_value(ynew[0], ynew[1], ip, fp) - levelc)
    else:
        fhi = sgn * (ynew[0] * ynew[0] + ynew[1] * ynew[1] - rad2)
    sbest = hi
    for _ in range(90):
        if fhi != flo:
            mid = lo - flo * (hi - lo) / (fhi - flo)
            span = hi - lo
            if mid < lo + 0.1 * span or mid > hi - 0.1 * span:
                mid = 0.5 * (lo + hi)
        else:
            mid = 0.5 * (lo + hi)
        _dp_step(t, y, mid * hevt, k, n, side, mode, eps, ip, fp, ynew, yerr)
        if which == 1:
            fm = sgn * (switch_value(ynew[0], ynew[1], ip, fp) - levelc)
        else:
            fm = sgn * (ynew[0] * ynew[0] + ynew[1] * ynew[1] - rad2)
        if abs(fm) <= tol:
            sbest = mid
            break
        if fm > 0.0:
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
        sbest = hi
        if hi - lo <= 1e-16:
            break
    _dp_step(t, y, sbest * hevt, k, n, side, mode, eps, ip, fp, ynew, yerr)
    for i in range(n):
        yout[i] = ynew[i]
    return sbest * hevt


@jit
def _leg(t0, y0, n, side, mode, eps, ip, fp,
         t_end, rtol, atol, max_step, event_tol,
         monitor_radius, rad2, levelc, escape_r2, max_steps,
         ts, ys, h_init):
    """Integrate one smooth leg with first-trigger monitors.

    Returns (status, nsamples, t_last, h_last).  The terminal state (event
    state for monitor statuses) is ys[nsamples-1]; samples start with the
    initial state.  The G monitor arms once side*G has clearly confirmed the
    region assignment, so starting exactly on the switching curve is fine.
    """
    t = t0
    y = np.empty(4)
    yn = np.empty(4)
    yerr = np.empty(4)
    k = np.empty((7, 4))
    for i in range(n):
        y[i] = y0[i]
    _rhs(t, y, k[0], n, side, mode, eps, ip, fp)

    direction = 1.0 if t_end >= t0 else -1.0
    sgn = 1.0 * side
    g0 = sgn * (switch_value(y[0], y[1], ip, fp) - levelc)
    confirm = _CONFIRM_FACTOR * event_tol
    armed = g0 > confirm

    h = h_init if h_init > 0.0 else min(max_step, 1e-3)
    h = min(h, abs(t_end - t0))
    if h <= 0.0:
        h = 1e-12

    nsamp = 0
    ts[nsamp] = t
    for i in range(n):
        ys[nsamp, i] = y[i]
    nsamp += 1

    nstep = 0
    rejected = False
    while True:
        if nstep >= max_steps or nsamp >= ts.shape[0] - 1:
            return LEG_STEPLIMIT, nsamp, t, h
        nstep += 1
        hs = direction * min(h, max_step)
        last = False
        if direction * (t + hs - t_end) >= 0.0:
            hs = t_end - t
            last = True
        _dp_step(t, y, hs, k, n, side, mode, eps, ip, fp, yn, yerr)
        err = _err_norm(y, yn, yerr, n, rtol, atol)
        if err > 1.0:
            h = abs(hs) * max(0.2, 0.9 * err ** -0.2)
            rejected = True
            continue

        gn = sgn * (switch_value(yn[0], yn[1], ip, fp) - levelc)
        trig = 0
        if armed and gn < 0.0:
            trig = 1
        if monitor_radius == 1 and trig == 0:
            r20 = y[0] * y[0] + y[1] * y[1]
            r2n = yn[0] * yn[0] + yn[1] * yn[1]
            if (r20 - rad2) * (r2n - rad2) < 0.0:
                trig = 2
        if trig != 0:
            if trig == 1:
                rsgn = 1.0
            else:
                r20 = y[0] * y[0] + y[1] * y[1]
                rsgn = 1.0 if r20 > rad2 else -1.0
            hstar = _refine_monitor(t, y, k[0], hs, n, side, mode, eps, ip, fp,
                                    trig, sgn if trig == 1 else rsgn,
                                    rad2, levelc, event_tol, yn)
            t = t + hstar
            ts[nsamp] = t
            for i in range(n):
                ys[nsamp, i] = yn[i]
            nsamp += 1
            return (LEG_GCROSS if trig == 1 else LEG_RADIUS), nsamp, t, h

        t = t + hs
        for i in range(n):
            y[i] = yn[i]
            k[0, i] = k[6, i]
        if not armed and gn > confirm:
            armed = True
        ts[nsamp] = t
        for i in range(n):
            ys[nsamp, i] = y[i]
        nsamp += 1

        if yn[0] * yn[0] + yn[1] * yn[1] > escape_r2:
            return LEG_ESCAPE, nsamp, t, h

        if last:
            return LEG_TEND, nsamp, t, h

        if err == 0.0:
            fac = 10.0
        else:
            fac = min(10.0, max(0.2, 0.9 * err ** -0.2))
        if rejected:
            fac = min(1.0, fac)
            rejected = False
        h = abs(hs) * fac
