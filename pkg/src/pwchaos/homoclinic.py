"""Unperturbed homoclinic orbit: closed forms, level-set tracing, shooting."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from . import kernels as K
from .errors import NoHomoclinic, WrongRegionPattern
from .system import PiecewiseSystem, SaddleData, compute_saddle_data


class HomoclinicMethod(Enum):
    ClosedForm = "closed-form"
    EnergyLevel = "energy-level"
    Shooting = "shooting"


@dataclass(frozen=True)
class HomoclinicOrbit:
    """Loop through the origin crossing the switching curve once, at t = 0.

    ``gamma`` accepts scalars or arrays of times.  ``decay_constant`` is the
    smallest c with ||gamma^-(t)|| <= (c/4) e^{lambda_u^- t} for t <= 0 and
    ||gamma^+(t)|| <= (c/4) e^{lambda_s^+ t} for t >= 0.
    """

    gamma: Callable[[np.ndarray], np.ndarray]
    crossing_point: np.ndarray
    decay_constant: float
    lambda_u_minus: float
    lambda_s_plus: float
    truncation_horizon: float
    method: HomoclinicMethod

    def gamma_minus(self, t):
        t = np.minimum(np.asarray(t, dtype=float), 0.0)
        return self.gamma(t)

    def gamma_plus(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return self.gamma(t)

    def polyline(self, n: int = 2000) -> np.ndarray:
        """Closed sampling of the loop including the corner at the origin."""
        th = self.truncation_horizon
        ts = np.concatenate([np.linspace(-th, 0.0, n // 2),
                             np.linspace(0.0, th, n - n // 2)[1:]])
        pts = self.gamma(ts)
        return np.vstack([[0.0, 0.0], pts])

    def loop_diameter(self) -> float:
        pts = self.polyline(512)
        return float(np.max(np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)))

    def region_pattern_ok(self, sys: PiecewiseSystem, n: int = 400) -> bool:
        th = self.truncation_horizon
        tneg = np.linspace(-th, -1e-9, n)
        tpos = np.linspace(1e-9, th, n)
        gm = np.array([sys.switching.value(p) for p in np.atleast_2d(self.gamma(tneg))])
        gp = np.array([sys.switching.value(p) for p in np.atleast_2d(self.gamma(tpos))])
        g0 = sys.switching.value(self.crossing_point)
        return bool(np.all(gm < 0) and np.all(gp > 0) and abs(g0) < 1e-9)


def _cubic_closed_form(sys: PiecewiseSystem) -> HomoclinicOrbit:
    fp = sys.fp
    sv, gy = fp[K.FP_SV], fp[K.FP_GY]
    if gy * sv >= 0:
        raise WrongRegionPattern(
            "cubic family needs gy*sv < 0 for the minus-then-plus loop")
    c_plus, c_minus = fp[K.FP_CPLUS], fp[K.FP_CMINUS]
    wm, wp = np.sqrt(c_minus), np.sqrt(c_plus)
    s2 = np.sqrt(2.0)

    def gamma(t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        w = np.where(t < 0, wm, wp)
        u = w * t
        x = s2 / np.cosh(u)
        y = -sv * s2 * w * np.tanh(u) / np.cosh(u)
        out = np.stack([x, y], axis=-1)
        return out[0] if scalar else out

    # sup over each tail of ||gamma|| e^{-rate |t|}, reached in the limit
    c0 = 4.0 * max(s2 * np.sqrt(1.0 + c_minus) * 2.0 / 2.0,
                   s2 * np.sqrt(1.0 + c_plus))
    # tighter: evaluate on a grid
    for rate, sgn in ((wm, -1.0), (wp, 1.0)):
        ts = sgn * np.linspace(0.0, 60.0, 4000)
        pts = gamma(ts)
        vals = np.linalg.norm(pts, axis=1) * np.exp(-rate * np.abs(ts))
        c0 = max(c0, 4.0 * float(np.max(vals)))

    horizon = 40.0 / min(wm, wp)
    return HomoclinicOrbit(
        gamma=gamma,
        crossing_point=np.array([s2, 0.0]),
        decay_constant=float(c0),
        lambda_u_minus=float(wm),
        lambda_s_plus=float(-wp),
        truncation_horizon=float(horizon),
        method=HomoclinicMethod.ClosedForm,
    )


def _orbit_from_arcs(sys: PiecewiseSystem, saddle: SaddleData,
                     t_m: np.ndarray, x_m: np.ndarray,
                     t_p: np.ndarray, x_p: np.ndarray,
                     method: HomoclinicMethod) -> HomoclinicOrbit:
    """Assemble an interpolant orbit from a traced minus arc (ending on the
    switching curve at t=0) and plus arc (starting there), with linear-rate
    asymptotic tails beyond the traced span."""
    from scipy.interpolate import CubicSpline

    crossing = 0.5 * (x_m[-1] + x_p[0])
    sp_m = CubicSpline(t_m, x_m, axis=0)
    sp_p = CubicSpline(t_p, x_p, axis=0)
    lam_u, lam_s = saddle.lambda_u_minus, saddle.lambda_s_plus
    a_m, b_m = t_m[0], x_m[0]
    a_p, b_p = t_p[-1], x_p[-1]

    def gamma(t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        out = np.empty((t.size, 2))
        neg = t < 0
        pre = t < a_m
        post = t > a_p
        mid_m = neg & ~pre
        mid_p = ~neg & ~post
        if np.any(pre):
            out[pre] = b_m[None, :] * np.exp(lam_u * (t[pre] - a_m))[:, None]
        if np.any(post):
            out[post] = b_p[None, :] * np.exp(lam_s * (t[post] - a_p))[:, None]
        if np.any(mid_m):
            out[mid_m] = sp_m(t[mid_m])
        if np.any(mid_p):
            out[mid_p] = sp_p(t[mid_p])
        return out[0] if scalar else out

    c0 = 0.0
    for ts in (t_m, t_p):
        rate = lam_u if ts is t_m else -lam_s
        pts = sp_m(ts) if ts is t_m else sp_p(ts)
        vals = np.linalg.norm(pts, axis=1) * np.exp(-rate * np.abs(ts))
        c0 = max(c0, 4.0 * float(np.max(vals)))

    horizon = float(max(-t_m[0], t_p[-1]))
    return HomoclinicOrbit(
        gamma=gamma, crossing_point=crossing, decay_constant=c0,
        lambda_u_minus=lam_u, lambda_s_plus=lam_s,
        truncation_horizon=horizon, method=method,
    )


def _trace_arc(sys: PiecewiseSystem, seed: np.ndarray, side: int,
               timesign: int, cfg=None) -> tuple[np.ndarray, np.ndarray]:
    """Integrate the eps=0 system from a near-origin seed to the switching
    curve; returns samples with time renormalized so the crossing is t=0."""
    from .flow import IntegratorConfig, _run_leg

    cfg = cfg or IntegratorConfig(rel_tol=1e-12, abs_tol=1e-13)
    t_end = timesign * 200.0
    status, ts, ys, _ = _run_leg(sys, 0.0, 0.0, seed, side, t_end, cfg,
                                 mode=0)
    if status != K.LEG_GCROSS:
        raise NoHomoclinic(f"arc from {seed} did not reach the switching curve")
    ts = ts - ts[-1]
    if timesign < 0:
        ts = ts[::-1]
        ys = ys[::-1]
    return ts, ys[:, :2]


def _manifold_seed(sys: PiecewiseSystem, saddle: SaddleData, stable: bool,
                   r0: float) -> tuple[np.ndarray, int]:
    """Seed on the local stable/unstable curve.  Uses the exact zero level of
    the half Hamiltonian when available, else the linear eigenvector ray."""
    if stable:
        v = saddle.v_s_plus
        side = 1
        ham = sys.hamiltonian_plus
    else:
        v = saddle.v_u_minus
        side = -1
        ham = sys.hamiltonian_minus
    seed = r0 * v
    if ham is not None:
        # slide transversally until H = 0 (Newton on the normal offset)
        n = np.array([-v[1], v[0]])
        a = 0.0
        for _ in range(60):
            p = seed + a * n
            h = ham(p)
            dh = (ham(p + 1e-8 * n) - ham(p - 1e-8 * n)) / 2e-8
            if dh == 0:
                break
            step = -h / dh
            a += step
            if abs(step) < 1e-16 * max(r0, abs(a)):
                break
        seed = seed + a * n
    return seed, side


def compute_homoclinic(sys: PiecewiseSystem,
                       method: HomoclinicMethod = HomoclinicMethod.ClosedForm,
                       r0: Optional[float] = None,
                       mismatch_tol: float = 1e-9) -> HomoclinicOrbit:
    """Homoclinic loop of the eps=0 system with the minus/plus region pattern.

    ClosedForm is exact for the cubic family.  EnergyLevel traces the zero
    level sets of the half Hamiltonians.  Shooting integrates the unstable arc
    forward and the stable arc backward from near-origin seeds and requires
    the two switching-curve hits to agree within ``mismatch_tol``.
    """
    if method == HomoclinicMethod.ClosedForm:
        if sys.ip[0] != K.KIND_CUBIC:
            raise NoHomoclinic("no closed form outside the cubic family")
        orbit = _cubic_closed_form(sys)
        if not orbit.region_pattern_ok(sys):
            raise WrongRegionPattern("closed form violates the region pattern")
        return orbit

    saddle = compute_saddle_data(sys)
    if method == HomoclinicMethod.EnergyLevel:
        if sys.hamiltonian_minus is None or sys.hamiltonian_plus is None:
            raise NoHomoclinic("halves are not divergence-free; no first integral")
    if r0 is None:
        r0 = 1e-4 * (2.0 if sys.ip[0] == K.KIND_CUBIC else 1.0)

    seed_u, side_u = _manifold_seed(sys, saddle, stable=False, r0=r0)
    seed_s, side_s = _manifold_seed(sys, saddle, stable=True, r0=r0)
    t_m, x_m = _trace_arc(sys, seed_u, side_u, timesign=+1)
    t_p, x_p = _trace_arc(sys, seed_s, side_s, timesign=-1)
    mismatch = float(np.linalg.norm(x_m[-1] - x_p[0]))
    if mismatch > mismatch_tol:
        raise NoHomoclinic(f"arc mismatch {mismatch:.3e} above {mismatch_tol:.1e}")

    # extend tails down to the seeds' asymptotic regime and renormalize time 0
    orbit = _orbit_from_arcs(sys, saddle, t_m, x_m, t_p, x_p, method)
    if not orbit.region_pattern_ok(sys):
        raise WrongRegionPattern("traced orbit violates the region pattern")
    return orbit
