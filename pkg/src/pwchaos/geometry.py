"""Derived constants, switching-curve sections, and manifold endpoints."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from . import kernels as K
from .errors import CalibrationDegenerate, NoBracket, OffSection, OutOfSection
from .flow import IntegratorConfig, _initial_side, _run_leg
from .system import PiecewiseSystem, SaddleData


@dataclass(frozen=True)
class ChaosConstants:
    sigma_fwd_plus: float
    sigma_fwd_minus: float
    sigma_fwd: float
    sigma_bwd_plus: float
    sigma_bwd_minus: float
    sigma_bwd: float
    sigma_lo: float
    sigma_hi: float
    Sigma_fwd_plus: float
    Sigma_bwd_minus: float
    Sigma_fwd: float
    Sigma_bwd: float
    Sigma_lo: float
    Sigma_hi: float
    K0: float
    nu0: float
    mu0: float
    lambda_u_minus: float
    lambda_s_plus: float

    def T_a(self, eps: float) -> float:
        return abs(np.log(eps)) / self.lambda_u_minus

    def T_b(self, eps: float) -> float:
        return abs(np.log(eps)) / abs(self.lambda_s_plus)

    def d_ceiling(self, eps: float, nu: float) -> float:
        """Upper end of the admissible offset range, eps^((1+nu)/sigma_lo)."""
        return float(eps ** ((1.0 + nu) / self.sigma_lo))


def derive_constants(saddle: SaddleData) -> ChaosConstants:
    lsm, lum = saddle.lambda_s_minus, saddle.lambda_u_minus
    lsp, lup = saddle.lambda_s_plus, saddle.lambda_u_plus
    s_fwd_p = abs(lsp) / (lup + abs(lsp))
    s_fwd_m = (lum + abs(lsm)) / lum
    s_fwd = s_fwd_p * s_fwd_m
    s_bwd_p = 1.0 / s_fwd_p
    s_bwd_m = 1.0 / s_fwd_m
    s_bwd = s_bwd_p * s_bwd_m
    s_lo = min(s_fwd_p, s_bwd_m)
    s_hi = max(s_fwd_p, s_bwd_m)
    S_fwd_p = 1.0 / (lup + abs(lsp))
    S_bwd_m = 1.0 / (lum + abs(lsm))
    S_fwd = (lum + abs(lsp)) / (lum * (lup + abs(lsp)))
    S_bwd = (lum + abs(lsp)) / (abs(lsp) * (lum + abs(lsm)))
    S_lo = min(S_fwd, S_bwd)
    S_hi = max(S_fwd, S_bwd)
    k0 = 3.0 * S_hi / (2.0 * s_lo)
    nu0 = max(3.0 * s_hi - 1.0, 1.0)
    mu0 = 0.25 * min(S_fwd_p, S_bwd_m, s_lo * s_lo)
    cc = ChaosConstants(
        sigma_fwd_plus=s_fwd_p, sigma_fwd_minus=s_fwd_m, sigma_fwd=s_fwd,
        sigma_bwd_plus=s_bwd_p, sigma_bwd_minus=s_bwd_m, sigma_bwd=s_bwd,
        sigma_lo=s_lo, sigma_hi=s_hi,
        Sigma_fwd_plus=S_fwd_p, Sigma_bwd_minus=S_bwd_m,
        Sigma_fwd=S_fwd, Sigma_bwd=S_bwd, Sigma_lo=S_lo, Sigma_hi=S_hi,
        K0=k0, nu0=nu0, mu0=mu0,
        lambda_u_minus=lum, lambda_s_plus=lsp,
    )
    assert cc.sigma_lo <= cc.sigma_hi < 1.0
    assert min(S_fwd_p, S_bwd_m, S_fwd, S_bwd) > 0.0
    assert abs(cc.sigma_fwd * cc.sigma_bwd - 1.0) < 1e-14
    return cc


# --------------------------------------------------------------------------
# sections


class Section:
    """Arc of the switching curve with a signed arclength chart.

    The chart measures arclength from the origin (which lies on the curve),
    oriented so that the anchor has positive arclength.
    """

    def __init__(self, sys: PiecewiseSystem, anchor: np.ndarray,
                 ell_lo: float, ell_hi: float, on_tol: float = 1e-9):
        self.sys = sys
        self.anchor = np.asarray(anchor, dtype=float)
        self.on_tol = on_tol
        g0 = sys.switching.value(self.anchor)
        if abs(g0) > on_tol:
            raise OffSection(f"anchor not on the switching curve: G={g0:g}")
        self._build_chart()
        self.ell_anchor = self.ell_of(self.anchor)
        if self.ell_anchor < 0:
            self._flip()
            self.ell_anchor = -self.ell_anchor
        self.ell_lo = ell_lo
        self.ell_hi = ell_hi

    # -- chart ---------------------------------------------------------
    def _build_chart(self):
        sysv = self.sys
        grad = sysv.switching.gradient
        g_origin = grad(np.zeros(2))
        probes = [np.zeros(2), self.anchor, 0.5 * self.anchor]
        gs = [grad(p) for p in probes]
        straight = all(np.linalg.norm(g - gs[0]) < 1e-12 * np.linalg.norm(gs[0])
                       for g in gs)
        n0 = g_origin / np.linalg.norm(g_origin)
        tang = np.array([-n0[1], n0[0]])
        if straight:
            self._straight = True
            self._tang = tang
        else:
            self._straight = False
            self._trace_chart(tang)

    def _flip(self):
        if self._straight:
            self._tang = -self._tang
        else:
            self._nodes_ell = -self._nodes_ell[::-1]
            self._nodes_xy = self._nodes_xy[::-1]

    def _project(self, p: np.ndarray) -> np.ndarray:
        """Newton projection onto {G = 0} along the gradient."""
        q = p.astype(float).copy()
        for _ in range(8):
            g = self.sys.switching.value(q)
            if abs(g) < 1e-15:
                break
            gr = self.sys.switching.gradient(q)
            q = q - g * gr / float(gr @ gr)
        return q

    def _trace_chart(self, tang0: np.ndarray, ds: float = 2e-3):
        """March the level set both ways from the origin with projected RK4."""
        span = 1.6 * (np.linalg.norm(self.anchor) + 1.0)
        grad = self.sys.switching.gradient

        def that(q, prev):
            g = grad(q)
            t = np.array([-g[1], g[0]])
            t /= np.linalg.norm(t)
            return t if t @ prev > 0 else -t

        def march(sign):
            pts = [np.zeros(2)]
            prev = sign * tang0
            q = np.zeros(2)
            n = int(span / ds)
            for _ in range(n):
                k1 = that(q, prev)
                k2 = that(self._project(q + 0.5 * ds * k1), prev)
                k3 = that(self._project(q + 0.5 * ds * k2), prev)
                k4 = that(self._project(q + ds * k3), prev)
                q = self._project(q + ds / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
                prev = that(q, prev)
                pts.append(q.copy())
            return np.array(pts)

        fw = march(+1.0)
        bw = march(-1.0)
        ells = ds * np.arange(len(fw))
        self._nodes_ell = np.concatenate([-ells[::-1], ells[1:]])
        self._nodes_xy = np.vstack([bw[::-1], fw[1:]])
        self._ds = ds

    # -- public chart API ------------------------------------------------
    def point_at(self, ell: float) -> np.ndarray:
        if self._straight:
            return ell * self._tang
        i = int(np.clip(np.searchsorted(self._nodes_ell, ell) - 1,
                        0, len(self._nodes_ell) - 2))
        q = self._nodes_xy[i]
        rem = ell - self._nodes_ell[i]
        grad = self.sys.switching.gradient
        prev = self._nodes_xy[i + 1] - self._nodes_xy[i]
        for _ in range(3):  # small projected euler-refine steps
            g = grad(q)
            t = np.array([-g[1], g[0]])
            t /= np.linalg.norm(t)
            if t @ prev < 0:
                t = -t
            step = rem if abs(rem) < self._ds else np.sign(rem) * self._ds
            q = self._project(q + step * t)
            rem -= step
            if rem == 0.0:
                break
        return q

    def ell_of(self, p: np.ndarray) -> float:
        p = np.asarray(p, dtype=float)
        if self._straight:
            return float(self._tang @ p)
        d2 = np.sum((self._nodes_xy - p[None, :]) ** 2, axis=1)
        i = int(np.argmin(d2))
        t = self._nodes_xy[min(i + 1, len(d2) - 1)] - self._nodes_xy[max(i - 1, 0)]
        t /= np.linalg.norm(t)
        return float(self._nodes_ell[i] + t @ (p - self._nodes_xy[i]))

    def tangent_at(self, ell: float) -> np.ndarray:
        if self._straight:
            return self._tang.copy()
        a = self.point_at(ell + 1e-6)
        b = self.point_at(ell - 1e-6)
        t = a - b
        return t / np.linalg.norm(t)

    def contains(self, p: np.ndarray, tol_scale: float = 1.0) -> bool:
        if abs(self.sys.switching.value(p)) > self.on_tol * tol_scale:
            return False
        ell = self.ell_of(p)
        return self.ell_lo <= ell <= self.ell_hi

    def require_on(self, p: np.ndarray) -> float:
        if not self.contains(p):
            raise OffSection(f"point {p} not on the section arc")
        return self.ell_of(p)


def main_sections(sys: PiecewiseSystem, gamma, delta: Optional[float] = None,
                  delta_in: Optional[float] = None) -> tuple[Section, Section]:
    """The return section around gamma(0) and the inner section near 0."""
    diam = gamma.loop_diameter()
    if delta is None:
        delta = 0.2 * diam
    anchor = gamma.crossing_point
    l0 = Section(sys, anchor, 0.0, 0.0)  # placeholder bounds, fixed below
    la = l0.ell_anchor
    l0.ell_lo, l0.ell_hi = la - delta, la + delta
    if delta_in is None:
        delta_in = 0.5 * la
    lin = Section(sys, anchor, 1e-14, delta_in)
    return l0, lin


def directed_distance(section: Section, Q: np.ndarray, P: np.ndarray) -> float:
    """ell(P) - ell(Q); positive when Q sits between the origin end and P."""
    return section.require_on(P) - section.require_on(Q)


class InnerSide(Enum):
    StableInner = "stable"
    UnstableInner = "unstable"


@dataclass(frozen=True)
class ManifoldEndpoints:
    P_s: np.ndarray
    P_u: np.ndarray
    tau: float
    epsilon: float
    bracket_width: float


def point_at_distance(endpoints: ManifoldEndpoints, section: Section,
                      d: float, side: InnerSide) -> np.ndarray:
    """Q on the inner part of the arc with D(Q, P) = d for P = P_s or P_u."""
    if d <= 0:
        raise OutOfSection("offset must be positive")
    base = endpoints.P_s if side == InnerSide.StableInner else endpoints.P_u
    ell = section.require_on(base) - d
    if not (section.ell_lo <= ell <= section.ell_hi):
        raise OutOfSection(f"offset {d:g} leaves the section arc")
    return section.point_at(ell)


# --------------------------------------------------------------------------
# separatrix bisection

_INSIDE, _OUTSIDE, _BOUNDARY = 1, -1, 0


def _first_crossing_label(sys: PiecewiseSystem, eps: float, t0: float,
                          seed: np.ndarray, timesign: float, horizon: float,
                          section: Section, cfg: IntegratorConfig) -> int:
    side = _initial_side(sys, eps, t0, seed, timesign, cfg.event_tol)
    t, y = t0, np.asarray(seed, dtype=float)
    t_end = t0 + timesign * horizon
    la = section.ell_anchor
    h_init = 0.0
    for _ in range(16):
        status, ts, ys, h_init = _run_leg(sys, eps, t, y, side, t_end, cfg,
                                          h_init=h_init)
        t = float(ts[-1])
        y = ys[-1, :2].copy()
        if status == K.LEG_TEND:
            return _BOUNDARY
        if status in (K.LEG_ESCAPE, K.LEG_STEPLIMIT):
            return _OUTSIDE
        ell = section.ell_of(y)
        if 1e-12 < ell < 0.75 * la:
            return _INSIDE
        if ell < -0.05 * la:
            return _OUTSIDE
        side = -side
    return _BOUNDARY


def compute_endpoints(sys: PiecewiseSystem, eps: float, tau: float,
                      constants: ChaosConstants, cfg: Optional[IntegratorConfig],
                      gamma, section: Optional[Section] = None,
                      nu: Optional[float] = None,
                      bracket_target: Optional[float] = None) -> ManifoldEndpoints:
    """Locate P_s(tau), P_u(tau) on the return section by bisecting between
    inside-decay and escaping seeds."""
    cfg = cfg or IntegratorConfig()
    if section is None:
        section, _ = main_sections(sys, gamma)
    nu = constants.nu0 if nu is None else nu
    if bracket_target is None:
        if eps > 0:
            bracket_target = max(3e-13, constants.d_ceiling(eps, nu) / 10.0)
        else:
            bracket_target = 3e-13
    horizon = 60.0 if eps == 0 else 1.1 * 2.0 * constants.K0 * abs(np.log(eps))
    la = section.ell_anchor
    width0 = min(0.5 * (section.ell_hi - section.ell_lo),
                 max(np.sqrt(eps) * 0.5 if eps > 0 else 0.0, 20 * eps, 1e-3))

    out = {}
    for name, timesign in (("P_s", 1.0), ("P_u", -1.0)):
        def label(ell):
            return _first_crossing_label(sys, eps, tau, section.point_at(ell),
                                         timesign, horizon, section, cfg)
        w = width0
        lo, hi = la - w, la + w
        llo, lhi = label(lo), label(hi)
        tries = 0
        while not (llo == _INSIDE and lhi == _OUTSIDE):
            w *= 2.0
            lo, hi = la - w, la + w
            if lo < section.ell_lo or hi > section.ell_hi or tries > 6:
                raise NoBracket(
                    f"{name}: labels do not split the section (got {llo}, {lhi})")
            llo, lhi = label(lo), label(hi)
            tries += 1
        for _ in range(90):
            if hi - lo <= bracket_target:
                break
            mid = 0.5 * (lo + hi)
            lm = label(mid)
            if lm == _INSIDE:
                lo = mid
            elif lm == _OUTSIDE:
                hi = mid
            else:
                break  # within classification noise of the separatrix
        out[name] = (0.5 * (lo + hi), hi - lo)

    ps_ell, ws = out["P_s"]
    pu_ell, wu = out["P_u"]
    return ManifoldEndpoints(P_s=section.point_at(ps_ell),
                             P_u=section.point_at(pu_ell),
                             tau=tau, epsilon=eps,
                             bracket_width=float(max(ws, wu)))


# --------------------------------------------------------------------------
# first-order splitting-distance check


class SplitDistancePredictor:
    """One-point calibration of measured splitting against eps*M(tau)."""

    def __init__(self, sys: PiecewiseSystem, eps: float, melnikov_eval,
                 constants: ChaosConstants, gamma,
                 cfg: Optional[IntegratorConfig] = None,
                 section: Optional[Section] = None,
                 tau_star: Optional[float] = None,
                 search_range: tuple[float, float] = (0.0, 6.0)):
        self.sys = sys
        self.eps = eps
        self.M = melnikov_eval
        self.constants = constants
        self.gamma = gamma
        self.cfg = cfg or IntegratorConfig()
        self.section = section or main_sections(sys, gamma)[0]
        if tau_star is None:
            taus = np.linspace(*search_range, 121)
            vals = np.array([abs(self.M(t)) for t in taus])
            tau_star = float(taus[np.argmax(vals)])
        m_star = self.M(tau_star)
        if abs(m_star) < 1e-6:
            raise CalibrationDegenerate(f"|M(tau*)| = {abs(m_star):.2e} too small")
        meas = self.measure(tau_star)
        self.tau_star = tau_star
        self.c_hat = meas / (eps * m_star)

    def measure(self, tau: float) -> float:
        ep = compute_endpoints(self.sys, self.eps, tau, self.constants,
                               self.cfg, self.gamma, section=self.section)
        return directed_distance(self.section, ep.P_s, ep.P_u)

    def predict(self, tau: float) -> float:
        return self.c_hat * self.eps * self.M(tau)


def predict_distance(sys: PiecewiseSystem, eps: float, melnikov_eval, tau: float,
                     constants: ChaosConstants, gamma,
                     predictor: Optional[SplitDistancePredictor] = None,
                     **kw) -> tuple[float, float]:
    """(measured, predicted) splitting distance at tau; the predictor is
    calibrated once at the phase of maximal |M|."""
    if predictor is None:
        predictor = SplitDistancePredictor(sys, eps, melnikov_eval, constants,
                                           gamma, **kw)
    return predictor.measure(tau), predictor.predict(tau)
