"""Splitting (Melnikov) function for the piecewise-smooth homoclinic.

The evaluator integrates, on each half-line, the wedge of the half-plane
field along the loop with the forcing, damped by the exponential of the
accumulated divergence, and scales each side by the switching-normalization
constant of that half.  Quadrature is composite Gauss-Legendre on unit
panels out to a decay-based truncation horizon; build-time validation
compares against half-size panels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from . import kernels as K
from .errors import (DivergentWeight, NoSignChange, PwChaosError,
                     QuadratureNotConverged, SpacingViolation)
from .homoclinic import HomoclinicOrbit
from .system import PiecewiseSystem

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)
_WEIGHT_OVERFLOW = 690.0


# --------------------------------------------------------------------------
# vectorized encoding-backed evaluators (numpy, array-in/array-out)


def _mat(sys: PiecewiseSystem, s: int) -> np.ndarray:
    ip, fp = sys.ip, sys.fp
    nx, ny, off = ip[1 + 3 * s], ip[2 + 3 * s], ip[3 + 3 * s]
    return fp[off:off + (nx + 1) * (ny + 1)].reshape(nx + 1, ny + 1)


def field_on_curve(sys: PiecewiseSystem, pts: np.ndarray, side: int) -> np.ndarray:
    """f^side at an (n, 2) array of points."""
    x, y = pts[:, 0], pts[:, 1]
    if sys.ip[0] == K.KIND_CUBIC:
        sv = sys.fp[K.FP_SV]
        c = sys.fp[K.FP_CPLUS] if side > 0 else sys.fp[K.FP_CMINUS]
        return np.stack([sv * y, sv * c * (x - x ** 3)], axis=1)
    from numpy.polynomial.polynomial import polyval2d
    s1, s2 = (K.SLOT_FP1, K.SLOT_FP2) if side > 0 else (K.SLOT_FM1, K.SLOT_FM2)
    return np.stack([polyval2d(x, y, _mat(sys, s1)),
                     polyval2d(x, y, _mat(sys, s2))], axis=1)


def trace_jac_on_curve(sys: PiecewiseSystem, pts: np.ndarray, side: int) -> np.ndarray:
    x, y = pts[:, 0], pts[:, 1]
    if sys.ip[0] == K.KIND_CUBIC:
        return np.zeros_like(x)
    from numpy.polynomial.polynomial import polyval2d
    s1, s2 = (K.SLOT_FP1, K.SLOT_FP2) if side > 0 else (K.SLOT_FM1, K.SLOT_FM2)
    return polyval2d(x, y, _mat(sys, s1 + 7)) + polyval2d(x, y, _mat(sys, s2 + 14))


def forcing_on_curve(sys: PiecewiseSystem, ts: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """g(t_i, p_i, 0) rows (unscaled by eps)."""
    fp = sys.fp
    x, y = pts[:, 0], pts[:, 1]
    osc = fp[K.FP_AMP] * np.cos(fp[K.FP_OMEGA] * ts + fp[K.FP_PHASE])
    if fp[K.FP_RHI2] > 0:
        u = x * x + y * y
        w = np.clip((u - fp[K.FP_RLO2]) / (fp[K.FP_RHI2] - fp[K.FP_RLO2]), 0.0, 1.0)
        osc = osc * (w ** 3 * (10.0 + w * (-15.0 + 6.0 * w)))
    if sys.ip[0] == K.KIND_CUBIC:
        return np.stack([np.zeros_like(osc), osc], axis=1)
    from numpy.polynomial.polynomial import polyval2d
    return np.stack([osc * polyval2d(x, y, _mat(sys, K.SLOT_GC1)),
                     osc * polyval2d(x, y, _mat(sys, K.SLOT_GC2))], axis=1)


def c_perp(sys: PiecewiseSystem, crossing_point: np.ndarray) -> tuple[float, float]:
    """Switching-normalization constants of the two halves at the crossing."""
    grad = sys.switching.gradient(crossing_point)
    ng = float(np.linalg.norm(grad))
    cm = ng / float(grad @ sys.f_minus(crossing_point))
    cp = ng / float(grad @ sys.f_plus(crossing_point))
    if cm <= 0 or cp <= 0:
        raise PwChaosError("normal velocities at the crossing must be positive")
    return cm, cp


# --------------------------------------------------------------------------
# evaluator


@dataclass
class _SideNodes:
    ts: np.ndarray        # quadrature nodes (signed times)
    wq: np.ndarray        # quadrature weights
    fwedge1: np.ndarray   # weight * f1(gamma)
    fwedge2: np.ndarray   # weight * f2(gamma)
    pts: np.ndarray       # gamma at nodes


@dataclass
class MelnikovFunction:
    evaluator: Callable[[float], float]
    c_perp_minus: float
    c_perp_plus: float
    truncation_horizon: tuple[float, float]
    quadrature_tol: float
    validation_error: float = 0.0

    def __call__(self, alpha):
        if np.ndim(alpha) == 0:
            return self.evaluator(float(alpha))
        return np.array([self.evaluator(float(a)) for a in np.ravel(alpha)])


def _t_cut(sys: PiecewiseSystem, gamma: HomoclinicOrbit, tol: float,
           side: int) -> float:
    rate = gamma.lambda_u_minus if side < 0 else abs(gamma.lambda_s_plus)
    # the exponential weight can eat into the decay of f along the loop
    tr0 = float(trace_jac_on_curve(sys, np.zeros((1, 2)), side)[0])
    rate = max(rate - abs(tr0), 0.2 * rate)
    c = max(gamma.decay_constant, 1.0)
    t = max(30.0, np.log(10.0 * c / tol) / rate)
    return min(t, gamma.truncation_horizon + 20.0)


def _bump_breakpoints(sys: PiecewiseSystem, gamma: HomoclinicOrbit,
                      side: int, tcut: float) -> list[float]:
    """Times where the loop crosses the smoothstep radii (C^2 kinks of the
    integrand); these must be panel edges for the quadrature to converge."""
    fp = sys.fp
    if fp[K.FP_RHI2] <= 0:
        return []
    out = []
    for r2 in (fp[K.FP_RLO2], fp[K.FP_RHI2]):
        def f(t):
            p = np.atleast_2d(gamma.gamma(t))[0]
            return p[0] * p[0] + p[1] * p[1] - r2
        lo, hi = (-tcut, 0.0) if side < 0 else (0.0, tcut)
        # ||gamma|| is monotone along each tail of the loop
        flo, fhi = f(lo), f(hi)
        if flo * fhi < 0:
            out.append(_bisect(f, lo, hi, flo, fhi, tol=1e-13))
    return out


def _build_side(sys: PiecewiseSystem, gamma: HomoclinicOrbit, side: int,
                tol: float, panels_per_unit: int = 1) -> _SideNodes:
    tcut = _t_cut(sys, gamma, tol, side)
    n_panels = max(8, int(np.ceil(tcut * panels_per_unit)))
    edges = np.linspace(0.0, side * tcut, n_panels + 1)
    breaks = _bump_breakpoints(sys, gamma, side, tcut)
    if breaks:
        edges = np.unique(np.concatenate([edges, breaks]))
        if side < 0:
            edges = edges[::-1]
        n_panels = len(edges) - 1
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    ts = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    wq = (np.abs(half)[:, None] * _GL_WEIGHTS[None, :]).ravel()
    pts = np.atleast_2d(gamma.gamma(ts))
    f = field_on_curve(sys, pts, side)

    tr = trace_jac_on_curve(sys, pts, side)
    if np.max(np.abs(tr)) < 1e-13:
        weight = np.ones_like(ts)
    else:
        # exp(-W(t)) with W(t) = int_0^t tr; signed panel integrals give W at
        # the panel edges, a nested rule finishes the in-panel remainders
        ng = _GL_NODES.size
        panel_int = (half[:, None] * _GL_WEIGHTS[None, :]
                     * tr.reshape(n_panels, ng)).sum(axis=1)
        prefix = np.concatenate([[0.0], np.cumsum(panel_int)])
        weight = np.empty_like(ts)
        for p in range(n_panels):
            a = edges[p]
            for q in range(ng):
                i = p * ng + q
                hh = 0.5 * (ts[i] - a)
                sub = a + hh + hh * _GL_NODES
                subpts = np.atleast_2d(gamma.gamma(sub))
                wsub = hh * float(np.dot(_GL_WEIGHTS,
                                         trace_jac_on_curve(sys, subpts, side)))
                wval = prefix[p] + wsub
                if abs(wval) > _WEIGHT_OVERFLOW:
                    raise DivergentWeight(f"divergence integral reached {wval:g}")
                weight[i] = np.exp(-wval)
    return _SideNodes(ts=ts, wq=wq, fwedge1=weight * f[:, 0],
                      fwedge2=weight * f[:, 1], pts=pts)


def _side_value(sys: PiecewiseSystem, nodes: _SideNodes, alpha: float) -> float:
    g = forcing_on_curve(sys, nodes.ts + alpha, nodes.pts)
    integrand = nodes.fwedge1 * g[:, 1] - nodes.fwedge2 * g[:, 0]
    return float(np.dot(nodes.wq, integrand))


def build_melnikov(sys: PiecewiseSystem, gamma: HomoclinicOrbit,
                   tol: float = 1e-10,
                   validate_alphas: Optional[np.ndarray] = None) -> MelnikovFunction:
    cm, cp = c_perp(sys, gamma.crossing_point)
    minus = _build_side(sys, gamma, -1, tol)
    plus = _build_side(sys, gamma, +1, tol)
    minus2 = _build_side(sys, gamma, -1, tol, panels_per_unit=2)
    plus2 = _build_side(sys, gamma, +1, tol, panels_per_unit=2)

    def evaluator(alpha: float) -> float:
        return (cm * _side_value(sys, minus, alpha)
                + cp * _side_value(sys, plus, alpha))

    def evaluator2(alpha: float) -> float:
        return (cm * _side_value(sys, minus2, alpha)
                + cp * _side_value(sys, plus2, alpha))

    if validate_alphas is None:
        validate_alphas = np.linspace(0.0, 5.0, 7)
    err = max(abs(evaluator(a) - evaluator2(a)) for a in validate_alphas)
    if err > max(tol, 1e-14):
        raise QuadratureNotConverged(
            f"panel refinement changes M by {err:.2e} > {tol:.1e}")

    return MelnikovFunction(
        evaluator=evaluator2, c_perp_minus=cm, c_perp_plus=cp,
        truncation_horizon=(float(minus.ts.min()), float(plus.ts.max())),
        quadrature_tol=tol, validation_error=float(err))


def melnikov(sys: PiecewiseSystem, gamma: HomoclinicOrbit, alpha: float,
             tol: float = 1e-10) -> float:
    """One-off evaluation; build :func:`build_melnikov` for sweeps."""
    return build_melnikov(sys, gamma, tol=tol)(alpha)


# --------------------------------------------------------------------------
# zero structure


class ZeroClass(Enum):
    P1only = "P1only"
    Minimal = "minimal"
    Isolated = "isolated"
    NonDegenerate = "nondegenerate"


_CLASS_ORDER = {ZeroClass.P1only: 0, ZeroClass.Minimal: 1,
                ZeroClass.Isolated: 2, ZeroClass.NonDegenerate: 3}


def zero_class_at_least(a: ZeroClass, b: ZeroClass) -> bool:
    return _CLASS_ORDER[a] >= _CLASS_ORDER[b]


@dataclass
class ZeroStructure:
    b_sequence: np.ndarray
    b_values: np.ndarray
    b_parity: int                 # 0 when b_sequence[0] carries M < -c_bar
    c_bar: float
    zeros: np.ndarray
    zero_brackets: list[tuple[float, float]]
    bracket_widths: np.ndarray
    a_up: np.ndarray
    a_down: np.ndarray
    lambda0: float
    lambda1: float
    omega_h: np.ndarray
    omega_w: np.ndarray
    zclass: ZeroClass
    derivs: np.ndarray
    C: float
    delta: float
    min_spacing: float
    evaluator: Callable[[float], float] = field(repr=False, default=None)

    def omega_M(self, h: float) -> float:
        return float(np.interp(h, self.omega_h, self.omega_w))

    def omega_M_inv(self, w: float) -> float:
        return float(np.interp(w, self.omega_w, self.omega_h))

    def bracket_for_zero(self, i: int) -> tuple[float, float]:
        return self.zero_brackets[i]


def _bisect(f, lo, hi, flo, fhi, tol=1e-13, maxit=90):
    for _ in range(maxit):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if hi - lo < tol:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    return 0.5 * (lo + hi)


def extract_zero_structure(M, scan_range: tuple[float, float],
                           grid_step: float = 0.01, delta: float = 0.5,
                           min_spacing: float = 0.1) -> ZeroStructure:
    """Scan M, build the alternating excursion sequence, bracket and refine
    the zeros, and classify the strongest verifiable non-degeneracy."""
    lo, hi = scan_range
    grid = np.arange(lo, hi + grid_step, grid_step)
    vals = np.asarray(M(grid), dtype=float)
    noise = max(getattr(M, "quadrature_tol", 1e-10) * 10.0, 1e-12)

    # local extrema of the sampled curve
    d = np.diff(vals)
    idx = np.nonzero(d[:-1] * d[1:] < 0)[0] + 1
    if idx.size < 2:
        raise NoSignChange("scan range shows fewer than two extrema")
    ext_t, ext_v = grid[idx], vals[idx]

    # keep one representative (the largest) of each same-sign run
    reps_t, reps_v = [], []
    for t, v in zip(ext_t, ext_v):
        if reps_v and np.sign(v) == np.sign(reps_v[-1]):
            if abs(v) > abs(reps_v[-1]):
                reps_t[-1], reps_v[-1] = t, v
        else:
            reps_t.append(t)
            reps_v.append(v)
    reps_t = np.array(reps_t)
    reps_v = np.array(reps_v)
    if reps_t.size < 2 or np.all(reps_v > 0) or np.all(reps_v < 0):
        raise NoSignChange("no sign alternation among extrema")

    c_bar = 0.5 * float(np.min(np.abs(reps_v)))
    if c_bar <= noise:
        raise NoSignChange(f"excursions ({c_bar:g}) below noise ({noise:g})")
    if np.any(np.diff(reps_t) < min_spacing):
        raise SpacingViolation(
            f"alternating points closer than {min_spacing:g}")

    b_parity = 0 if reps_v[0] < 0 else 1

    zeros = []
    brackets = []
    for i in range(reps_t.size - 1):
        bl, br = float(reps_t[i]), float(reps_t[i + 1])
        z = _bisect(M, bl, br, float(reps_v[i]), float(reps_v[i + 1]),
                    tol=1e-12)
        zeros.append(z)
        brackets.append((bl, br))
    zeros = np.array(zeros)
    widths = np.array([b - a for a, b in brackets])

    # level crossings |M| = delta*c_bar flanking each zero
    lvl = delta * c_bar
    a_up, a_dn, lam0s = [], [], []
    for z, (bl, br) in zip(zeros, brackets):
        def f_lvl(t):
            return abs(M(t)) - lvl
        au = _bisect(f_lvl, bl, z, abs(M(bl)) - lvl, -lvl, tol=1e-10)
        ad = _bisect(f_lvl, z, br, -lvl, abs(M(br)) - lvl, tol=1e-10)
        if ad < au:
            au, ad = ad, au
        a_up.append(au)
        a_dn.append(ad)
        # plateau half-width: how far |M| stays under the noise band
        h = 0.0
        step = max(1e-4, grid_step / 16.0)
        while h < (ad - au) and max(abs(M(z - h)), abs(M(z + h))) < 4 * noise:
            h += step
        lam0s.append(max(0.0, h - step))
    a_up = np.array(a_up)
    a_dn = np.array(a_dn)
    lambda0 = float(np.max(lam0s))
    lambda1 = float(np.max(a_dn - a_up))

    # monotone lower envelope of |M| vs distance past the plateau
    hs = np.linspace(0.0, max(lambda1, 1e-6), 33)
    env = np.full_like(hs, np.inf)
    for z, au, ad in zip(zeros, a_up, a_dn):
        for k, h in enumerate(hs):
            cands = []
            tl = z - lambda0 - h
            tr = z + lambda0 + h
            if tl >= au:
                cands.append(abs(M(tl)))
            if tr <= ad:
                cands.append(abs(M(tr)))
            if cands:
                env[k] = min(env[k], min(cands))
    env[~np.isfinite(env)] = lvl
    env[0] = 0.0
    # largest monotone increasing lower bound of the envelope
    omega_w = np.minimum.accumulate(env[::-1])[::-1]

    # derivative at each refined zero
    hstep = max(getattr(M, "quadrature_tol", 1e-10), 1e-12) ** (1.0 / 3.0)
    derivs = np.array([(M(z + hstep) - M(z - hstep)) / (2 * hstep) for z in zeros])

    max_amp = float(np.max(np.abs(reps_v)))
    zclass = ZeroClass.P1only
    if lambda1 < 0.5 and lambda1 > 2 * lambda0:
        zclass = ZeroClass.Minimal
        if lambda0 <= max(2e-4, grid_step / 8.0):
            zclass = ZeroClass.Isolated
            if np.min(np.abs(derivs)) > 1e-3 * max_amp:
                zclass = ZeroClass.NonDegenerate
    C = float(0.99 * np.min(np.abs(derivs))) if zclass == ZeroClass.NonDegenerate else 0.0

    return ZeroStructure(
        b_sequence=reps_t, b_values=reps_v, b_parity=b_parity, c_bar=c_bar,
        zeros=zeros, zero_brackets=brackets, bracket_widths=widths,
        a_up=a_up, a_down=a_dn, lambda0=lambda0, lambda1=lambda1,
        omega_h=hs, omega_w=omega_w, zclass=zclass, derivs=derivs, C=C,
        delta=delta, min_spacing=min_spacing, evaluator=M)


def verify_nondegenerate_zero(M, tau0: float) -> tuple[float, float]:
    """(value, central-difference derivative) at tau0."""
    h = max(getattr(M, "quadrature_tol", 1e-10), 1e-12) ** (1.0 / 3.0)
    return float(M(tau0)), float((M(tau0 + h) - M(tau0 - h)) / (2 * h))
