"""Forward/backward loop maps and empirical verification of their scaling.

Displacements contract like powers of the starting offset and flight times
grow like |ln d|; the exponents are the eigenvalue ratios collected in
:class:`pwchaos.geometry.ChaosConstants`.  ``verify_scaling`` checks the
two-sided envelope bounds pointwise on a grid and fits the exponents by
least squares.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .flow import IntegratorConfig
from .geometry import ChaosConstants
from .local_map import LoopEngine, LoopResult
from .system import PiecewiseSystem

__all__ = ["LoopEngine", "LoopResult", "ScalingReport", "loop_forward",
           "loop_backward", "signed_return", "verify_scaling"]

_engine_cache: dict = {}


def get_engine(sys: PiecewiseSystem, eps: float,
               cfg: Optional[IntegratorConfig] = None) -> LoopEngine:
    key = (id(sys), float(eps), id(cfg))
    eng = _engine_cache.get(key)
    if eng is None:
        eng = LoopEngine(sys, eps, cfg=cfg)
        _engine_cache[key] = eng
    return eng


def loop_forward(sys: PiecewiseSystem, eps: float, d: float, tau: float,
                 cfg: Optional[IntegratorConfig] = None,
                 engine: str = "auto") -> LoopResult:
    return get_engine(sys, eps, cfg).loop_forward(d, tau, engine=engine)


def loop_backward(sys: PiecewiseSystem, eps: float, d: float, tau: float,
                  cfg: Optional[IntegratorConfig] = None,
                  engine: str = "auto") -> LoopResult:
    return get_engine(sys, eps, cfg).loop_backward(d, tau, engine=engine)


def signed_return(sys: PiecewiseSystem, eps: float, d: float, tau: float,
                  cfg: Optional[IntegratorConfig] = None) -> float:
    """Signed offset from the stable endpoint after one forward loop."""
    return loop_forward(sys, eps, d, tau, cfg).d1


@dataclass
class BoundCheck:
    name: str
    lo: float
    value: float
    hi: float

    @property
    def ok(self) -> bool:
        return self.lo <= self.value <= self.hi


@dataclass
class ScalingReport:
    d_grid: np.ndarray
    mu_used: float
    rows: list = field(default_factory=list)          # per-d BoundCheck lists
    slopes: dict = field(default_factory=dict)
    slope_targets: dict = field(default_factory=dict)
    slopes_pass: bool = True
    bounds_pass: bool = True
    failures: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "mu": self.mu_used,
            "bounds_pass": bool(self.bounds_pass),
            "slopes_pass": bool(self.slopes_pass),
            "slopes": {k: float(v) for k, v in self.slopes.items()},
            "slope_targets": {k: float(v) for k, v in self.slope_targets.items()},
            "n_bound_failures": len(self.failures),
        }


def _fit_slope(x: np.ndarray, y: np.ndarray) -> float:
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0])


def verify_scaling(sys: PiecewiseSystem, eps: float, tau: float,
                   d_grid: np.ndarray, mu: Optional[float] = None,
                   cfg: Optional[IntegratorConfig] = None,
                   engine_mode: str = "auto") -> ScalingReport:
    """Check the loop-map envelope bounds and exponent fits on a d-grid."""
    eng = get_engine(sys, eps, cfg)
    cc: ChaosConstants = eng.constants
    if mu is None:
        mu = cc.mu0 / 2.0
    if mu >= cc.mu0:
        raise ValueError("mu must be below mu0")
    d_grid = np.asarray(d_grid, dtype=float)

    rep = ScalingReport(d_grid=d_grid, mu_used=float(mu))
    fwd, bwd = [], []
    for d in d_grid:
        rf = eng.loop_forward(float(d), tau, engine=engine_mode)
        rb = eng.loop_backward(float(d), tau, engine=engine_mode)
        fwd.append(rf)
        bwd.append(rb)
        L = abs(np.log(d))
        checks = [
            BoundCheck("D_fwd", d ** (cc.sigma_fwd + mu), rf.D1,
                       d ** (cc.sigma_fwd - mu)),
            BoundCheck("D_bwd", d ** (cc.sigma_bwd + mu), rb.D1,
                       d ** (cc.sigma_bwd - mu)),
            BoundCheck("half_fwd", 0.0, float(np.linalg.norm(rf.P_half)),
                       d ** (cc.sigma_fwd_plus - mu)),
            BoundCheck("half_bwd", 0.0, float(np.linalg.norm(rb.P_half)),
                       d ** (cc.sigma_bwd_minus - mu)),
            BoundCheck("T_fwd", (cc.Sigma_fwd - mu) * L, rf.T1 - tau,
                       (cc.Sigma_fwd + mu) * L),
            BoundCheck("T_bwd", (cc.Sigma_bwd - mu) * L, tau - rb.T1,
                       (cc.Sigma_bwd + mu) * L),
            BoundCheck("Thalf_fwd", (cc.Sigma_fwd_plus - mu) * L,
                       rf.T_half - tau, (cc.Sigma_fwd_plus + mu) * L),
            BoundCheck("Thalf_bwd", (cc.Sigma_bwd_minus - mu) * L,
                       tau - rb.T_half, (cc.Sigma_bwd_minus + mu) * L),
        ]
        rep.rows.append((float(d), checks))
        for c in checks:
            if not c.ok:
                rep.bounds_pass = False
                rep.failures.append((float(d), c))

    ln_d = np.log(d_grid)
    L = np.abs(ln_d)
    rep.slopes = {
        "sigma_fwd": _fit_slope(ln_d, np.log([r.D1 for r in fwd])),
        "sigma_bwd": _fit_slope(ln_d, np.log([r.D1 for r in bwd])),
        "sigma_fwd_plus": _fit_slope(
            ln_d, np.log([np.linalg.norm(r.P_half) for r in fwd])),
        "sigma_bwd_minus": _fit_slope(
            ln_d, np.log([np.linalg.norm(r.P_half) for r in bwd])),
        "Sigma_fwd": _fit_slope(L, np.array([r.T1 - tau for r in fwd])),
        "Sigma_bwd": _fit_slope(L, np.array([tau - r.T1 for r in bwd])),
        "Sigma_fwd_plus": _fit_slope(L, np.array([r.T_half - tau for r in fwd])),
        "Sigma_bwd_minus": _fit_slope(L, np.array([tau - r.T_half for r in bwd])),
    }
    rep.slope_targets = {
        "sigma_fwd": cc.sigma_fwd, "sigma_bwd": cc.sigma_bwd,
        "sigma_fwd_plus": cc.sigma_fwd_plus,
        "sigma_bwd_minus": cc.sigma_bwd_minus,
        "Sigma_fwd": cc.Sigma_fwd, "Sigma_bwd": cc.Sigma_bwd,
        "Sigma_fwd_plus": cc.Sigma_fwd_plus,
        "Sigma_bwd_minus": cc.Sigma_bwd_minus,
    }
    for k, v in rep.slopes.items():
        if abs(v - rep.slope_targets[k]) > mu:
            rep.slopes_pass = False
    return rep


def write_scaling_csv(rep: ScalingReport, path) -> None:
    with open(path, "w") as fh:
        fh.write("d,name,bound_lo,value,bound_hi,pass\n")
        for d, checks in rep.rows:
            for c in checks:
                fh.write(f"{d:.17g},{c.name},{c.lo:.17g},{c.value:.17g},"
                         f"{c.hi:.17g},{int(c.ok)}\n")
