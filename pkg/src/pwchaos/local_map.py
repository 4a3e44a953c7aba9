"""Loop-map engine: reference legs, exact dead-zone transit, tangent offsets.

A single forward loop from the return section back to itself decomposes as

  [section -> sphere r_in]   perturbed leg, integrated directly,
  [inside the ball]          forcing is identically zero there, so both half
                             energies are conserved exactly and the transit
                             reduces to closed-form level-set algebra plus
                             1-d quadratures for the transit times,
  [sphere r_in -> section]   perturbed leg, integrated directly.

Offsets from the invariant leaves are carried to first order: a seed at
signed arclength u inside the stable endpoint enters the ball on the energy
level E = E0 + E1*u, where E1 is computed from one variational integration
along the stable reference leg.  Because the energy is the exact transversal
coordinate in the ball, u may be far below the spacing of representable
points; only magnitudes (not point coordinates) carry it.  This is what the
nested-interval construction needs: its steering offsets scale like
eps^(6/sigma_lo) and deeper, underneath float spacing around the section.

Accuracy ledger: reference legs and endpoint matching are good to ~1e-13;
dropped second-order terms are O(u^2 * curvature) and O(E'^2); the reported
loop data is therefore exact for a system within ~1e-12 of the encoded one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels as K
from .errors import DeepModeUnavailable, EscapedTube, NoBracket, PwChaosError
from .flow import IntegratorConfig, _initial_side, _run_leg
from .geometry import ChaosConstants, Section, derive_constants, main_sections
from .homoclinic import HomoclinicOrbit, compute_homoclinic
from .system import PiecewiseSystem, compute_saddle_data, time_reversed

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)

DEFAULT_SPLIT_THRESHOLD = 1e-7   # below this offset, use the tangent engine
_REF_CFG = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-13, event_tol=1e-13,
                            max_step=0.2)


def _gl_on(a: float, b: float, f) -> float:
    h = 0.5 * (b - a)
    return float(h * np.dot(_GL_WEIGHTS, f(a + h + h * _GL_NODES)))


# --------------------------------------------------------------------------
# exact transit through the dead zone (cubic family)


@dataclass
class BallTransit:
    E: float
    E_out: float
    x_cross: np.ndarray       # crossing point on the switching curve
    ell_cross: float           # |x_c|, arclength from the origin
    T_entry: float             # sphere -> crossing
    T_exit: float              # crossing -> sphere
    entry_state: np.ndarray
    exit_state: np.ndarray
    chart: "SaddleBallChart" = field(repr=False, default=None)

    @property
    def T_total(self) -> float:
        return self.T_entry + self.T_exit

    def state_at(self, dt: float) -> np.ndarray:
        """State dt after entering the sphere (0 <= dt <= T_total)."""
        ch = self.chart
        if dt <= self.T_entry:
            return ch._state_entry(self.E, self.T_entry - dt)
        return ch._state_exit(self.E_out, dt - self.T_entry)


class SaddleBallChart:
    """Level-set algebra of the two cubic Hamiltonians inside r_in."""

    def __init__(self, sys: PiecewiseSystem, gamma: HomoclinicOrbit,
                 r_in: Optional[float] = None):
        if sys.ip[0] != K.KIND_CUBIC:
            raise DeepModeUnavailable(
                "dead-zone transit needs the cubic family (polynomial halves "
                "would require tracing their local separatrices)")
        if sys.forcing_deadzone <= 0 and sys.fp[K.FP_AMP] != 0:
            raise DeepModeUnavailable(
                "forcing has no dead zone around the origin")
        self.sys = sys
        fp = sys.fp
        self.sv = fp[K.FP_SV]
        self.gy = fp[K.FP_GY]
        self.c_plus = fp[K.FP_CPLUS]
        self.c_minus = fp[K.FP_CMINUS]
        rmax = sys.forcing_deadzone if sys.forcing_deadzone > 0 else 0.2
        self.r_in = r_in if r_in is not None else 0.75 * rmax
        if self.r_in > rmax:
            raise DeepModeUnavailable("r_in exceeds the forcing dead zone")
        # branch signs from the loop geometry near the origin
        t_small = 2.0 / np.sqrt(min(self.c_plus, self.c_minus))
        self.sx_plus = float(np.sign(gamma.gamma(t_small)[0]))
        self.sx_minus = float(np.sign(gamma.gamma(-t_small)[0]))
        self.sy_plus = float(self.gy)     # sign of y in the plus region
        self.sy_minus = float(-self.gy)
        self.e_max = 0.25 * min(1.0, (0.5 * self.r_in) ** 2)

    # -- level algebra ---------------------------------------------------
    def hplus(self, p) -> float:
        x, y = p[0], p[1]
        return 0.5 * y * y - self.c_plus * (0.5 * x * x - 0.25 * x ** 4)

    def hminus(self, p) -> float:
        x, y = p[0], p[1]
        return 0.5 * y * y - self.c_minus * (0.5 * x * x - 0.25 * x ** 4)

    def grad_hplus(self, p) -> np.ndarray:
        x, y = p[0], p[1]
        return np.array([-self.c_plus * (x - x ** 3), y])

    def grad_hminus(self, p) -> np.ndarray:
        x, y = p[0], p[1]
        return np.array([-self.c_minus * (x - x ** 3), y])

    def _sphere_xi(self, c: float, e: float) -> float:
        """|x| where the level y^2 = c(x^2 - x^4/2 - e) meets r_in."""
        r2 = self.r_in * self.r_in
        A = 1.0 + c
        disc = A * A - 2.0 * c * (c * e + r2)
        if disc <= 0:
            raise PwChaosError("level does not meet the sphere")
        w = (A - np.sqrt(disc)) / c
        return float(np.sqrt(w))

    @staticmethod
    def _x_turn(e: float) -> float:
        """Small positive root of x^2 - x^4/2 = e (stable for tiny e)."""
        s = np.sqrt(max(1.0 - 2.0 * e, 0.0))
        return float(np.sqrt(2.0 * e / (1.0 + s)))

    def _transit_time(self, c: float, e: float, xi_edge: float) -> float:
        """Time along y^2 = c(x^2 - x^4/2 - e) from the turning point to
        |x| = xi_edge; log-singular in e, evaluated stably."""
        xc = self._x_turn(e)
        sq = np.sqrt(max(xi_edge * xi_edge - xc * xc, 0.0))
        U = np.log(xi_edge + sq) - 0.5 * np.log(
            2.0 * e / (1.0 + np.sqrt(max(1.0 - 2.0 * e, 0.0))))
        s0 = min(U, 45.0)

        def integrand(s):
            xt = xi_edge * np.cosh(s) - sq * np.sinh(s)
            return 1.0 / np.sqrt(2.0 - xc * xc - xt * xt)

        total = 0.0
        a = 0.0
        while a < s0 - 1e-14:
            b = min(a + 1.0, s0)
            total += _gl_on(a, b, integrand)
            a = b
        if U > s0:
            total += (U - s0) / np.sqrt(2.0 - xc * xc)
        return float(np.sqrt(2.0 / c) * total)

    def _time_to_x(self, c: float, e: float, xi_edge: float, x: float) -> float:
        """Time from |x| down to the turning point along the level."""
        return self._transit_time(c, e, x) if x > self._x_turn(e) else 0.0

    # -- states on the levels ---------------------------------------------
    def _state_entry(self, E: float, t_before_cross: float) -> np.ndarray:
        """Entry-side state a given time before the switching crossing."""
        c = self.c_plus
        e = -2.0 * E / c
        xi = self._x_find_at_time(c, e, t_before_cross)
        y = self.sy_plus * np.sqrt(max(c * (xi * xi - 0.5 * xi ** 4 - e), 0.0))
        return np.array([self.sx_plus * xi, y])

    def _state_exit(self, E_out: float, t_after_cross: float) -> np.ndarray:
        c = self.c_minus
        e = -2.0 * E_out / c
        xi = self._x_find_at_time(c, e, t_after_cross)
        y = self.sy_minus * np.sqrt(max(c * (xi * xi - 0.5 * xi ** 4 - e), 0.0))
        return np.array([self.sx_plus * xi, y])

    def _x_find_at_time(self, c: float, e: float, dt: float) -> float:
        """|x| on the level at time dt from the turning point (bisection)."""
        xc = self._x_turn(e)
        if dt <= 0:
            return xc
        lo, hi = xc, self.r_in
        for _ in range(200):
            mid = np.sqrt(lo * hi) if lo > 0 else 0.5 * (lo + hi)
            if self._transit_time(c, e, mid) < dt:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * hi:
                break
        return 0.5 * (lo + hi)

    # -- transit -----------------------------------------------------------
    def transit(self, E: float) -> BallTransit:
        """Exact passage data for entry energy E (inside orientation)."""
        c_p, c_m = self.c_plus, self.c_minus
        e = -2.0 * E / c_p
        if not (0.0 < e <= self.e_max):
            if e <= 0:
                raise EscapedTube(
                    "entry energy on the outer side of the stable leaf")
            raise PwChaosError(f"entry level too far from the leaf (e={e:g})")
        xc = self._x_turn(e)
        E_out = E * c_m / c_p
        xi_in = self._sphere_xi(c_p, e)
        xi_out = self._sphere_xi(c_m, e)   # same e: -2 E_out / c_m = e
        T_in = self._transit_time(c_p, e, xi_in)
        T_out = self._transit_time(c_m, e, xi_out)
        y_in = self.sy_plus * np.sqrt(max(c_p * (xi_in ** 2 - 0.5 * xi_in ** 4 - e), 0.0))
        y_out = self.sy_minus * np.sqrt(max(c_m * (xi_out ** 2 - 0.5 * xi_out ** 4 - e), 0.0))
        return BallTransit(
            E=E, E_out=E_out,
            x_cross=np.array([self.sx_plus * xc, 0.0]), ell_cross=xc,
            T_entry=T_in, T_exit=T_out,
            entry_state=np.array([self.sx_plus * xi_in, y_in]),
            exit_state=np.array([self.sx_plus * xi_out, y_out]),
            chart=self)

    # -- exact leaf points on the sphere ------------------------------------
    def leaf_entry_point(self) -> np.ndarray:
        xi = self._sphere_xi(self.c_plus, 0.0)
        y = self.sy_plus * np.sqrt(self.c_plus * (xi * xi - 0.5 * xi ** 4))
        return np.array([self.sx_plus * xi, y])

    def leaf_exit_point(self) -> np.ndarray:
        xi = self._sphere_xi(self.c_minus, 0.0)
        y = self.sy_minus * np.sqrt(self.c_minus * (xi * xi - 0.5 * xi ** 4))
        return np.array([self.sx_plus * xi, y])

    def exit_offset_direction(self) -> np.ndarray:
        """d(exit point)/d(E_out) along the sphere at the unstable leaf."""
        p = self.leaf_exit_point()
        ts = np.array([-p[1], p[0]])
        ts /= np.linalg.norm(ts)
        rate = float(self.grad_hminus(p) @ ts)
        return ts / rate


# --------------------------------------------------------------------------
# reference legs


@dataclass
class StableRef:
    tau: float
    ell: float
    P: np.ndarray
    t_in: float
    x_in: np.ndarray
    E0: float
    E1: float
    v_in: np.ndarray
    dt_sphere: float = 0.0     # d(sphere-arrival time)/d(offset)
    leg_t: np.ndarray = field(repr=False, default=None)
    leg_x: np.ndarray = field(repr=False, default=None)


@dataclass
class UnstableRef:
    T: float
    ell: float
    P: np.ndarray
    t_out: float
    x_out: np.ndarray
    E0: float
    q: np.ndarray              # forward transport of the unit-E' exit offset
    dur: float
    c_ell: float               # d(arrival arclength)/d(E_out)
    c_t: float                 # d(arrival time)/d(E_out)
    leg_t: np.ndarray = field(repr=False, default=None)
    leg_x: np.ndarray = field(repr=False, default=None)


@dataclass
class LoopResult:
    """One forward (or backward) passage around the loop."""
    d: float
    tau: float
    T1: float
    P1: np.ndarray
    T_half: float
    P_half: np.ndarray
    d1: float                 # signed offset from the stable endpoint at T1
    D1: float                 # signed offset from the unstable endpoint at T1
    split: float              # D(P_u, P_s)(T1), endpoint splitting
    engine: str = "direct"
    E: float = np.nan
    E_out: float = np.nan
    transit: Optional[BallTransit] = field(repr=False, default=None)
    sref: Optional[StableRef] = field(repr=False, default=None)
    uref: Optional[UnstableRef] = field(repr=False, default=None)
    samples: Optional[tuple] = field(repr=False, default=None)

    @property
    def flight_time(self) -> float:
        return abs(self.T1 - self.tau)


class LoopEngine:
    """Shared context for loop maps at fixed (system, eps)."""

    def __init__(self, sys: PiecewiseSystem, eps: float,
                 gamma: Optional[HomoclinicOrbit] = None,
                 cfg: Optional[IntegratorConfig] = None,
                 split_threshold: float = DEFAULT_SPLIT_THRESHOLD,
                 delta: Optional[float] = None):
        self.sys = sys
        self.eps = float(eps)
        self.cfg = cfg or _REF_CFG
        self.gamma = gamma or compute_homoclinic(sys)
        self.saddle = compute_saddle_data(sys)
        self.constants = derive_constants(self.saddle)
        self.L0, self.Lin = main_sections(sys, self.gamma, delta=delta)
        self.split_threshold = split_threshold
        self.chart = SaddleBallChart(sys, self.gamma)
        self._sref_cache: dict[float, StableRef] = {}
        self._warm_offset: dict[int, float] = {}
        self._dur_guess = None
        self._reversed: Optional["LoopEngine"] = None
        # convenience
        self.ell_anchor = self.L0.ell_anchor
        self._leg_span = 6.0 / min(self.gamma.lambda_u_minus,
                                   abs(self.gamma.lambda_s_plus)) + 4.0

    # -- reference machinery -------------------------------------------
    def _entry_energy(self, ell: float, tau: float, timesign: int):
        """Integrate from (tau, section(ell)) to the sphere; return the
        relevant half energy at entry and the entry record.  Returns None in
        the first slot when the sphere is not reached (offset too large)."""
        p0 = self.L0.point_at(ell)
        side = _initial_side(self.sys, self.eps, tau, p0, timesign,
                             self.cfg.event_tol)
        t_end = tau + timesign * self._leg_span
        status, ts, ys, _ = _run_leg(self.sys, self.eps, tau, p0, side, t_end,
                                     self.cfg, monitor_radius=True,
                                     rad2=self.chart.r_in ** 2)
        if status != K.LEG_RADIUS:
            return None, float(ts[-1]), ys[-1, :2], side, (ts, ys[:, :2])
        x_in = ys[-1, :2]
        h = self.chart.hplus(x_in) if timesign > 0 else self.chart.hminus(x_in)
        return float(h), float(ts[-1]), x_in, side, (ts, ys[:, :2])

    def _match_leaf(self, tau: float, timesign: int) -> tuple[float, float, np.ndarray, int, tuple]:
        """Secant on the section coordinate zeroing the entry energy.

        Only seeds within ~r_in^2/(2 sqrt(2) c) of the leaf reach the sphere,
        so the cold start scans for a readable probe; afterwards the engine
        warm-starts from the latest matched offset.
        """
        la = self.ell_anchor
        warm = self._warm_offset.get(timesign, 0.0)
        scan_step = 0.4 * self.chart.e_max / abs(
            self.chart.c_plus if timesign > 0 else self.chart.c_minus)
        probe = None
        for k in range(33):
            off = warm + scan_step * ((k + 1) // 2) * (1 if k % 2 else -1)
            rec = self._entry_energy(la + off, tau, timesign)
            if rec[0] is not None:
                probe = (la + off, rec)
                break
        if probe is None:
            raise NoBracket("no section seed reaches the sphere")
        l0, rec0 = probe
        f0 = rec0[0]
        l1 = l0 + max(1e-7, 0.02 * scan_step)
        rec1 = self._entry_energy(l1, tau, timesign)
        if rec1[0] is None:
            l1 = l0 - max(1e-7, 0.02 * scan_step)
            rec1 = self._entry_energy(l1, tau, timesign)
            if rec1[0] is None:
                raise NoBracket("leaf matching lost the readable window")
        f1 = rec1[0]
        best = (l0, rec0) if abs(f0) < abs(f1) else (l1, rec1)
        for _ in range(60):
            if f1 == f0:
                break
            l2 = l1 - f1 * (l1 - l0) / (f1 - f0)
            rec2 = self._entry_energy(l2, tau, timesign)
            if rec2[0] is None:
                break
            l0, f0, l1, f1 = l1, f1, l2, rec2[0]
            if abs(f1) < abs(best[1][0]):
                best = (l2, rec2)
            if abs(f1) < 1e-15 or abs(l1 - l0) < 1e-15:
                break
        ell = best[0]
        _, t_in, x_in, side, leg = best[1]
        self._warm_offset[timesign] = ell - la
        return ell, t_in, x_in, side, leg

    def stable_ref(self, tau: float) -> StableRef:
        key = round(float(tau), 12)
        hit = self._sref_cache.get(key)
        if hit is not None:
            return hit
        ell, t_in, x_in, side, leg = self._match_leaf(tau, +1)
        P = self.L0.point_at(ell)
        v0 = -self.L0.tangent_at(ell)          # inner direction (toward 0)
        status, ts, ys, _ = _run_leg(self.sys, self.eps, tau, P, side,
                                     tau + self._leg_span, self.cfg, mode=1,
                                     v0=v0, monitor_radius=True,
                                     rad2=self.chart.r_in ** 2)
        if status != K.LEG_RADIUS:
            raise NoBracket("variational stable leg missed the sphere")
        x_in = ys[-1, :2]
        v_in = ys[-1, 2:]
        E0 = self.chart.hplus(x_in)
        E1 = float(self.chart.grad_hplus(x_in) @ v_in)
        F_in = self.sys.field(float(ts[-1]), x_in, side, self.eps)
        dt_sphere = -float(x_in @ v_in) / float(x_in @ F_in)
        ref = StableRef(tau=tau, ell=ell, P=P, t_in=float(ts[-1]), x_in=x_in,
                        E0=float(E0), E1=E1, v_in=v_in, dt_sphere=dt_sphere,
                        leg_t=ts, leg_x=ys[:, :2])
        self._sref_cache[key] = ref
        return ref

    def unstable_ref(self, T: float) -> UnstableRef:
        ell, t_out, x_out, side, leg = self._match_leaf(T, -1)
        P = self.L0.point_at(ell)
        # two backward variational legs give the transport from T to t_out
        cols = []
        for v0 in (np.array([1.0, 0.0]), np.array([0.0, 1.0])):
            status, ts, ys, _ = _run_leg(self.sys, self.eps, T, P, side,
                                         T - self._leg_span, self.cfg, mode=1,
                                         v0=v0, monitor_radius=True,
                                         rad2=self.chart.r_in ** 2)
            if status != K.LEG_RADIUS:
                raise NoBracket("variational unstable leg missed the sphere")
            cols.append(ys[-1, 2:])
        back = np.stack(cols, axis=1)          # deviation at t_out per unit at T
        fwd = np.linalg.inv(back)
        E0 = self.chart.hminus(ys[-1, :2])
        m_out = self.chart.exit_offset_direction()
        q = fwd @ m_out
        grad = self.sys.switching.gradient(P)
        F = self.sys.field(T, P, side, self.eps)
        dt_dE = -float(grad @ q) / float(grad @ F)
        tang = self.L0.tangent_at(ell)
        dl_dE = float(tang @ (q + F * dt_dE))
        return UnstableRef(T=T, ell=ell, P=P, t_out=float(leg[0][-1]),
                           x_out=leg[1][-1], E0=float(E0), q=q,
                           dur=float(T - leg[0][-1]), c_ell=dl_dE, c_t=dt_dE,
                           leg_t=leg[0], leg_x=leg[1])

    # -- stable/unstable endpoints (precision variant) -------------------
    def endpoint_stable(self, tau: float) -> tuple[float, np.ndarray]:
        r = self.stable_ref(tau)
        return r.ell, r.P

    def endpoint_unstable(self, T: float) -> tuple[float, np.ndarray]:
        r = self.unstable_ref(T)
        return r.ell, r.P

    def split_distance(self, T: float) -> float:
        """D(P_u, P_s)(T) = ell(P_s) - ell(P_u)."""
        return self.stable_ref(T).ell - self.unstable_ref(T).ell

    # -- loop maps --------------------------------------------------------
    def loop_forward(self, d: float, tau: float,
                     engine: str = "auto") -> LoopResult:
        if d <= 0:
            raise ValueError("offset d must be positive")
        if engine == "auto":
            engine = "direct" if d >= self.split_threshold else "tangent"
        if engine == "direct":
            return self._loop_direct(d, tau)
        return self._loop_tangent(d, tau)

    def _loop_tangent(self, d: float, tau: float) -> LoopResult:
        # d is the signed leaf offset: the energy chart makes it meaningful
        # far below the spacing of representable section points
        sref = self.stable_ref(tau)
        E = sref.E1 * d
        tr = self.chart.transit(E)
        t_cross = sref.t_in + sref.dt_sphere * d + tr.T_entry
        t_out = t_cross + tr.T_exit
        # choose the arrival reference time so its backward leg starts at the
        # sphere exactly when the true orbit exits the ball
        Tg = t_out + (self._dur_guess if self._dur_guess is not None else 2.5)
        uref = self.unstable_ref(Tg)
        for _ in range(8):
            T_new = t_out + uref.dur
            if abs(T_new - uref.T) < 5e-13 * max(1.0, abs(T_new)):
                break
            uref = self.unstable_ref(T_new)
        self._dur_guess = uref.dur
        dE = tr.E_out
        T1 = uref.T + uref.c_t * dE
        dl = uref.c_ell * dE
        P1 = uref.P + uref.q * dE
        D1 = -dl                                   # D(P1, P_u(T1))
        split = self.stable_ref(T1).ell - uref.ell  # D(P_u, P_s)(T1)
        d1 = D1 + split
        return LoopResult(d=d, tau=tau, T1=float(T1), P1=P1,
                          T_half=float(t_cross), P_half=tr.x_cross,
                          d1=float(d1), D1=float(D1), split=float(split),
                          engine="tangent", E=float(E), E_out=float(tr.E_out),
                          transit=tr, sref=sref, uref=uref)

    def _loop_direct(self, d: float, tau: float,
                     want_samples: bool = False) -> LoopResult:
        sref = self.stable_ref(tau)
        ell_q = sref.ell - d
        if ell_q < self.L0.ell_lo:
            raise EscapedTube(f"offset {d:g} leaves the section arc")
        p = self.L0.point_at(ell_q)
        side = _initial_side(self.sys, self.eps, tau, p, +1.0,
                             self.cfg.event_tol)
        t, y = tau, p
        la = self.ell_anchor
        crossings = []
        chunks_t, chunks_x = [], []
        h_init = 0.0
        while len(crossings) < 2:
            status, ts, ys, h_init = _run_leg(
                self.sys, self.eps, t, y, side,
                t + self.cfg.max_time, self.cfg, h_init=h_init)
            if want_samples:
                chunks_t.append(ts)
                chunks_x.append(ys[:, :2])
            t, y = float(ts[-1]), ys[-1, :2].copy()
            if status != K.LEG_GCROSS:
                raise EscapedTube(
                    f"loop from d={d:g} ended with status {status} at t={t}")
            ell = self.L0.ell_of(y)
            if not (-0.02 * la < ell < 0.75 * la or abs(ell - la) < 0.5 * la):
                raise EscapedTube(f"unexpected crossing at ell={ell:g}")
            crossings.append((t, y.copy(), ell))
            side = -side
        (t_half, p_half, ell_half), (t1, p1, ell1) = crossings
        if not (0 < ell_half < 0.6 * la) or abs(ell1 - la) > 0.6 * la:
            raise EscapedTube("crossing pattern is not one inner passage "
                              "followed by a section return")
        ell_pu = self.unstable_ref(t1).ell
        ell_ps = self.stable_ref(t1).ell
        D1 = ell_pu - ell1
        d1 = ell_ps - ell1
        samples = (np.concatenate(chunks_t), np.vstack(chunks_x)) if want_samples else None
        return LoopResult(d=d, tau=tau, T1=t1, P1=p1, T_half=t_half,
                          P_half=p_half, d1=float(d1), D1=float(D1),
                          split=float(ell_ps - ell_pu), engine="direct",
                          sref=sref, samples=samples)

    # -- time reversal ------------------------------------------------------
    def reversed(self) -> "LoopEngine":
        if self._reversed is None:
            rsys = time_reversed(self.sys)
            self._reversed = LoopEngine(rsys, self.eps, cfg=self.cfg,
                                        split_threshold=self.split_threshold)
            self._reversed._reversed = self
        return self._reversed

    def loop_backward(self, d: float, tau: float,
                      engine: str = "auto") -> LoopResult:
        """Backward passage from the inner offset of the unstable endpoint;
        realized as a forward loop of the time-reversed system."""
        rev = self.reversed()
        res = rev.loop_forward(d, -tau, engine=engine)
        return LoopResult(
            d=d, tau=tau, T1=-res.T1, P1=res.P1, T_half=-res.T_half,
            P_half=res.P_half, d1=res.d1, D1=res.D1, split=res.split,
            engine=res.engine + "-reversed", E=res.E, E_out=res.E_out,
            transit=res.transit, sref=res.sref, uref=res.uref,
            samples=res.samples)
