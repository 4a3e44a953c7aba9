"""Event-driven integration of the piecewise-smooth system.

Between switching-curve hits the state obeys the one-sided smooth field; a
hit is polished to |G| <= event_tol and classified as transversal crossing,
sliding entry, or unresolved tangency.  Crossings re-seed the integration on
the outgoing side with the state unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from . import kernels as K
from .errors import (LeftDomain, SectionMissed, SlidingEncountered, StepLimit,
                     TangencyUnresolved)
from .system import PiecewiseSystem


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-11
    abs_tol: float = 1e-12
    max_step: float = 0.25
    event_tol: float = 1e-13
    max_time: float = 400.0
    max_steps: int = 60_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.max_step > 0
                and self.event_tol > 0 and self.max_time > 0):
            raise ValueError("all integrator tolerances must be positive")
        if self.event_tol > self.abs_tol:
            raise ValueError("event_tol must not exceed abs_tol")


class CrossingDirection(Enum):
    MinusToPlus = "-+"
    PlusToMinus = "+-"


@dataclass(frozen=True)
class CrossingEvent:
    time: float
    point: np.ndarray
    transversality_minus: float
    transversality_plus: float
    direction: CrossingDirection


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    sides: np.ndarray
    events: list[CrossingEvent]
    epsilon: float
    start: tuple[float, np.ndarray]

    def __len__(self) -> int:
        return len(self.times)

    @property
    def end_time(self) -> float:
        return float(self.times[-1])

    @property
    def end_state(self) -> np.ndarray:
        return self.states[-1].copy()

    def to_csv(self, path) -> None:
        evt_times = {float(e.time) for e in self.events}
        with open(path, "w") as fh:
            fh.write("t,x1,x2,region,event_flag\n")
            for t, (x1, x2), s in zip(self.times, self.states, self.sides):
                flag = 1 if float(t) in evt_times else 0
                fh.write(f"{t:.17g},{x1:.17g},{x2:.17g},{int(s)},{flag}\n")


def _escape_radius(sys: PiecewiseSystem) -> float:
    xlo, xhi, ylo, yhi = sys.domain
    return 1.2 * float(np.hypot(max(abs(xlo), abs(xhi)), max(abs(ylo), abs(yhi))))


def _run_leg(sys: PiecewiseSystem, eps: float, t0: float, y0: np.ndarray,
             side: int, t_end: float, cfg: IntegratorConfig, mode: int = 0,
             v0: Optional[np.ndarray] = None, monitor_radius: bool = False,
             rad2: float = 0.0, levelc: float = 0.0,
             h_init: float = 0.0):
    """One smooth leg; returns (status, times, states, h_last).

    states has 2 columns in mode 0 and 4 (point + tangent) in mode 1.
    """
    n = 4 if mode == 1 else 2
    yfull = np.zeros(4)
    yfull[0:2] = y0[0:2]
    if mode == 1:
        yfull[2:4] = v0 if v0 is not None else (y0[2:4] if y0.size == 4 else 0.0)
    cap = cfg.max_steps + 2
    ts = np.empty(cap)
    ys = np.empty((cap, 4))
    status, nsamp, _, h_last = K._leg(
        t0, yfull, n, side, mode, eps, sys.ip, sys.fp,
        t_end, cfg.rel_tol, cfg.abs_tol, cfg.max_step, cfg.event_tol,
        1 if monitor_radius else 0, rad2, levelc,
        _escape_radius(sys) ** 2, cfg.max_steps, ts, ys, h_init)
    return status, ts[:nsamp].copy(), ys[:nsamp, :n].copy(), h_last


def _one_sided_rates(sys: PiecewiseSystem, eps: float, t: float,
                     p: np.ndarray) -> tuple[float, float]:
    """grad G . (f^- + eps g), grad G . (f^+ + eps g) at (t, p)."""
    gx, gy = K.switch_grad(p[0], p[1], sys.ip, sys.fp)
    fmx, fmy = K.field(t, p[0], p[1], -1, eps, sys.ip, sys.fp)
    fpx, fpy = K.field(t, p[0], p[1], 1, eps, sys.ip, sys.fp)
    return gx * fmx + gy * fmy, gx * fpx + gy * fpy


def detect_sliding(sys: PiecewiseSystem, eps: float, t: float,
                   p: np.ndarray, event_tol: float = 1e-13) -> bool:
    """Filippov sliding test at a switching-curve point (forward time)."""
    if abs(sys.switching.value(p)) > max(event_tol, 1e-10):
        raise ValueError("detect_sliding requires a point on the switching curve")
    w_minus, w_plus = _one_sided_rates(sys, eps, t, p)
    return w_plus < 0.0 < w_minus


def _initial_side(sys: PiecewiseSystem, eps: float, t: float, p: np.ndarray,
                  timesign: float, event_tol: float) -> int:
    g0 = sys.switching.value(p)
    if abs(g0) > K._CONFIRM_FACTOR * event_tol:
        return 1 if g0 > 0 else -1
    w_minus, w_plus = _one_sided_rates(sys, eps, t, p)
    candidates = []
    for side, w in ((-1, w_minus), (1, w_plus)):
        if timesign * w * side > 0:
            candidates.append((side, abs(w)))
    if not candidates:
        if timesign * w_plus < 0.0 < timesign * w_minus:
            raise SlidingEncountered(f"both fields push onto the curve at {p}")
        raise TangencyUnresolved(f"cannot leave the switching curve at {p}")
    if len(candidates) == 2:
        # genuine crossing point: the solution passes through; pick the
        # outgoing side for this time direction
        side = 1 if timesign * w_plus > 0 else -1
        return side
    return candidates[0][0]


def _classify_event(sys: PiecewiseSystem, eps: float, t: float, p: np.ndarray,
                    side_in: int, timesign: float,
                    event_tol: float) -> CrossingEvent:
    w_minus, w_plus = _one_sided_rates(sys, eps, t, p)
    w_in = w_plus if side_in > 0 else w_minus
    w_out = w_minus if side_in > 0 else w_plus
    if abs(w_in) < event_tol:
        raise TangencyUnresolved(f"tangential switching hit at t={t}, p={p}")
    if timesign * w_plus < 0.0 < timesign * w_minus:
        raise SlidingEncountered(f"sliding entry at t={t}, p={p}")
    if abs(w_out) < event_tol:
        raise TangencyUnresolved(f"outgoing tangency at t={t}, p={p}")
    direction = (CrossingDirection.PlusToMinus if side_in > 0
                 else CrossingDirection.MinusToPlus)
    if timesign < 0:
        # report the crossing as the forward-time solution experiences it
        direction = (CrossingDirection.MinusToPlus
                     if direction == CrossingDirection.PlusToMinus
                     else CrossingDirection.PlusToMinus)
    return CrossingEvent(time=float(t), point=p.copy(),
                         transversality_minus=float(w_minus),
                         transversality_plus=float(w_plus),
                         direction=direction)


def advance(sys: PiecewiseSystem, eps: float, tau: float, xi: np.ndarray,
            t_end: float, cfg: Optional[IntegratorConfig] = None) -> Trajectory:
    """Trajectory of the piecewise system from (tau, xi) to t_end.

    Backward runs (t_end < tau) are allowed; event bookkeeping is in solution
    time either way.
    """
    cfg = cfg or IntegratorConfig()
    xi = np.asarray(xi, dtype=float)
    if t_end == tau:
        raise ValueError("t_end must differ from tau")
    timesign = 1.0 if t_end > tau else -1.0
    side = _initial_side(sys, eps, tau, xi, timesign, cfg.event_tol)

    xlo, xhi, ylo, yhi = sys.domain
    if not (xlo <= xi[0] <= xhi and ylo <= xi[1] <= yhi):
        raise LeftDomain(f"start {xi} outside the domain box")

    times = [np.array([tau])]
    states = [xi[None, :].copy()]
    sides = [np.array([side], dtype=np.int8)]
    events: list[CrossingEvent] = []
    t, y = tau, xi.copy()
    h_init = 0.0
    budget = cfg.max_steps
    while True:
        status, ts, ys, h_init = _run_leg(sys, eps, t, y, side, t_end, cfg,
                                          h_init=h_init)
        budget -= len(ts)
        times.append(ts[1:])
        states.append(ys[1:, :2])
        sides.append(np.full(len(ts) - 1, side, dtype=np.int8))
        t = float(ts[-1])
        y = ys[-1, :2].copy()
        if status == K.LEG_TEND:
            break
        if status == K.LEG_ESCAPE:
            raise LeftDomain(f"trajectory escaped near t={t}")
        if status == K.LEG_STEPLIMIT or budget <= 0:
            raise StepLimit(f"step budget exhausted at t={t}")
        if status == K.LEG_GCROSS:
            evt = _classify_event(sys, eps, t, y, side, timesign, cfg.event_tol)
            events.append(evt)
            side = -side
            if not (xlo <= y[0] <= xhi and ylo <= y[1] <= yhi):
                raise LeftDomain(f"trajectory left the domain box at t={t}")

    traj = Trajectory(times=np.concatenate(times),
                      states=np.vstack(states),
                      sides=np.concatenate(sides),
                      events=events, epsilon=eps, start=(tau, xi.copy()))
    return traj


class SectionDirection(Enum):
    Forward = 1
    Backward = -1


def flow_to_section(sys: PiecewiseSystem, eps: float, tau: float,
                    xi: np.ndarray, section, direction: SectionDirection,
                    cfg: Optional[IntegratorConfig] = None,
                    collect: bool = False):
    """First transversal intersection with the section arc.

    Returns (t*, x*) or, with collect=True, (t*, x*, trajectory_so_far).
    Intermediate switching-curve crossings off the section are passed
    through.
    """
    cfg = cfg or IntegratorConfig()
    xi = np.asarray(xi, dtype=float)
    timesign = 1.0 if direction == SectionDirection.Forward else -1.0
    t_end = tau + timesign * cfg.max_time
    side = _initial_side(sys, eps, tau, xi, timesign, cfg.event_tol)

    all_t = [np.array([tau])]
    all_x = [xi[None, :].copy()]
    events: list[CrossingEvent] = []
    t, y = tau, xi.copy()
    h_init = 0.0
    while True:
        status, ts, ys, h_init = _run_leg(sys, eps, t, y, side, t_end, cfg,
                                          h_init=h_init)
        if collect:
            all_t.append(ts[1:])
            all_x.append(ys[1:, :2])
        t = float(ts[-1])
        y = ys[-1, :2].copy()
        if status == K.LEG_TEND:
            raise SectionMissed(f"no section hit before t={t}")
        if status == K.LEG_ESCAPE:
            raise LeftDomain(f"trajectory escaped near t={t}")
        if status == K.LEG_STEPLIMIT:
            raise StepLimit(f"step budget exhausted at t={t}")
        evt = _classify_event(sys, eps, t, y, side, timesign, cfg.event_tol)
        events.append(evt)
        if section.contains(y):
            if collect:
                traj = Trajectory(times=np.concatenate(all_t),
                                  states=np.vstack(all_x),
                                  sides=np.zeros(sum(len(a) for a in all_t), dtype=np.int8),
                                  events=events, epsilon=eps,
                                  start=(tau, xi.copy()))
                return t, y, traj
            return t, y
        side = -side
