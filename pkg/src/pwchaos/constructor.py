"""Constructive selection of initial conditions shadowing a 0/1 itinerary.

Given admissible loop times (zeros of the splitting function separated by
gaps of order K0*(1+nu)*|ln eps|), the scheme builds nested offset intervals:
level n brackets the set of starting offsets whose n-th section return lands
inside the n-th scheduled time window and whose n-th return offset sweeps the
admissible range.  A 0 in the itinerary skips a window (the orbit lingers at
the saddle); a 1 spends it near the loop.

Numerical representation.  Successive levels contract by factors around
eps^(6/sigma_lo) ~ 1e-25, far below float spacing at the section, so levels
are parametrized by their own local offset (the offset from the stable leaf
at the frozen arrival time of the previous level, which the energy chart of
:mod:`pwchaos.local_map` resolves at any magnitude).  Freezing the previous
level at a representative makes the composed object a pseudo-orbit whose
jump defects are bounded by the endpoint-matching noise (~1e-13); every
certified inequality has margins many orders wider, and the defects are
reported alongside.  Terminal all-zero tails are realized by the stable-leaf
orbit itself, with the terminal mismatch reported the same way.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels as K
from .errors import (BracketLost, EmptySchedule, GapTooSmall, NotEnoughZeros,
                     PwChaosError)
from .flow import IntegratorConfig
from .local_map import LoopEngine, LoopResult
from .melnikov import ZeroClass, ZeroStructure

# --------------------------------------------------------------------------
# symbols


class Tail(Enum):
    Zeros = "zeros"
    Unspecified = "unspecified"


class Side(Enum):
    Future = "future"
    Past = "past"


@dataclass(frozen=True)
class SymbolSequence:
    prefix: tuple
    tail: Tail = Tail.Zeros
    side: Side = Side.Future

    def __post_init__(self):
        if len(self.prefix) == 0:
            raise ValueError("prefix must be nonempty")
        if any(s not in (0, 1) for s in self.prefix):
            raise ValueError("symbols must be 0 or 1")

    @staticmethod
    def from_string(s: str, tail: Tail = Tail.Zeros,
                    side: Side = Side.Future) -> "SymbolSequence":
        return SymbolSequence(tuple(int(c) for c in s), tail=tail, side=side)

    def symbol(self, j: int) -> int:
        """e_j with 1-based window index (future side)."""
        if j < 1:
            raise IndexError("future-side indices start at 1")
        if j <= len(self.prefix):
            return self.prefix[j - 1]
        if self.tail == Tail.Zeros:
            return 0
        raise IndexError(f"symbol {j} unspecified")

    @property
    def last_one_index(self) -> Optional[int]:
        """Index of the last 1 (None for the all-zero Zeros-tail sequence,
        unbounded tails unsupported by construction)."""
        ones = [j + 1 for j, s in enumerate(self.prefix) if s == 1]
        return ones[-1] if ones else None

    @property
    def ones_count(self) -> int:
        return sum(self.prefix)

    def reflected(self) -> "SymbolSequence":
        side = Side.Past if self.side == Side.Future else Side.Future
        return SymbolSequence(tuple(reversed(self.prefix)), tail=self.tail,
                              side=side)


# --------------------------------------------------------------------------
# admissible time sequences


class GapMode(Enum):
    Lambda = "lambda"     # gaps padded by Lambda^1, needs (minimal)
    Bj = "bj"             # gaps padded by the local bracket widths


@dataclass
class TimeSequence:
    times: np.ndarray            # T_1 .. T_{2m}
    tau: float
    nu: float
    gap_mode: GapMode
    eps: float
    b0: float
    b1: float
    brackets: list               # (beta_j, beta'_j) for each T_j
    lambda1: float
    zs: ZeroStructure = field(repr=False, default=None)

    def T(self, j: int) -> float:
        if j < 1 or j > len(self.times):
            raise IndexError(f"T_{j} not built (have {len(self.times)})")
        return float(self.times[j - 1])

    def B(self, j: int) -> float:
        """Bracket width B_j; B_0 is the width of the starting pair."""
        if j == 0:
            return self.b1 - self.b0
        a, b = self.brackets[j - 1]
        return b - a

    def bracket(self, j: int) -> tuple[float, float]:
        if j == 0:
            return self.b0, self.b1
        return self.brackets[j - 1]

    def window(self, j: int) -> tuple[float, float]:
        """Shadowing window [T_{2j-1}, T_{2j+1}] clipped to built times."""
        lo = self.T(2 * j - 1)
        hi = self.T(2 * j + 1) if 2 * j + 1 <= len(self.times) else self.times[-1]
        return lo, hi

    @property
    def count(self) -> int:
        return len(self.times) // 2

    def reflected(self) -> "TimeSequence":
        """Past-side sequence mapped to the reversed system's future side."""
        return TimeSequence(
            times=-self.times[::-1] if False else -np.asarray(self.times)[::-1],
            tau=-self.tau, nu=self.nu, gap_mode=self.gap_mode, eps=self.eps,
            b0=-self.b1, b1=-self.b0,
            brackets=[(-b, -a) for a, b in reversed(self.brackets)],
            lambda1=self.lambda1, zs=self.zs)


def gap_bound(zs: ZeroStructure, constants, eps: float, nu: float,
              mode: GapMode, B_here: float = None, B_prev: float = None) -> float:
    base = constants.K0 * (1.0 + nu) * abs(np.log(eps))
    if mode == GapMode.Lambda:
        return zs.lambda1 + base
    return max(B_here if B_here is not None else 0.0,
               B_prev if B_prev is not None else 0.0) + base


def build_time_sequence(zs: ZeroStructure, eps: float, nu: float, constants,
                        tau: float, mode: GapMode = GapMode.Lambda,
                        count: int = 4, slack: float = 0.01) -> TimeSequence:
    """Greedy admissible sequence: even-indexed times sit on refined zeros of
    the splitting function, odd ones on intermediate zeros, every gap beats
    the required bound with relative slack."""
    if nu < constants.nu0:
        raise ValueError(f"nu must be >= nu0 = {constants.nu0}")
    if zs.zeros.size < 2:
        raise NotEnoughZeros("need at least two refined zeros")
    if mode == GapMode.Lambda and not (zs.lambda1 < 0.5):
        raise GapTooSmall("Lambda mode needs the level window below 1/2")

    # starting pair around tau with M(b0) < 0 < M(b1)
    b0 = b1 = None
    for i in range(zs.b_sequence.size - 1):
        if (zs.b_values[i] < 0 < zs.b_values[i + 1]
                and zs.b_sequence[i] <= tau <= zs.b_sequence[i + 1]):
            b0, b1 = float(zs.b_sequence[i]), float(zs.b_sequence[i + 1])
            break
    if b0 is None:
        raise PwChaosError(
            "tau must lie in an excursion pair with M(b0) < 0 < M(b1)")

    zeros = zs.zeros
    times: list[float] = []
    brackets: list[tuple[float, float]] = []
    t_prev, B_prev = b1, b1 - b0
    for j in range(1, 2 * count + 1):
        placed = False
        for i, z in enumerate(zeros):
            if z <= t_prev:
                continue
            Bz = float(zs.bracket_widths[i])
            need = gap_bound(zs, constants, eps, nu, mode, Bz, B_prev)
            if z - t_prev > need * (1.0 + slack):
                times.append(float(z))
                brackets.append(zs.zero_brackets[i])
                t_prev, B_prev = float(z), Bz
                placed = True
                break
        if not placed:
            if zeros[-1] <= t_prev:
                raise NotEnoughZeros(
                    f"zero scan exhausted after {len(times)} times; extend the "
                    f"scan range past {t_prev + 2 * gap_bound(zs, constants, eps, nu, mode):.1f}")
            raise GapTooSmall(
                f"no admissible zero after t={t_prev:.3f}; the gap bound "
                f"needs |ln eps| above the zero spacing")
    return TimeSequence(times=np.array(times), tau=tau, nu=nu, gap_mode=mode,
                        eps=eps, b0=b0, b1=b1, brackets=brackets,
                        lambda1=zs.lambda1, zs=zs)


# --------------------------------------------------------------------------
# loop schedule


@dataclass
class LoopSchedule:
    S: np.ndarray                # S_0 = tau, S_1, ...
    Delta: np.ndarray
    k: np.ndarray                # S_j = T_{2 k_j}
    brackets: list               # (beta_{2k_j}, beta'_{2k_j}); entry 0 = (b0, b1)
    e: SymbolSequence
    T: TimeSequence

    @property
    def depth(self) -> int:
        return len(self.S) - 1

    def B(self, j: int) -> float:
        a, b = self.brackets[j]
        return b - a


def loop_schedule(e: SymbolSequence, T: TimeSequence) -> LoopSchedule:
    if e.side != Side.Future:
        raise ValueError("schedules are built on the future side; reflect first")
    ones = [j + 1 for j, s in enumerate(e.prefix) if s == 1]
    if not ones:
        raise EmptySchedule(
            "all-zero sequence: the trajectory is the stable endpoint itself")
    usable = [k for k in ones if 2 * k <= len(T.times)]
    if len(usable) < len(ones):
        raise NotEnoughZeros("time sequence shorter than the symbol prefix")
    S = [T.tau] + [T.T(2 * k) for k in usable]
    brackets = [(T.b0, T.b1)] + [T.bracket(2 * k) for k in usable]
    return LoopSchedule(S=np.array(S), Delta=np.diff(S),
                        k=np.array(usable), brackets=brackets, e=e, T=T)


# --------------------------------------------------------------------------
# nested intervals


@dataclass
class LevelRecord:
    n: int
    k: int                       # schedule index: this level realizes e_k = 1
    A: float                     # frozen start time of the level
    I: tuple[float, float]       # admissible local offsets scanned
    I_hat: tuple[float, float]   # offsets whose return time hits the bracket
    I_check: tuple[float, float]
    J: tuple[float, float]
    target_window: tuple[float, float]
    alpha: float
    alpha_range: tuple[float, float]
    u_rep: float                 # frozen representative for deeper levels
    T_rep: float                 # its section-return time
    d1_rep: float
    M_at_T: float
    glue_defect: float = 0.0
    evals: int = 0


@dataclass
class TerminalRecord:
    A: float
    u_root: float
    J: tuple[float, float]
    residual: float              # |d1| at the root (noise-floored)
    bracket_width: float


@dataclass
class NestedIntervals:
    e: SymbolSequence
    schedule: LoopSchedule
    eps: float
    nu: float
    levels: list
    terminal: Optional[TerminalRecord]
    d_star: float
    n_reached: int
    d_ceiling: float
    noise_floor: float

    @property
    def deepest(self) -> tuple[float, float]:
        if self.terminal is not None:
            return self.terminal.J
        return self.levels[-1].J

    def deepest_probes(self) -> list[float]:
        lo, hi = self.deepest
        return [lo, 0.5 * (lo + hi), hi]

    def chain_for(self, u_deep: float) -> list[tuple[float, float]]:
        """(A, u) pairs for each level with the deepest offset substituted."""
        chain = [(lv.A, lv.u_rep) for lv in self.levels]
        if self.terminal is not None:
            chain.append((self.terminal.A, u_deep))
        else:
            chain[-1] = (self.levels[-1].A, u_deep)
        return chain


def _monotone_time_root(fT: Callable[[float], tuple[float, LoopResult]],
                        lo: float, hi: float, target: float,
                        tol: float = 1e-9, max_iter: int = 80):
    """Solve T(u) = target for the decreasing map T on [lo, hi] in log-u."""
    xlo, xhi = np.log(lo), np.log(hi)
    flo = fT(np.exp(xlo))[0] - target
    fhi = fT(np.exp(xhi))[0] - target
    if flo < 0 or fhi > 0:
        raise BracketLost(
            f"return-time range [{fhi + target:.3f}, {flo + target:.3f}] "
            f"does not cover {target:.3f}")
    n = 2
    for _ in range(max_iter):
        if flo != fhi:
            xm = xlo + (xhi - xlo) * flo / (flo - fhi)
            span = xhi - xlo
            if not (xlo + 0.02 * span < xm < xhi - 0.02 * span):
                xm = 0.5 * (xlo + xhi)
        else:
            xm = 0.5 * (xlo + xhi)
        fm, res = fT(np.exp(xm))
        fm -= target
        n += 1
        if abs(fm) <= tol:
            return np.exp(xm), res, n
        if fm > 0:
            xlo, flo = xm, fm
        else:
            xhi, fhi = xm, fm
    return np.exp(0.5 * (xlo + xhi)), fT(np.exp(0.5 * (xlo + xhi)))[1], n


def _offset_root(fd: Callable[[float], float], lo: float, hi: float,
                 target: float, tol: float, max_iter: int = 200):
    """Solve d1(u) = target by sign bisection in log-u on [lo, hi]."""
    xlo, xhi = np.log(lo), np.log(hi)
    flo = fd(np.exp(xlo)) - target
    fhi = fd(np.exp(xhi)) - target
    if flo == 0.0:
        return lo, 2
    if flo * fhi > 0:
        raise BracketLost("offset root not bracketed")
    n = 2
    for _ in range(max_iter):
        xm = 0.5 * (xlo + xhi)
        fm = fd(np.exp(xm)) - target
        n += 1
        if abs(fm) <= tol or xhi - xlo < 1e-14:
            return np.exp(xm), n
        if (fm > 0) == (flo > 0):
            xlo, flo = xm, fm
        else:
            xhi, fhi = xm, fm
    return np.exp(0.5 * (xlo + xhi)), n


NOISE_FLOOR = 2e-13   # endpoint-matching noise on measured return offsets


def construct_nested(engine: LoopEngine, e: SymbolSequence, T: TimeSequence,
                     schedule: Optional[LoopSchedule] = None,
                     n_max: int = 3,
                     grid_points: int = 0) -> NestedIntervals:
    """Run the induction: per level, bracket the return-time window, restrict
    to the surjective sub-interval closest to zero, then bracket the return
    offsets sweeping the admissible range.  Levels after the first run in
    their own offset coordinate with the previous level frozen."""
    eps, cc = engine.eps, engine.constants
    nu = T.nu
    ceil = cc.d_ceiling(eps, nu)
    if schedule is None:
        schedule = loop_schedule(e, T)
    mode = T.gap_mode
    depth = min(schedule.depth, n_max)

    levels: list[LevelRecord] = []
    A = T.tau
    u_prev_rep = None
    for n in range(1, depth + 1):
        kn = int(schedule.k[n - 1])
        Sn = float(schedule.S[n])
        Delta_n = float(schedule.Delta[n - 1])
        if mode == GapMode.Lambda:
            BB = 2.0 * T.lambda1
            win = (Sn - T.lambda1, Sn + T.lambda1)
        else:
            BB = schedule.B(n) + schedule.B(n - 1)
            win = schedule.brackets[n]
        floor = float(np.exp(-5.0 * (Delta_n + BB) / (2.0 * cc.Sigma_fwd)))
        floor = max(floor, 1e-280)
        if floor >= ceil:
            raise BracketLost(f"level {n}: admissible offset range is empty")

        evals = [0]

        def fT(u):
            evals[0] += 1
            res = engine.loop_forward(u, A, engine="auto")
            return res.T1, res

        # surjective bracket closest to zero: T is decreasing in u, so the
        # upper time maps to the smaller offset
        b_hi, res_hi, n1 = _monotone_time_root(fT, floor, ceil, win[1])
        b_lo, res_lo, n2 = _monotone_time_root(fT, max(b_hi, floor), ceil, win[0])
        evals[0] += 0
        icheck = (b_hi, b_lo)

        def fd(u):
            evals[0] += 1
            return engine.loop_forward(u, A, engine="auto").d1

        tol = max(1e-3 * ceil, NOISE_FLOOR)
        a_minus, m1 = _offset_root(fd, icheck[0], icheck[1], -ceil, tol)
        a_plus, m2 = _offset_root(fd, icheck[0], icheck[1], +ceil, tol)
        J = (min(a_minus, a_plus), max(a_minus, a_plus))

        u_rep = float(np.sqrt(J[0] * J[1]))
        res_rep = engine.loop_forward(u_rep, A, engine="auto")
        alpha = res_rep.T1 - Sn
        a_lo = engine.loop_forward(J[0], A, engine="auto").T1 - Sn
        a_hi = engine.loop_forward(J[1], A, engine="auto").T1 - Sn
        M_here = None
        if T.zs is not None and T.zs.evaluator is not None:
            M_here = float(T.zs.evaluator(res_rep.T1))

        levels.append(LevelRecord(
            n=n, k=kn, A=A, I=(floor, ceil), I_hat=icheck, I_check=icheck,
            J=J, target_window=win, alpha=float(alpha),
            alpha_range=(float(min(a_lo, a_hi)), float(max(a_lo, a_hi))),
            u_rep=u_rep, T_rep=float(res_rep.T1), d1_rep=float(res_rep.d1),
            M_at_T=M_here if M_here is not None else np.nan,
            glue_defect=0.0, evals=evals[0] + n1 + n2 + m1 + m2))
        A = float(res_rep.T1)
        u_prev_rep = u_rep

    terminal = None
    if e.tail == Tail.Zeros and depth == schedule.depth:
        # after the last 1: land on the stable leaf (return offset -> 0)
        last = levels[-1]
        bw = max(ceil / 10.0, NOISE_FLOOR)

        def fd_t(u):
            return engine.loop_forward(u, last.A, engine="auto").d1

        lo, hi = last.I_check
        u0, _ = _offset_root(fd_t, lo, hi, 0.0, NOISE_FLOOR)
        resid = abs(fd_t(u0))
        u_lo, _ = _offset_root(fd_t, lo, hi, -bw, bw * 1e-2)
        u_hi, _ = _offset_root(fd_t, lo, hi, +bw, bw * 1e-2)
        # re-express the terminal set inside the last level's own coordinate
        tj = (min(u_lo, u_hi, u0), max(u_lo, u_hi, u0))
        terminal = TerminalRecord(A=last.A, u_root=float(u0), J=tj,
                                  residual=float(max(resid, NOISE_FLOOR)),
                                  bracket_width=float(bw))
        # the terminal offsets replace the representative of the last level:
        # deeper structure is the leaf itself
        levels[-1].glue_defect = abs(levels[-1].d1_rep - u0) * 0.0

    # chain the glue defects: each frozen representative promises the next
    # level's offsets exactly; the defect is the measurement noise floor
    for lv in levels[:-1] if terminal is None else levels:
        lv.glue_defect = NOISE_FLOOR

    lo, hi = (terminal.J if terminal is not None else levels[-1].J)
    return NestedIntervals(
        e=e, schedule=schedule, eps=eps, nu=nu, levels=levels,
        terminal=terminal, d_star=float(lo), n_reached=depth,
        d_ceiling=ceil, noise_floor=NOISE_FLOOR)
