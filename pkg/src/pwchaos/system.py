"""Piecewise-smooth system model: types, encodings, saddle data, hypotheses.

A :class:`PiecewiseSystem` is backed by a flat kernel encoding (see
:mod:`pwchaos.kernels`); the Python callables exposed here are thin wrappers
around the same encoding, so the integrator and the high-level API can never
disagree about the fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels as K
from .errors import AmbiguousMembership, F1Violated, NotASaddle

TOL_ZERO = 1e-9          # "vanishes at the origin" in nondimensional units
EIGEN_RESIDUAL_TOL = 1e-10
F1_ORTHO_TOL = 1e-9

Point = np.ndarray


@dataclass(frozen=True)
class SwitchingFunction:
    """Scalar switching function G with gradient; {G = 0} is the interface."""

    value: Callable[[Point], float]
    gradient: Callable[[Point], Point]

    def __call__(self, p: Point) -> float:
        return self.value(p)


@dataclass(frozen=True)
class PiecewiseSystem:
    f_minus: Callable[[Point], Point]
    f_plus: Callable[[Point], Point]
    jac_minus: Callable[[Point], np.ndarray]
    jac_plus: Callable[[Point], np.ndarray]
    g: Callable[[float, Point, float], Point]
    switching: SwitchingFunction
    domain: tuple[float, float, float, float]  # (xlo, xhi, ylo, yhi)
    ip: np.ndarray
    fp: np.ndarray
    name: str = "system"
    # first integrals of the unperturbed halves, when they exist
    hamiltonian_minus: Optional[Callable[[Point], float]] = None
    hamiltonian_plus: Optional[Callable[[Point], float]] = None
    # radius inside which the forcing is identically zero (0.0 = none)
    forcing_deadzone: float = 0.0

    def field(self, t: float, p: Point, side: int, eps: float) -> Point:
        fx, fy = K.field(t, p[0], p[1], side, eps, self.ip, self.fp)
        return np.array([fx, fy])

    def f_side(self, p: Point, side: int) -> Point:
        return self.f_plus(p) if side > 0 else self.f_minus(p)

    def with_name(self, name: str) -> "PiecewiseSystem":
        return replace(self, name=name)


class Scenario(Enum):
    S1 = 1
    S2 = 2
    S3 = 3
    S4 = 4


@dataclass(frozen=True)
class ScenarioClass:
    scenario: Scenario
    sliding_near_origin: bool


@dataclass(frozen=True)
class SaddleData:
    lambda_s_minus: float
    lambda_u_minus: float
    lambda_s_plus: float
    lambda_u_plus: float
    v_s_minus: Point
    v_u_minus: Point
    v_s_plus: Point
    v_u_plus: Point


@dataclass(frozen=True)
class HypothesisReport:
    f0: bool
    f1: bool
    f2: bool
    k: Optional[bool]  # None when no homoclinic was attached
    g_ok: bool
    diagnostics: list = field(default_factory=list)

    @property
    def all_ok(self) -> bool:
        return self.f0 and self.f1 and self.f2 and self.g_ok and (self.k is not False)


# --------------------------------------------------------------------------
# encodings


def _poly_mat(coeffs) -> np.ndarray:
    m = np.atleast_2d(np.asarray(coeffs, dtype=float))
    return m


def _poly_dx(m: np.ndarray) -> np.ndarray:
    if m.shape[0] == 1:
        return np.zeros((1, 1))
    return m[1:, :] * np.arange(1, m.shape[0])[:, None]


def _poly_dy(m: np.ndarray) -> np.ndarray:
    if m.shape[1] == 1:
        return np.zeros((1, 1))
    return m[:, 1:] * np.arange(1, m.shape[1])[None, :]


def encode_cubic(sv: float, c_plus: float, c_minus: float, gy: float,
                 amp: float = 0.0, omega: float = 1.0, phase: float = 0.0,
                 bump: Optional[tuple[float, float]] = None) -> tuple[np.ndarray, np.ndarray]:
    """Encode the cubic two-well family for the kernels."""
    r_lo2, r_hi2 = (-1.0, -1.0) if bump is None else (bump[0] ** 2, bump[1] ** 2)
    fp = np.array([amp, omega, phase, r_lo2, r_hi2, sv, c_plus, c_minus, gy])
    ip = np.array([K.KIND_CUBIC], dtype=np.int64)
    return ip, fp


def encode_poly(f_minus: Sequence, f_plus: Sequence, g_switch,
                g_carrier: Sequence = ((0.0,), (1.0,)),
                amp: float = 0.0, omega: float = 1.0, phase: float = 0.0,
                bump: Optional[tuple[float, float]] = None) -> tuple[np.ndarray, np.ndarray]:
    """Encode polynomial halves.  Coefficient matrices are indexed [i, j] for
    the x^i y^j monomial."""
    base = [_poly_mat(f_minus[0]), _poly_mat(f_minus[1]),
            _poly_mat(f_plus[0]), _poly_mat(f_plus[1]),
            _poly_mat(g_switch), _poly_mat(g_carrier[0]), _poly_mat(g_carrier[1])]
    mats = base + [_poly_dx(m) for m in base] + [_poly_dy(m) for m in base]
    r_lo2, r_hi2 = (-1.0, -1.0) if bump is None else (bump[0] ** 2, bump[1] ** 2)
    scalars = [amp, omega, phase, r_lo2, r_hi2]
    ip = np.empty(1 + 3 * K.N_SLOTS, dtype=np.int64)
    ip[0] = K.KIND_POLY
    fp_parts = [np.array(scalars)]
    off = len(scalars)
    for s, m in enumerate(mats):
        ip[1 + 3 * s] = m.shape[0] - 1
        ip[2 + 3 * s] = m.shape[1] - 1
        ip[3 + 3 * s] = off
        fp_parts.append(m.ravel())
        off += m.size
    return ip, np.concatenate(fp_parts)


def _cubic_hamiltonian(c: float) -> Callable[[Point], float]:
    def h(p):
        x, y = p[0], p[1]
        return 0.5 * y * y - c * (0.5 * x * x - 0.25 * x ** 4)
    return h


def _poly_divergence_free(fm1: np.ndarray, fm2: np.ndarray) -> bool:
    dx = _poly_dx(fm1)
    dy = _poly_dy(fm2)
    n = max(dx.shape[0], dy.shape[0]), max(dx.shape[1], dy.shape[1])
    a = np.zeros(n)
    a[:dx.shape[0], :dx.shape[1]] += dx
    a[:dy.shape[0], :dy.shape[1]] += dy
    return bool(np.all(np.abs(a) < 1e-14))


def _poly_hamiltonian(f1: np.ndarray, f2: np.ndarray) -> Callable[[Point], float]:
    """H with H_y = f1, H_x = -f2 (valid when div f = 0)."""
    int_y = np.zeros((f1.shape[0], f1.shape[1] + 1))
    int_y[:, 1:] = f1 / np.arange(1, f1.shape[1] + 1)[None, :]
    f2_x0 = f2[:, 0]  # f2(x, 0) coefficients
    int_x = np.zeros(f2_x0.size + 1)
    int_x[1:] = f2_x0 / np.arange(1, f2_x0.size + 1)

    def h(p):
        x, y = p[0], p[1]
        hy = 0.0
        for i in range(int_y.shape[0] - 1, -1, -1):
            row = 0.0
            for j in range(int_y.shape[1] - 1, -1, -1):
                row = row * y + int_y[i, j]
            hy = hy * x + row
        hx = 0.0
        for i in range(int_x.size - 1, -1, -1):
            hx = hx * x + int_x[i]
        return hy - hx
    return h


def from_encoding(ip: np.ndarray, fp: np.ndarray,
                  domain: tuple[float, float, float, float] = (-3.0, 3.0, -3.0, 3.0),
                  name: str = "system") -> PiecewiseSystem:
    """Build the callable-facing system around a kernel encoding."""
    ip = np.ascontiguousarray(ip, dtype=np.int64)
    fp = np.ascontiguousarray(fp, dtype=np.float64)

    def f_minus(p):
        a, b = K.f_half(p[0], p[1], -1, ip, fp)
        return np.array([a, b])

    def f_plus(p):
        a, b = K.f_half(p[0], p[1], 1, ip, fp)
        return np.array([a, b])

    def jac(side):
        def j(p):
            j00, j01, j10, j11 = K.jac_field(0.0, p[0], p[1], side, 0.0, ip, fp)
            return np.array([[j00, j01], [j10, j11]])
        return j

    def g(t, p, eps):
        if eps == 0.0:
            gx, gy = K.g_forcing(t, p[0], p[1], 1.0, ip, fp)
        else:
            gx, gy = K.g_forcing(t, p[0], p[1], eps, ip, fp)
            gx, gy = gx / eps, gy / eps
        return np.array([gx, gy])

    switching = SwitchingFunction(
        value=lambda p: K.switch_value(p[0], p[1], ip, fp),
        gradient=lambda p: np.array(K.switch_grad(p[0], p[1], ip, fp)),
    )

    h_minus = h_plus = None
    if ip[0] == K.KIND_CUBIC:
        h_minus = _cubic_hamiltonian(fp[K.FP_CMINUS])
        h_plus = _cubic_hamiltonian(fp[K.FP_CPLUS])
    else:
        def mat(s):
            nx, ny, off = ip[1 + 3 * s], ip[2 + 3 * s], ip[3 + 3 * s]
            return fp[off:off + (nx + 1) * (ny + 1)].reshape(nx + 1, ny + 1)
        fm1, fm2 = mat(K.SLOT_FM1), mat(K.SLOT_FM2)
        fp1, fp2 = mat(K.SLOT_FP1), mat(K.SLOT_FP2)
        if _poly_divergence_free(fm1, fm2):
            h_minus = _poly_hamiltonian(fm1, fm2)
        if _poly_divergence_free(fp1, fp2):
            h_plus = _poly_hamiltonian(fp1, fp2)

    deadzone = float(np.sqrt(fp[K.FP_RLO2])) if fp[K.FP_RHI2] > 0 else 0.0

    return PiecewiseSystem(
        f_minus=f_minus, f_plus=f_plus,
        jac_minus=jac(-1), jac_plus=jac(1),
        g=g, switching=switching, domain=domain,
        ip=ip, fp=fp, name=name,
        hamiltonian_minus=h_minus, hamiltonian_plus=h_plus,
        forcing_deadzone=deadzone,
    )


def time_reversed(sys: PiecewiseSystem) -> PiecewiseSystem:
    """System whose solutions are x(-t): fields negate and swap sides,
    G flips sign (so the region pattern of the homoclinic is preserved),
    and the forcing becomes -g(-t, x, eps)."""
    ip, fp = sys.ip, sys.fp
    if ip[0] == K.KIND_CUBIC:
        rip, rfp = encode_cubic(
            sv=-fp[K.FP_SV],
            c_plus=fp[K.FP_CMINUS], c_minus=fp[K.FP_CPLUS],
            gy=-fp[K.FP_GY],
            amp=-fp[K.FP_AMP], omega=fp[K.FP_OMEGA], phase=-fp[K.FP_PHASE],
            bump=None if fp[K.FP_RHI2] <= 0 else
                 (float(np.sqrt(fp[K.FP_RLO2])), float(np.sqrt(fp[K.FP_RHI2]))),
        )
    else:
        def mat(s):
            nx, ny, off = ip[1 + 3 * s], ip[2 + 3 * s], ip[3 + 3 * s]
            return fp[off:off + (nx + 1) * (ny + 1)].reshape(nx + 1, ny + 1)
        rip, rfp = encode_poly(
            f_minus=(-mat(K.SLOT_FP1), -mat(K.SLOT_FP2)),
            f_plus=(-mat(K.SLOT_FM1), -mat(K.SLOT_FM2)),
            g_switch=-mat(K.SLOT_G),
            g_carrier=(mat(K.SLOT_GC1), mat(K.SLOT_GC2)),
            amp=-fp[K.FP_AMP], omega=fp[K.FP_OMEGA], phase=-fp[K.FP_PHASE],
            bump=None if fp[K.FP_RHI2] <= 0 else
                 (float(np.sqrt(fp[K.FP_RLO2])), float(np.sqrt(fp[K.FP_RHI2]))),
        )
    return from_encoding(rip, rfp, domain=sys.domain, name=sys.name + "_reversed")


# --------------------------------------------------------------------------
# operations


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def compute_saddle_data(sys: PiecewiseSystem) -> SaddleData:
    """Eigen-data of both half Jacobians at the origin, signs fixed so the
    switching gradient sees minus-side vectors negatively and plus-side
    vectors positively."""
    origin = np.zeros(2)
    grad0 = sys.switching.gradient(origin)
    out: dict[str, float | np.ndarray] = {}
    for tag, jac in (("minus", sys.jac_minus), ("plus", sys.jac_plus)):
        jmat = jac(origin)
        w, vecs = np.linalg.eig(jmat)
        if np.iscomplexobj(w) and np.max(np.abs(w.imag)) > 1e-12:
            raise NotASaddle(f"complex eigenvalues on {tag} side: {w}")
        w = w.real
        vecs = vecs.real
        if w[0] * w[1] >= 0:
            raise NotASaddle(f"eigenvalues not of opposite sign on {tag} side: {w}")
        i_s, i_u = (0, 1) if w[0] < 0 else (1, 0)
        want = -1.0 if tag == "minus" else 1.0
        pair = {}
        for kind, idx in (("s", i_s), ("u", i_u)):
            v = _unit(vecs[:, idx])
            proj = float(grad0 @ v)
            if abs(proj) < F1_ORTHO_TOL:
                raise F1Violated(
                    f"v_{kind}^{tag} orthogonal to grad G(0); cannot normalize signs")
            if proj * want < 0:
                v = -v
            resid = np.linalg.norm(jmat @ v - w[idx] * v)
            if resid > EIGEN_RESIDUAL_TOL:
                raise NotASaddle(f"eigen residual {resid:.2e} on {tag} side")
            pair[kind] = v
        out[f"lambda_s_{tag}"] = float(w[i_s])
        out[f"lambda_u_{tag}"] = float(w[i_u])
        out[f"v_s_{tag}"] = pair["s"]
        out[f"v_u_{tag}"] = pair["u"]
    return SaddleData(**out)  # type: ignore[arg-type]


def _angle(v: np.ndarray) -> float:
    return float(np.arctan2(v[1], v[0]))


def _f2_opposite_sides(saddle: SaddleData) -> bool:
    """True when the two stable eigenvectors lie on opposite sides of the
    polyline spanned by the unstable rays."""
    a_up = _angle(saddle.v_u_plus)
    a_um = _angle(saddle.v_u_minus)

    def sector(v):
        # 1 if v is reached rotating counterclockwise from v_u_plus to
        # v_u_minus, else 2
        span = (a_um - a_up) % (2 * np.pi)
        off = (_angle(v) - a_up) % (2 * np.pi)
        return 1 if 0 < off < span else 2

    return sector(saddle.v_s_plus) != sector(saddle.v_s_minus)


def check_hypotheses(sys: PiecewiseSystem, saddle: SaddleData,
                     gamma=None) -> HypothesisReport:
    """Evaluate the standing hypotheses; report style, never raises."""
    diags = []
    origin = np.zeros(2)
    grad0 = sys.switching.gradient(origin)

    fm0 = np.linalg.norm(sys.f_minus(origin))
    fp0 = np.linalg.norm(sys.f_plus(origin))
    f0 = fm0 <= TOL_ZERO and fp0 <= TOL_ZERO
    f0 = f0 and saddle.lambda_s_minus < 0 < saddle.lambda_u_minus
    f0 = f0 and saddle.lambda_s_plus < 0 < saddle.lambda_u_plus
    if not f0:
        diags.append(("F0", max(fm0, fp0), TOL_ZERO))

    s_um = float(grad0 @ saddle.v_u_minus)
    s_up = float(grad0 @ saddle.v_u_plus)
    s_sm = float(grad0 @ saddle.v_s_minus)
    s_sp = float(grad0 @ saddle.v_s_plus)
    f1 = s_um < 0 < s_up and s_sm < 0 < s_sp
    if not f1:
        diags.append(("F1", (s_um, s_up, s_sm, s_sp), 0.0))

    f2 = _f2_opposite_sides(saddle)
    if not f2:
        diags.append(("F2", "stable eigenvectors on the same side", None))

    # perturbation vanishes at the origin and stays bounded near the loop
    g_origin = max(np.linalg.norm(sys.g(t, origin, e))
                   for t in np.linspace(0.0, 7.0, 11) for e in (0.0, 1e-2))
    g_ok = g_origin <= TOL_ZERO
    if not g_ok:
        diags.append(("G", g_origin, TOL_ZERO))
    if gamma is not None:
        pts = gamma.polyline(200)
        rng = np.random.default_rng(0)
        offsets = rng.normal(size=pts.shape)
        offsets /= np.maximum(np.linalg.norm(offsets, axis=1), 1e-30)[:, None]
        sup_g = 0.0
        for p, o in zip(pts, offsets):
            for t in (0.0, 0.37, 2.9):
                sup_g = max(sup_g, np.linalg.norm(sys.g(t, p + o, 1e-2)))
        if not np.isfinite(sup_g) or sup_g > 1e6:
            g_ok = False
            diags.append(("G", sup_g, 1e6))

    if gamma is None:
        k = None
        diags.append(("K", "deferred (no homoclinic attached)", None))
    else:
        ok = gamma.region_pattern_ok(sys)
        gc = gamma.crossing_point
        wminus = float(sys.switching.gradient(gc) @ sys.f_minus(gc))
        wplus = float(sys.switching.gradient(gc) @ sys.f_plus(gc))
        k = bool(ok and wminus > 0 and wplus > 0)
        if not k:
            diags.append(("K", (ok, wminus, wplus), 0.0))

    return HypothesisReport(f0=bool(f0), f1=bool(f1), f2=bool(f2), k=k,
                            g_ok=bool(g_ok), diagnostics=diags)


def _ray_crossings(poly: np.ndarray, q: np.ndarray, direction: np.ndarray) -> int:
    """Count crossings of the ray q + s*direction, s > 0, with the closed
    polyline ``poly`` (last point joined to first)."""
    d = direction
    n = np.array([-d[1], d[0]])
    rel = poly - q[None, :]
    side = rel @ n
    along = rel @ d
    cnt = 0
    m = len(poly)
    for i in range(m):
        j = (i + 1) % m
        si, sj = side[i], side[j]
        if si == 0.0:
            si = 1e-300
        if sj == 0.0:
            sj = 1e-300
        if si * sj < 0:
            tpar = si / (si - sj)
            s_hit = along[i] + tpar * (along[j] - along[i])
            if s_hit > 0:
                cnt += 1
    return cnt


def classify_scenario(sys: PiecewiseSystem, saddle: SaddleData, gamma,
                      rho: Optional[float] = None,
                      n_poly: int = 2000) -> ScenarioClass:
    """Scenario from the membership of the cross-side eigenvector rays in the
    region enclosed by the homoclinic loop (even-odd ray crossing)."""
    poly = gamma.polyline(n_poly)
    if rho is None:
        rho = 1e-3 * gamma.loop_diameter()
    ray_dir = _unit(np.array([0.75487766, 0.65589646]))  # no special alignment

    def inside(v: np.ndarray) -> bool:
        votes = []
        for d in (0.35 * rho, 0.7 * rho, rho):
            q = d * v
            dist = np.min(np.linalg.norm(poly - q[None, :], axis=1))
            if dist < 1e-11:
                raise AmbiguousMembership(
                    f"probe point {q} within event tolerance of the loop")
            votes.append(_ray_crossings(poly, q, ray_dir) % 2 == 1)
        if len(set(votes)) != 1:
            raise AmbiguousMembership("probe votes disagree; shrink rho")
        return votes[0]

    u_in = inside(saddle.v_u_plus)
    s_in = inside(saddle.v_s_minus)
    if not u_in and not s_in:
        sc = Scenario.S1
    elif u_in and s_in:
        sc = Scenario.S2
    elif u_in and not s_in:
        sc = Scenario.S3
    else:
        sc = Scenario.S4
    return ScenarioClass(scenario=sc, sliding_near_origin=sc in (Scenario.S3, Scenario.S4))
