"""Built-in benchmark systems.

``asymmetric_duffing`` is the workhorse: cubic two-well halves with stiffness
1 on the upper half-plane and ``kappa`` on the lower one, switching curve
{y = 0}, forcing (0, amp*cos(omega t + phase)) gated by a radial smoothstep
that is identically zero inside ``bump[0]`` (so the origin stays a saddle of
the perturbed flow and the near-saddle dynamics is exactly autonomous).
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .system import PiecewiseSystem, encode_cubic, encode_poly, from_encoding

DEFAULT_BUMP = (0.2, 0.5)
DEFAULT_OMEGA = 1.25
DEFAULT_DOMAIN = (-3.0, 3.0, -4.0, 4.0)


def asymmetric_duffing(kappa: float = 4.0, amp: float = 1.0,
                       omega: float = DEFAULT_OMEGA, phase: float = 0.0,
                       bump: Optional[tuple[float, float]] = DEFAULT_BUMP,
                       ) -> PiecewiseSystem:
    """Piecewise two-well system: f^- = (y, x - x^3), f^+ = (y, kappa(x - x^3)),
    G = -y.  kappa = 1 collapses to the smooth forced Duffing benchmark."""
    ip, fp = encode_cubic(sv=1.0, c_plus=kappa, c_minus=1.0, gy=-1.0,
                          amp=amp, omega=omega, phase=phase, bump=bump)
    name = f"duffing_kappa{kappa:g}" + ("" if bump else "_nobump")
    return from_encoding(ip, fp, domain=DEFAULT_DOMAIN, name=name)


def sliding_demo() -> PiecewiseSystem:
    """Constant fields aimed at each other across {y = 0}: pure sliding."""
    ip, fp = encode_poly(
        f_minus=((0.0,), (-1.0,)),     # on y > 0 push down
        f_plus=((0.0,), (1.0,)),       # on y < 0 push up
        g_switch=((0.0, -1.0),),       # G = -y
    )
    return from_encoding(ip, fp, domain=DEFAULT_DOMAIN, name="sliding_demo")


def duffing_s4_probe(kappa: float = 4.0) -> PiecewiseSystem:
    """Scenario-4 geometry probe: the plus half keeps the two-well field, the
    minus half is linear with its stable direction tilted inside the loop.
    Used with an externally supplied loop curve; not a homoclinic system."""
    # eigenpairs: lambda_u = 1 along (1, 1), lambda_s = -1 along (2, 1)
    fm1 = ((0.0, 4.0), (-3.0, 0.0))    # -3x + 4y
    fm2 = ((0.0, 3.0), (-2.0, 0.0))    # -2x + 3y
    fp1 = ((0.0, 1.0),)                # y
    fp2 = ((0.0,), (kappa,), (0.0,), (-kappa,))  # kappa(x - x^3)
    ip, fp = encode_poly(f_minus=(fm1, fm2), f_plus=(fp1, fp2),
                         g_switch=((0.0, -1.0),))
    return from_encoding(ip, fp, domain=DEFAULT_DOMAIN, name="duffing_s4_probe")


def damped_two_well() -> PiecewiseSystem:
    """Smooth two-well field with linear damping (nonzero divergence).

    Has no homoclinic of its own; paired with the smooth loop in tests to
    exercise the exponential weight of the splitting integrand.
    """
    f1 = ((0.0, 1.0),)                                          # y
    f2 = ((0.0, 0.3), (1.0, 0.0), (0.0, 0.0), (-1.0, 0.0))      # x - x^3 + 0.3 y
    ip, fp = encode_poly(f_minus=(f1, f2), f_plus=(f1, f2),
                         g_switch=((0.0, -1.0),),
                         amp=1.0, omega=1.0)
    return from_encoding(ip, fp, domain=DEFAULT_DOMAIN, name="damped_two_well")


_REGISTRY = {
    "duffing": asymmetric_duffing,
    "sliding_demo": sliding_demo,
    "duffing_s4_probe": duffing_s4_probe,
}


def fixture_names() -> list[str]:
    return sorted(_REGISTRY)


def make_fixture(name: str, **params) -> PiecewiseSystem:
    try:
        builder = _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; known: {fixture_names()}") from None
    return builder(**params)
