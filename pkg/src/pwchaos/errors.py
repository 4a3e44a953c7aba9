"""Exception hierarchy.

Every failure mode that callers are expected to branch on gets its own
class; generic numerical trouble raises the base class.
"""

from __future__ import annotations


class PwChaosError(Exception):
    """Base class for all package errors."""


class ConfigError(PwChaosError):
    """Invalid experiment configuration (CLI exits with status 2)."""


# --- system model -----------------------------------------------------------

class NotASaddle(PwChaosError):
    """Jacobian at the origin has complex or same-sign eigenvalues."""


class F1Violated(PwChaosError):
    """An eigenvector is orthogonal to the switching gradient at 0."""


class AmbiguousMembership(PwChaosError):
    """A probe point lies within event tolerance of the homoclinic loop."""


# --- flow / integration -----------------------------------------------------

class SlidingEncountered(PwChaosError):
    """Both one-sided normal velocities push toward the switching curve."""


class TangencyUnresolved(PwChaosError):
    """Incoming normal velocity below event tolerance at a switching hit."""


class LeftDomain(PwChaosError):
    """Trajectory left the domain box."""


class StepLimit(PwChaosError):
    """Integrator exceeded its step budget."""


class SectionMissed(PwChaosError):
    """No transversal section hit before max_time."""


# --- homoclinic / Melnikov --------------------------------------------------

class NoHomoclinic(PwChaosError):
    """Shooting mismatch above tolerance for every seed."""


class WrongRegionPattern(PwChaosError):
    """Candidate homoclinic violates the required region pattern."""


class DivergentWeight(PwChaosError):
    """Exponential weight in the Melnikov integrand exceeds overflow guard."""


class QuadratureNotConverged(PwChaosError):
    """Panel refinement exhausted without reaching the requested tolerance."""


class NoSignChange(PwChaosError):
    """Melnikov scan range contains no sign change."""


class SpacingViolation(PwChaosError):
    """Cannot build an alternating sequence with the required spacing."""


# --- geometry ---------------------------------------------------------------

class OffSection(PwChaosError):
    """Point does not lie on the section arc."""


class OutOfSection(PwChaosError):
    """Requested arclength offset leaves the section arc."""


class NoBracket(PwChaosError):
    """Inside/outside labels do not split the section (no separatrix found)."""


class CalibrationDegenerate(PwChaosError):
    """|M(tau*)| below threshold at the calibration point."""


# --- loop maps / constructor ------------------------------------------------

class EscapedTube(PwChaosError):
    """Trajectory left the tubular neighborhood of the homoclinic loop."""


class GapTooSmall(PwChaosError):
    """Zero spacing cannot honor the time-gap inequality at this epsilon."""


class NotEnoughZeros(PwChaosError):
    """Zero structure does not span enough sign changes."""


class EmptySchedule(PwChaosError):
    """All-zero symbol sequence: the loop schedule is trivial."""


class BracketLost(PwChaosError):
    """Grid refinement exhausted without the required surjective bracket."""


class DeepModeUnavailable(PwChaosError):
    """System lacks the structure needed to steer sub-resolution offsets."""


# --- bernoulli --------------------------------------------------------------

class ReadbackAmbiguous(PwChaosError):
    """A window's distance falls between the 0- and 1-thresholds."""
