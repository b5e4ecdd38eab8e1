"""Exception hierarchy.

Every error carries a ``kind`` string (the class name) so that the CLI can
emit a machine-readable record without a lookup table.
"""

from __future__ import annotations


class FibDriftError(Exception):
    """Base class for all library errors."""

    stage = "library"

    @property
    def kind(self) -> str:
        return type(self).__name__


# funcspace
class NonFiniteSample(FibDriftError):
    stage = "funcspace"


class TailNotDecayed(FibDriftError):
    stage = "funcspace"


class OutsideAnalyticityRegion(FibDriftError):
    stage = "funcspace"


class NotBracketed(FibDriftError):
    stage = "funcspace"


# renorm
class ParityMismatch(FibDriftError, ValueError):
    stage = "renorm"


class NoSignChange(FibDriftError):
    stage = "renorm"


class DepthUnresolvable(FibDriftError):
    stage = "renorm"


class CombinatoricsExhausted(FibDriftError):
    stage = "renorm"


class NewtonDiverged(FibDriftError):
    stage = "renorm"


class InvariantViolation(FibDriftError):
    stage = "renorm"


class DegreeTooLow(FibDriftError):
    stage = "renorm"


# induced
class TailNotConverging(FibDriftError):
    stage = "induced"


class OnBranchBoundary(FibDriftError):
    stage = "induced"


class TowerMismatch(FibDriftError):
    stage = "induced"


# transfer
class SignConventionViolation(FibDriftError):
    stage = "transfer"


class MassLeak(FibDriftError):
    stage = "transfer"


class NoConvergence(FibDriftError):
    stage = "transfer"


class NegativeDensity(FibDriftError):
    stage = "transfer"


# drift
class QuadratureNotConverged(FibDriftError):
    stage = "drift"


class NotMonotone(FibDriftError):
    stage = "drift"


class NewtonBranchJump(FibDriftError):
    stage = "drift"


class LeftUpperHalfPlane(FibDriftError):
    stage = "drift"


class NotConverging(FibDriftError):
    stage = "drift"


# parabolic
class StructureViolation(FibDriftError):
    stage = "parabolic"


class EscapedDomain(FibDriftError):
    stage = "parabolic"


class BoundBlowup(FibDriftError):
    stage = "parabolic"


# cli
class ConfigError(FibDriftError, ValueError):
    stage = "cli"
