"""Exception hierarchy.

Every failure raised by the package derives from :class:`OctElastError`, so
callers (the CLI in particular) can separate domain failures from bugs.
"""


class OctElastError(Exception):
    """Base class for all package errors."""


# spectra
class OutOfBand(OctElastError, ValueError):
    """Frequency outside the range of a tabulated model."""


class BranchAmbiguity(OctElastError, ValueError):
    """Square root requested on the branch cut (1 + chi on the negative real axis)."""


class DegenerateBackground(OctElastError, ZeroDivisionError):
    """Background with 1 + chi = 0."""


# medium
class OrderingViolated(OctElastError, ValueError):
    """Boundaries cross at some compression state."""


# forward
class DegenerateInterface(OctElastError, ZeroDivisionError):
    """n_a + n_b = 0 at an interface."""


class SeriesDiverges(OctElastError, ArithmeticError):
    """Multiple-reflection series fails the geometric convergence test."""


class MaxTermsExceeded(OctElastError, ArithmeticError):
    """Series would need more terms than allowed to reach the tolerance."""


class GeometryViolated(OctElastError, ValueError):
    """Observation point or sublayer geometry outside the formula's domain."""


class PoleHit(OctElastError, ZeroDivisionError):
    """A data functional was evaluated at its pole."""


# scatterlab
class OriginSingularity(OctElastError, ZeroDivisionError):
    """Green's function evaluated at r = 0."""


class InsideBall(OctElastError, ValueError):
    """Observation point lies inside a scatterer."""


# detect
class CollinearReferences(OctElastError, ValueError):
    """0, ref1 and ref2 (nearly) lie on one line."""


class InconsistentIntensities(OctElastError, ValueError):
    """Third circle does not pass through the intersection of the other two."""


class ZeroSpectrum(OctElastError, ZeroDivisionError):
    """Incident spectrum vanishes on the grid."""


class NonuniformGrid(OctElastError, ValueError):
    """FFT gating requested on a nonuniform frequency grid."""


# invert
class DegenerateLift(OctElastError, ArithmeticError):
    """Mobius lift has no contrast to work with (n' = 0 and n = 1)."""


class UnwrapAliased(OctElastError, ValueError):
    """Frequency step too coarse to unwrap phases for the depth prior."""


class DecayHypothesisViolated(OctElastError, ValueError):
    """No frequency with Im n' > 0."""


class NoConvergence(OctElastError, ArithmeticError):
    """Iterative refinement did not converge."""


class ContrastDegenerate(OctElastError, ArithmeticError):
    """Particle and layer indices cannot be told apart."""


class NonPhysicalDensity(OctElastError, ValueError):
    """Recovered particle density is complex or non-positive."""


class ShrinkConditionViolated(OctElastError, ValueError):
    """Recovered sublayer rates do not satisfy Z' > zeta' > 0."""


# io / cli
class SchemaError(OctElastError, ValueError):
    """Malformed scenario, measurement or report file."""
