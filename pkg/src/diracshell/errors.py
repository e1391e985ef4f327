"""Exception hierarchy shared by all solver modules."""


class DiracShellError(Exception):
    """Base class for all errors raised by this package."""


class EssentialSpectrumPoint(DiracShellError):
    """Spectral parameter lies on the essential spectrum of the free operator."""


class OriginSingularity(DiracShellError):
    """Kernel evaluated at the origin, where it is singular."""


class ConfinementCase(DiracShellError):
    """Operation requires a non-confinement coupling (eta^2 - tau^2 != -4c^2)."""


class NotConfinement(DiracShellError):
    """Operation requires a confinement coupling (eta^2 - tau^2 = -4c^2)."""


class DegenerateCoupling(DiracShellError):
    """Coupling with eta^2 = tau^2 where the strength inversion map is undefined."""


class CriticalCoupling(DiracShellError):
    """Coupling at the critical strength eta^2 - tau^2 = 4c^2; refused here."""


class BadResolution(DiracShellError):
    """Surface grid resolution below the supported minimum."""


class ParseError(DiracShellError):
    """Malformed mesh or configuration file."""


class OpenSurface(DiracShellError):
    """Triangle mesh has boundary edges; a closed surface is required."""


class InconsistentOrientation(DiracShellError):
    """Triangle mesh faces are not consistently oriented."""


class PointOnSurface(DiracShellError):
    """Evaluation point coincides with a surface node."""


class VolumeNodeOnSurface(DiracShellError):
    """Volume quadrature node coincides with a surface node."""


class RealLambda(DiracShellError):
    """Resolvent formula requested at a real spectral parameter."""


class MixedCoupling(DiracShellError):
    """Nonrelativistic sweep needs a pure electrostatic or pure scalar coupling."""


class NoEigenvalueInBracket(DiracShellError):
    """Refinement found no singular-value dip below the acceptance tolerance."""
