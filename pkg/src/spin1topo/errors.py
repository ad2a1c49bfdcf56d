"""Exception types raised by the simulation and analysis routines.

Everything derives from :class:`Spin1TopoError` so callers can catch the
package's failures with a single except clause.  Numerical guards raise
rather than silently returning garbage: a degenerate band has no unique
eigenvector, an undersampled loop has no trustworthy winding, and so on.
"""


class Spin1TopoError(Exception):
    """Base class for all package errors."""


class NotHermitian(Spin1TopoError):
    """Operator expected to be Hermitian is not, beyond tolerance."""


class NotPhysical(Spin1TopoError):
    """Moment data violates positivity constraints of a quantum state."""


class DegenerateBand(Spin1TopoError):
    """A unique band eigenvector was requested at a (near-)degeneracy."""


class VectorDegenerate(Spin1TopoError):
    """Spin vector length is ~0; arrow direction is undefined."""


class TensorDegenerate(Spin1TopoError):
    """Transverse ellipsoid axes are ~equal; tensor azimuth is undefined."""


class UndersampledLoop(Spin1TopoError):
    """Adjacent loop samples differ too much to lift angles continuously."""


class GapClosedOnLoop(Spin1TopoError):
    """A band gap closes somewhere on the requested loop."""


class GapClosedOnSphere(Spin1TopoError):
    """A band gap closes somewhere on the momentum sphere."""


class NotConverged(Spin1TopoError):
    """Iterative refinement did not reach the requested tolerance."""


class StepTooLarge(Spin1TopoError):
    """Integrator step fails the step-halving convergence audit."""


class PopulationsInconsistent(Spin1TopoError):
    """Measured populations do not sum to 1 within tolerance."""


class NyquistViolation(Spin1TopoError):
    """Waveform sample rate is too low for the requested carrier."""


class ConfigError(Spin1TopoError):
    """Invalid or unknown entries in a run configuration."""
