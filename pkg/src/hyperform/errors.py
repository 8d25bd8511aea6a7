"""Exception types shared by all modules.

Every error carries a CLI exit code so the command-line front end can map
library failures without inspecting messages.
"""


class HyperformError(Exception):
    """Base class for library errors."""

    exit_code = 3


class ParseError(HyperformError):
    """Malformed expression string or JSON document."""

    exit_code = 2


class SerializationError(HyperformError):
    """Object has no wire representation (e.g. quadrature-backed coefficients)."""

    exit_code = 3


class SingularPoint(HyperformError):
    """Evaluation hit a singular locus (division by zero, non-finite value)."""


class EvalSingular(SingularPoint):
    """A user-supplied function is singular on the sampled tube."""


class NotExtendable(SingularPoint):
    """The holomorphic extension of a real-analytic function is not finite on the tube."""


class NotDifferentiable(HyperformError):
    """Differentiation requested for a node without a symbolic derivative."""


class Inconclusive(HyperformError):
    """Zero test could not decide: sampled magnitudes fall in the grey band."""

    exit_code = 4


class QuadratureDiverged(HyperformError):
    """Successive resolutions disagree beyond tolerance at the maximum resolution."""

    exit_code = 4


class DimensionMismatch(HyperformError):
    """Operands live on spaces of different dimension or degree."""


class MixedDegree(HyperformError):
    """A homogeneous degree was requested from a form with mixed degrees."""


class NotHolomorphic(HyperformError):
    """A form expected to be holomorphic near the removed set has a nonzero dbar."""


class ConeEmpty(HyperformError):
    """The cone defined by the given covectors is empty or degenerate."""


class ConeNotTransverse(HyperformError):
    """The cone does not meet the slice {y1 = 0}."""


class PartitionInfeasible(HyperformError):
    """The smooth partition of unity cannot cover the sphere with the given margins."""


class ModeUnavailable(HyperformError):
    """The requested product mode does not apply to the given factors."""


class SupportNotCompact(HyperformError):
    """Pairing needs a compact support or an explicit cutoff."""


class NotProper(HyperformError):
    """Support is not proper over the base of a projection."""


class UnsupportedProjection(HyperformError):
    """Only coordinate product projections are supported."""


class UnsupportedDimension(HyperformError):
    """No deterministic rule exists for this dimension."""


class RepresentativeHasTau1(HyperformError):
    """The support predicate needs a representative whose first component vanishes."""


class SingularOnSlice(HyperformError):
    """A coefficient is identically singular on the restriction slice."""
