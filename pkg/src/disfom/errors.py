"""Exception types shared across the package."""


class DimensionMismatchError(ValueError):
    """Vector/region/matrix dimensions do not agree."""


class InfeasibleInputError(ValueError):
    """An input point or region violates a feasibility precondition."""


class UnsupportedRegionError(ValueError):
    """The requested operation is not defined for this region variant."""


class BracketError(RuntimeError):
    """A root-finding bracket does not satisfy its sign conditions."""


class IterationLimitError(RuntimeError):
    """An iterative solver hit its iteration cap before converging."""


class OracleCapabilityError(ValueError):
    """The stochastic oracle lacks a capability (e.g. exact gradients)."""
