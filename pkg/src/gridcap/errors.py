"""Exception hierarchy shared across the package.

Every error raised by gridcap derives from :class:`GridCapError`, so callers
can catch one base class. The subclasses mirror the distinct failure modes of
the numerical pipeline: invalid inputs, degenerate linear algebra, infeasible
operating points, and solver breakdowns.
"""


class GridCapError(Exception):
    """Base class for all gridcap errors."""


# --- input / document errors -------------------------------------------------

class SchemaError(GridCapError):
    """A network document violates the JSON schema; message contains the path."""


class RoleError(GridCapError):
    """Node roles are inconsistent (for example zero or multiple slack nodes)."""


class GraphError(GridCapError):
    """The network graph is structurally invalid (for example disconnected)."""


class ParseError(GridCapError):
    """A MATPOWER case body could not be parsed; message contains the line."""


class ZeroBaseFlow(GridCapError):
    """A line carries no current at the deterministic base point, so the
    proportional rating rule cannot assign it a finite rating."""

    def __init__(self, line, message=None):
        self.line = line
        super().__init__(message or f"zero base flow on line {line}")


# --- linear algebra / model errors -------------------------------------------

class SingularReducedLaplacian(GridCapError):
    """The grounded Laplacian is numerically singular, which signals a
    disconnected graph or degenerate susceptances."""


class RankDeficiency(GridCapError):
    """A matrix that must have full rank (Laplacian, current transfer blocks)
    fails its rank check beyond tolerance."""


class InfeasibleStart(GridCapError):
    """The initial normalized currents are not strictly below the critical
    level, so no overload decay rate is defined."""


class NonPositiveVolatility(GridCapError):
    """A volatility function evaluated to a non-positive value."""


class ZeroVarianceLine(GridCapError):
    """A line's terminal current variance is zero; the line does not respond
    to the stochastic injections and has no finite decay rate."""


class NoStochasticLines(GridCapError):
    """No line is affected by the stochastic injections; every overload decay
    rate is infinite and only the deterministic region is informative."""


class NonUniformGamma(GridCapError):
    """A closed form valid only for a common mean-reversion rate was called
    with heterogeneous rates."""


class NonUniformTau(GridCapError):
    """A closed form valid only for a common thermal time constant was called
    on a network with heterogeneous line constants."""


class NonPositiveTau(GridCapError):
    """A thermal time constant must be positive for the temperature map."""


# --- solver errors -----------------------------------------------------------

class NegativeRadicand(GridCapError):
    """The combination tau*theta' + theta went non-positive, so the square
    root in the temperature functional is undefined."""


class DegenerateF(GridCapError):
    """The shooting trajectory's f component collapsed toward zero, which is
    a singularity of the variational system."""


class BlowUp(GridCapError):
    """A shooting trajectory left the configured bounding box."""


class NoBoundaryHit(GridCapError):
    """No shooting parameters inside the search box drive the temperature to
    the overload level at the horizon."""


class BoundCollapse(GridCapError):
    """A capacity-region bound dropped to zero or below: the parameters are so
    noisy that no admissible operating point exists for that line."""

    def __init__(self, line, message=None):
        self.line = line
        super().__init__(message or f"capacity bound collapsed on line {line}")


class EmptySlice(GridCapError):
    """A requested two-dimensional slice of a capacity region is empty."""


class InsufficientHits(GridCapError):
    """Monte Carlo produced zero hits for some noise scale; the decay-slope
    fit needs a positive estimate at every scale."""
