"""Exception types shared across the package."""


class GhmError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(GhmError):
    """A map document does not conform to the wire schema."""


class InvariantViolation(GhmError):
    """A constructed map violates one of the defining axioms.

    The ``axiom`` attribute carries a short tag such as ``"GHM1"`` or ``"H2"``
    so callers (and the CLI error JSON) can name the failed condition.
    """

    def __init__(self, axiom, message):
        self.axiom = axiom
        super().__init__(f"{axiom}: {message}")


class GeometryInfeasibleError(GhmError):
    """Requested family parameters would push a branch image out of the square."""


class SingularPointError(GhmError):
    """The query point lies on the singular set (strip boundaries) or outside S."""


class UnknownSymbolError(GhmError):
    """A word references a branch id the map does not have."""


class EmptyStripError(GhmError):
    """A symbolic refinement produced an empty region."""


class OverlapError(GhmError):
    """The operation is only defined for non-overlapping maps."""


class OrbitBoundaryError(GhmError):
    """A forward orbit hit a strip boundary in strict mode."""

    def __init__(self, step):
        self.step = step
        super().__init__(f"orbit hits a strip boundary at step {step}")


class NonConvergenceError(GhmError):
    """An iterative solve did not reach its tolerance within the cap."""


class UniquenessError(GhmError):
    """Fixed densities from independent starting points disagree."""


class DegenerateObservableError(GhmError):
    """An observable has (numerically) zero variance along the orbit."""


class TreeBudgetError(GhmError):
    """A preimage-tree computation would exceed its node budget."""
