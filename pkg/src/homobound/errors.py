"""Exception hierarchy shared by all homobound modules."""


class HomoboundError(Exception):
    """Base class for every error raised by this package."""


class SingularIntrinsics(HomoboundError, ValueError):
    pass


class DegeneratePlane(HomoboundError, ValueError):
    pass


class DegenerateHeight(HomoboundError, ValueError):
    pass


class OutOfDomain(HomoboundError, ValueError):
    pass


class PerspectiveDivideByZero(HomoboundError, ArithmeticError):
    pass


class AtDiscontinuity(HomoboundError, ArithmeticError):
    pass


class DomainContainsCritical(HomoboundError, ValueError):
    pass


class NonFiniteCoordinate(HomoboundError, ValueError):
    pass


class ImageRangeError(HomoboundError, ValueError):
    pass


class EmptyDomain(HomoboundError, ValueError):
    pass


class DegenerateSamples(HomoboundError, ValueError):
    pass


class IterationBudgetExhausted(HomoboundError, RuntimeError):
    """The branch-and-bound loop hit its iteration cap.

    ``bound`` is still a valid upper bound on the maximum, only looser than
    the requested certificate.
    """

    def __init__(self, bound, iterations):
        super().__init__(
            f"iteration budget exhausted after {iterations} steps; "
            f"loose bound {bound:.6g}"
        )
        self.bound = bound
        self.iterations = iterations


class SchemaError(HomoboundError, ValueError):
    pass


class DimensionMismatch(HomoboundError, ValueError):
    pass
