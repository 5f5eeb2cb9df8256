"""Exception hierarchy shared by all estimators."""


class CompRiskError(Exception):
    """Base class for every error raised by this package."""


class DataError(CompRiskError, ValueError):
    """Input records cannot form a valid competing-risks sample."""


class EmptySample(DataError):
    pass


class InvalidStatusCode(DataError):
    pass


class NonFiniteValue(DataError):
    pass


class NoEventsOfInterest(DataError):
    pass


class InvalidKernelSpec(CompRiskError, ValueError):
    pass


class DegenerateNeighborhood(CompRiskError):
    """Span-mode neighborhood selects fewer than two subjects."""


class UndefinedWeight(CompRiskError):
    """Conditional survival is numerically zero at a censoring time.

    ``indices`` holds the offending subject indices (positions in the
    validated sample).
    """

    def __init__(self, indices):
        self.indices = list(indices)
        super().__init__(
            f"conditional survival vanishes for {len(self.indices)} censored "
            f"subject(s), first index {self.indices[0]}; widen the span"
        )


class NoCases(CompRiskError):
    pass


class NoControls(CompRiskError):
    pass


class NoPairs(CompRiskError):
    pass


class RawMarkerNotAllowed(CompRiskError, ValueError):
    """Calibration metrics need scores that are probabilities."""


class SingularFit(CompRiskError):
    pass


class NonConvergence(CompRiskError):
    pass


class ZeroCensoringProbability(CompRiskError):
    def __init__(self, index):
        self.index = int(index)
        super().__init__(f"censoring survival is zero for subject {self.index}")


class InvalidConfig(CompRiskError, ValueError):
    pass


class TooManyFailures(CompRiskError):
    pass
