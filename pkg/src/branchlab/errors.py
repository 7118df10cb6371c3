"""Exception hierarchy shared by all modules."""


class BranchLabError(Exception):
    """Base class for every error raised by branchlab."""

    reason = "error"


class NonFinite(BranchLabError):
    reason = "NonFinite"


class ZeroVector(BranchLabError):
    reason = "ZeroVector"


class StepUnderflow(BranchLabError):
    reason = "StepUnderflow"


class NoCrossing(BranchLabError):
    reason = "NoCrossing"


class SameTrajectory(BranchLabError):
    reason = "SameTrajectory"


class NeedTwoCrossings(BranchLabError):
    reason = "NeedTwoCrossings"


class InvalidSchedule(BranchLabError, ValueError):
    reason = "InvalidSchedule"


class ConfigurationError(BranchLabError):
    """Pair configuration cannot be formed (scope conditions violated)."""

    reason = "ConfigurationError"


class NoEquilibrium(ConfigurationError):
    reason = "NoEquilibrium"


class MultipleEquilibria(ConfigurationError):
    reason = "MultipleEquilibria"


class CoincidentEquilibria(ConfigurationError):
    reason = "CoincidentEquilibria"


class NonHyperbolic(ConfigurationError):
    reason = "NonHyperbolic"


class ConstructionFailed(BranchLabError):
    reason = "ConstructionFailed"


class BranchingViolated(BranchLabError):
    reason = "BranchingViolated"


class ParamError(BranchLabError, ValueError):
    reason = "ParamError"


class ExprSyntaxError(BranchLabError, SyntaxError):
    """Parse failure; ``offset`` is the 0-based byte offset into the source."""

    reason = "SyntaxError"

    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = tuple(expected)
        exp = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message} at offset {offset}{exp}")


class UnknownIdentifier(ExprSyntaxError):
    reason = "UnknownIdentifier"


class UnknownFunction(ExprSyntaxError):
    reason = "UnknownFunction"


class ExprDomainError(BranchLabError, ArithmeticError):
    """Evaluation left the function's domain (ln of non-positive, x/0, ...)."""

    reason = "DomainError"

    def __init__(self, message, offset=None):
        self.offset = offset
        loc = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"{message}{loc}")
