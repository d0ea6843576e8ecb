"""Exception hierarchy shared by all cellkit modules."""


class CellkitError(Exception):
    """Base class for every error raised by cellkit."""

    code = "error"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class PrecisionError(CellkitError):
    """Base for precision and budget failures (CLI exit status 4)."""


class InsufficientPrecision(PrecisionError):
    code = "InsufficientPrecision"


class BudgetExceeded(PrecisionError):
    code = "BudgetExceeded"

    def __init__(self, size, budget):
        super().__init__(f"enumeration size {size} exceeds budget {budget}")
        self.size = size
        self.budget = budget

    def to_dict(self):
        d = super().to_dict()
        d.update(size=self.size, budget=self.budget)
        return d


class PreconditionError(CellkitError):
    """Base for violated operation preconditions (CLI exit status 3)."""

    code = "PreconditionError"


class ZeroArgument(PreconditionError, ValueError):
    code = "ZeroArgument"


class DivisionByZero(PreconditionError, ZeroDivisionError):
    code = "DivisionByZero"


class EmptyFiber(PreconditionError):
    code = "EmptyFiber"


class NotInFiber(PreconditionError):
    code = "NotInFiber"


class SignatureDepthExceeded(PreconditionError):
    code = "SignatureDepthExceeded"


class WindowTooSmall(PreconditionError):
    code = "WindowTooSmall"


class WindowMismatch(PreconditionError):
    code = "WindowMismatch"


class ClassesNotBalls(PreconditionError):
    code = "ClassesNotBalls"


class NonUniformOrder(PreconditionError):
    code = "NonUniformOrder"


class NotASection(PreconditionError):
    code = "NotASection"


class NotSmall(PreconditionError):
    code = "NotSmall"


class PreconditionUnmet(PreconditionError):
    code = "PreconditionUnmet"


class NonConstantAc1(PreconditionError):
    code = "NonConstantAc1"


class NonUniformTreeType(PreconditionError):
    code = "NonUniformTreeType"


class NotCovering(PreconditionError):
    code = "NotCovering"


class NotSubsetMaximal(PreconditionError):
    code = "NotSubsetMaximal"


class AmbiguousChoice(PreconditionError):
    code = "AmbiguousChoice"


class UnknownBasePoint(PreconditionError, KeyError):
    code = "UnknownBasePoint"

    def __str__(self):
        return Exception.__str__(self)


class ScenarioError(CellkitError):
    """Scenario file failed to parse or validate (CLI exit status 2)."""

    code = "ValidationError"
