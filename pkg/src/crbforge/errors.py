"""Exception hierarchy shared by every crbforge module.

Each class carries a stable ``kind`` string; traces, failure classification
and reports key on it rather than on Python class names.
"""

from __future__ import annotations


class CrbError(Exception):
    kind = "Error"

    def __init__(self, message: str = "", **details):
        super().__init__(message)
        self.message = message
        self.details = details


# expression kernel
class ExprError(CrbError):
    kind = "ExprError"


class ExprSyntaxError(ExprError):
    kind = "SyntaxError"

    def __init__(self, message: str, position: int = -1, expected: str = "", field: str = ""):
        loc = f" at {position}" if position >= 0 else ""
        where = f"{field}: " if field else ""
        super().__init__(f"{where}{message}{loc}", position=position, expected=expected, field=field)
        self.position = position
        self.expected = expected
        self.field = field


class UnknownSymbol(ExprError):
    kind = "UnknownSymbol"

    def __init__(self, name: str, field: str = ""):
        where = f"{field}: " if field else ""
        super().__init__(f"{where}unknown symbol {name!r}", name=name, field=field)
        self.name = name


class UnboundSymbol(ExprError):
    kind = "UnboundSymbol"

    def __init__(self, name: str):
        super().__init__(f"symbol {name!r} has no numeric binding", name=name)
        self.name = name


class NonFiniteResult(ExprError):
    kind = "NonFiniteResult"


class DivisionByZero(ExprError):
    kind = "DivisionByZero"


class ExpansionBlowup(ExprError):
    kind = "ExpansionBlowup"


class DegreeOverflow(ExprError):
    kind = "DegreeOverflow"


class NonPolynomialIndex(ExprError):
    kind = "NonPolynomialIndex"


# calculus
class IndexDifferentiation(CrbError):
    kind = "IndexDifferentiation"


class MissingIndex(CrbError):
    kind = "MissingIndex"


class ExponentOutOfTable(CrbError):
    kind = "ExponentOutOfTable"


# fisher
class SingularFim(CrbError):
    kind = "SingularFim"


# scenarios
class SchemaError(CrbError):
    kind = "SchemaError"


# pipeline
class PlanInvalid(CrbError):
    kind = "PlanInvalid"


class PatchExhausted(CrbError):
    kind = "PatchExhausted"


class StepCheckFailed(CrbError):
    """Numeric post-check of an executed step disagreed with its inputs."""

    kind = "StepCheckFailed"


class NotEqualError(CrbError):
    kind = "NotEqual"


# validation
class AllPointsSkipped(CrbError):
    kind = "AllPointsSkipped"


class NonFinitePoint(CrbError):
    kind = "NonFinitePoint"


# llm bridge
class Transport(CrbError):
    kind = "Transport"


class AuthMissing(CrbError):
    kind = "AuthMissing"


# reports
class NoTraces(CrbError):
    kind = "NoTraces"
