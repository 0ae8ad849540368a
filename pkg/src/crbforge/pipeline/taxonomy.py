"""Root-cause categories for failed derivation steps."""

from __future__ import annotations

import enum


class FailureClass(str, enum.Enum):
    SUMMATION_CLOSED_FORM = "SummationClosedForm"
    INCOMPLETE_DERIVATION = "IncompleteDerivation"
    CONSTANT_OR_SIGN = "ConstantOrSign"
    MODELING_MISMATCH = "ModelingMismatch"
    FIM_FORMULATION = "FimFormulation"
    NO_VALID_OUTPUT = "NoValidOutput"


_SUMMATION_KINDS = {"ExponentOutOfTable", "MissingIndex", "DegreeOverflow"}
_MODELING_KINDS = {"UnknownSymbol", "UnboundSymbol", "IndexDifferentiation", "NonPolynomialIndex", "SyntaxError"}
_SIGN_KINDS = {"NotEqual", "StepCheckFailed"}
_FIM_KINDS = {"SingularFim"}


def classify_failure(error_kind: str | None, op: str | None) -> FailureClass:
    """Map an (error kind, step op) pair to exactly one category.

    Checked in order: FIM assembly, summation, modelling, value mismatch;
    anything else counts as an incomplete derivation.
    """
    if op == "assemble_fim" or error_kind in _FIM_KINDS:
        return FailureClass.FIM_FORMULATION
    if error_kind in _SUMMATION_KINDS or op == "sum_index":
        return FailureClass.SUMMATION_CLOSED_FORM
    if error_kind in _MODELING_KINDS:
        return FailureClass.MODELING_MISMATCH
    if error_kind in _SIGN_KINDS:
        return FailureClass.CONSTANT_OR_SIGN
    return FailureClass.INCOMPLETE_DERIVATION


def root_cause(trace) -> FailureClass | None:
    """One category per trace, or None when the derivation is clean.

    A trace with no outputs at all is ``NoValidOutput``; otherwise the first
    non-ok step decides.  Missing targets without a failed step, or a failed
    verdict, fall back to their own categories.
    """
    if not trace.outputs:
        return FailureClass.NO_VALID_OUTPUT
    for rec in trace.steps:
        if rec.status != "ok":
            return FailureClass(rec.failure_class) if rec.failure_class else FailureClass.INCOMPLETE_DERIVATION
    if any(v == "NotEqual" for v in trace.verdicts.values()):
        return FailureClass.CONSTANT_OR_SIGN
    if trace.missing_targets:
        return FailureClass.INCOMPLETE_DERIVATION
    return None
