"""Exception hierarchy shared by every xprlab module."""

from typing import Any


class XprlabError(Exception):
    """Base class for errors raised by xprlab."""


class PrecisionExhausted(XprlabError):
    def __init__(self, required_bits: int, ceiling_bits: int):
        super().__init__(
            f"guard precision of {required_bits} bits exceeds the ceiling of {ceiling_bits} bits"
        )
        self.required_bits = required_bits
        self.ceiling_bits = ceiling_bits


class DomainError(XprlabError, ValueError):
    pass


class ActivationDomainError(DomainError):
    """An activation received an input outside its domain."""

    def __init__(self, neuron: str, message: str):
        super().__init__(f"neuron {neuron!r}: {message}")
        self.neuron = neuron


class EvaluationZeroDivision(DomainError, ZeroDivisionError):
    """The rational part of an H3 member vanished at the evaluation point."""


class SampleError(XprlabError):
    def __init__(self, index: int, cause: Exception):
        super().__init__(f"sample {index} failed: {cause}")
        self.index = index
        self.cause = cause


class DegenerateInputError(XprlabError, ValueError):
    pass


class LengthError(XprlabError, ValueError):
    pass


class ZeroSampleError(XprlabError):
    def __init__(self, index: int):
        super().__init__(f"sample {index} is numerically zero")
        self.index = index


class IllConditionedError(XprlabError):
    def __init__(self, condition: Any, ceiling: Any):
        super().__init__(f"condition number {condition} exceeds {ceiling}")
        self.condition = condition
        self.ceiling = ceiling


class RankError(XprlabError):
    pass


class BudgetError(XprlabError):
    pass


class NotFound(XprlabError):
    """A search finished without a solution.

    ``exhaustive`` is set when the failure is a proof of infeasibility (a
    subtorus witness, a sign obstruction or a full period scanned), and
    unset when only the budget ran out.
    """

    def __init__(
        self,
        reason: str,
        witness: Any = None,
        exhaustive: bool = False,
        message: str | None = None,
    ):
        super().__init__(message or f"not found: {reason}")
        self.reason = reason
        self.witness = witness
        self.exhaustive = exhaustive


class InternalError(XprlabError):
    pass


class UsageError(XprlabError):
    pass


class PrecisionWarning(UserWarning):
    pass
