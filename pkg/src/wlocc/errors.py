"""Exception hierarchy.

Every error carries a short machine-readable ``code`` so the CLI (and any
JSON consumer) can report failures without parsing messages.
"""

from __future__ import annotations


class WClassError(ValueError):
    code = "wclass_error"

    def to_json(self) -> dict:
        return {"error": self.code, "message": str(self)}


# state
class EmptyVector(WClassError):
    code = "empty_vector"


class NegativeComponent(WClassError):
    code = "negative_component"


class SumExceedsOne(WClassError):
    code = "sum_exceeds_one"


class DimensionMismatch(WClassError):
    code = "dimension_mismatch"


class NotWClassForm(WClassError):
    code = "not_wclass_form"


# measurement
class InvalidOutcome(WClassError):
    code = "invalid_outcome"


class ComponentOverflow(WClassError):
    code = "component_overflow"


class SigmaOutOfRange(WClassError):
    code = "sigma_out_of_range"


class DegenerateComponent(WClassError):
    code = "degenerate_component"


class ProbabilityTooSmall(WClassError):
    code = "probability_too_small"


class TargetNotBelow(WClassError):
    code = "target_not_below"


class TooFewParties(WClassError):
    code = "too_few_parties"


class InvalidMeasurement(WClassError):
    code = "invalid_measurement"


# oracle
class PartyOutOfRange(WClassError, IndexError):
    code = "party_out_of_range"


class UnrealizableStep(WClassError):
    code = "unrealizable_step"


# protocol
class ProductState(WClassError):
    code = "product_state"


class TargetUnreachable(WClassError):
    code = "target_unreachable"


class StepPreconditionViolated(WClassError):
    code = "step_precondition_violated"

    def __init__(self, message: str, round_index: int):
        super().__init__(f"round {round_index}: {message}")
        self.round_index = round_index


class UnclassifiedTree(WClassError):
    code = "unclassified_tree"


# bounds
class PreconditionViolated(WClassError):
    code = "precondition_violated"


class ZeroComponent(WClassError):
    code = "zero_component"


# symmetric
class DomainError(WClassError):
    code = "domain_error"


class InfeasiblePoint(WClassError):
    code = "infeasible_point"
