"""Exception hierarchy shared by every engine module.

Each error carries a stable machine-readable ``code`` (used verbatim in CLI
and HTTP error payloads) and a default HTTP status for the service layer.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all engine errors."""

    code = "error"
    http_status = 400


# --- document / input validity -------------------------------------------

class ParseError(EngineError):
    code = "parse_error"


class SchemaError(EngineError):
    code = "schema_error"


class LengthMismatchError(EngineError):
    code = "length_mismatch"


class EmptyInputError(EngineError):
    code = "empty_input"


# --- graph ----------------------------------------------------------------

class CycleError(EngineError):
    """Adding the edge would close a directed cycle; the graph is unchanged."""

    code = "cycle"
    http_status = 409


class UnknownNodeError(EngineError):
    code = "unknown_node"
    http_status = 404


class DuplicateEdgeError(EngineError):
    code = "duplicate_edge"


class RoleConflictError(EngineError):
    """Node already holds the opposite treatment/outcome designation."""

    code = "role_conflict"
    http_status = 409


class MissingDesignationError(EngineError):
    code = "missing_designation"
    http_status = 422


# --- dataset ----------------------------------------------------------------

class EmptyDatasetError(EngineError):
    code = "empty_dataset"


class UnknownColumnError(EngineError):
    code = "unknown_column"
    http_status = 404


class NotCategoricalError(EngineError):
    code = "not_categorical"


class ColumnKindError(EngineError):
    """Column exists but has the wrong kind for the operation."""

    code = "column_kind"


class AllMissingError(EngineError):
    code = "all_missing"
    http_status = 422


class MissingValuesError(EngineError):
    """Operation requires complete cases but missing values are present."""

    code = "missing_values"
    http_status = 422


# --- propensity / weighting ------------------------------------------------

class DegenerateTreatmentError(EngineError):
    code = "degenerate_treatment"
    http_status = 422


class MissingCovariateError(EngineError):
    code = "missing_covariate"
    http_status = 404


class ScoreOutOfRangeError(EngineError):
    code = "score_out_of_range"


# --- balance -----------------------------------------------------------------

class EmptyGroupError(EngineError):
    code = "empty_group"
    http_status = 422


class NonPositiveWeightError(EngineError):
    code = "non_positive_weight"


class BothAdjustmentsGivenError(EngineError):
    code = "both_adjustments_given"


class CovariateMissingError(EngineError):
    code = "covariate_missing"
    http_status = 404


class UnknownCovariateError(EngineError):
    code = "unknown_covariate"
    http_status = 404


# --- matching ----------------------------------------------------------------

class NoControlsError(EngineError):
    code = "no_controls"
    http_status = 422


class MissingScoresError(EngineError):
    code = "missing_scores"


class SingularCovarianceError(EngineError):
    code = "singular_covariance"
    http_status = 422


class StaleIdsError(EngineError):
    code = "stale_ids"


# --- effects -------------------------------------------------------------------

class MissingOutcomeError(EngineError):
    code = "missing_outcome"
    http_status = 404


class TooManyVariablesError(EngineError):
    code = "too_many_variables"


class UnknownVariableError(EngineError):
    code = "unknown_variable"
    http_status = 404


# --- provenance ------------------------------------------------------------------

class HashMismatchError(EngineError):
    code = "hash_mismatch"
