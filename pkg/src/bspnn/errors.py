"""Exception hierarchy shared across the package.

Two branches matter for the CLI exit codes: ``ValidationError`` (bad
configuration, arguments, or incompatible models) maps to exit code 2,
``DataError`` (malformed or inconsistent input data) maps to exit code 3.
Anything else is an internal error (exit code 4).
"""


class BspnnError(Exception):
    """Base class for all package errors."""


class ValidationError(BspnnError):
    """Invalid configuration, arguments, or model state."""


class DataError(BspnnError):
    """Malformed or inconsistent input data."""


# --- ingestion ---------------------------------------------------------

class FieldCountMismatch(DataError):
    """A record does not have the expected number of comma-separated fields."""


class MalformedNumeric(DataError):
    """A numeric column contains text that does not parse as a number."""


class UnknownAttackName(DataError):
    """An attack name is missing from the category map under strict policy."""


class EmptyDataset(DataError):
    """An operation requiring at least one record received none."""


# --- dataset construction ----------------------------------------------

class UncoveredAttackName(DataError):
    """A training attack is not assigned to any intrusion cluster."""


class IndexOutOfRange(ValidationError):
    """A cluster or dataset index is outside the valid range."""


# --- base learner -------------------------------------------------------

class NonPositiveBandwidth(ValidationError):
    """Kernel bandwidth must be strictly positive."""


class ZeroTotalWeight(ValidationError):
    """Weighted mean is undefined when the weights sum to zero."""


class WidthMismatch(ValidationError):
    """Query vector width does not match the model's feature width."""


class SearchSpaceInvalid(ValidationError):
    """Bandwidth search interval is empty or inverted."""


# --- booster ------------------------------------------------------------

class ZeroSize(ValidationError):
    """A distribution over zero examples cannot be initialized."""


class AllZeroWeights(ValidationError):
    """A weight vector cannot be normalized when every entry is zero."""


# --- anomaly ------------------------------------------------------------

class MixedLabels(DataError):
    """One-class training data contains non-normal records."""


class QuantileOutOfRange(ValidationError):
    """Calibration quantile must lie strictly between 0 and 1."""


class UncalibratedModel(ValidationError):
    """Anomaly classification requires a calibrated threshold."""


# --- metrics ------------------------------------------------------------

class LengthMismatch(ValidationError):
    """Prediction and truth sequences differ in length."""


class ClassIndexOutOfRange(ValidationError):
    """A class index falls outside [0, class_count)."""


class EmptyClass(ValidationError):
    """Detection rate is undefined for a class with no instances."""


class EmptyComplement(ValidationError):
    """False alarm rate is undefined when no other-class instances exist."""


class DimensionMismatch(ValidationError):
    """Confusion and cost matrices have different shapes."""


class EmptyMatrix(ValidationError):
    """Average cost is undefined over an all-zero confusion matrix."""


# --- pipeline -----------------------------------------------------------

class EncoderMismatch(ValidationError):
    """Model encoder is incompatible with the supplied data."""
