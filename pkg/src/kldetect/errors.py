"""Exception and warning types shared across the toolkit."""


class KLDetectError(Exception):
    """Base class for all toolkit errors."""


class DataError(KLDetectError):
    """Problems with the input data; the CLI maps these to exit code 2."""


class MissingLabelColumn(DataError):
    pass


class MalformedRow(DataError):
    def __init__(self, row, column, message):
        self.row = row
        self.column = column
        super().__init__(f"row {row}, column {column!r}: {message}")


class EmptyFile(DataError):
    pass


class EmptyTable(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class InsufficientRows(DataError):
    pass


class MinorityTooSmall(DataError):
    pass


class SingleClass(DataError):
    pass


class IndexOutOfRange(DataError):
    pass


class LengthMismatch(DataError):
    pass


class SingleClassLabels(DataError):
    pass


class FoldTooSmall(DataError):
    pass


class DegenerateHoldout(DataError):
    pass


class SchemaMismatch(DataError):
    pass


class EmptyBackground(DataError):
    pass


class EmptySample(DataError):
    pass


class DegeneratePerturbations(DataError):
    pass


class EvenMemberCount(KLDetectError):
    pass


class TrainingSetTooLarge(KLDetectError):
    """Raised by the SVM trainer when asked to fit more rows than its cap."""


class ConvergenceWarning(UserWarning):
    """An iterative solver stopped before meeting its tolerance."""


class DataWarning(UserWarning):
    """Recoverable oddities in the data (degenerate labels, clamped k, ...)."""
