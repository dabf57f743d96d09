"""Exception taxonomy shared across the package.

Every error raised on a documented failure path has a named class so callers
(and the CLI) can distinguish operational failures from certificate
violations.
"""


class NNCertError(Exception):
    """Base class for all package errors."""


# file ingestion
class BadMagic(NNCertError):
    pass


class CountMismatch(NNCertError):
    pass


class TruncatedFile(NNCertError):
    pass


class LabelOutOfRange(NNCertError):
    pass


class RaggedRow(NNCertError):
    pass


class NonNumericField(NNCertError):
    pass


# geometry / dataset shape
class DimensionMismatch(NNCertError):
    pass


class TriggerTooLarge(NNCertError):
    pass


class ImageTooSmall(NNCertError):
    pass


class DatasetTooSmall(NNCertError):
    pass


# certification
class EmptyTestSet(NNCertError):
    pass


class DuplicatePredictedLabel(NNCertError):
    pass


class KnnNotSupported(NNCertError):
    pass


class GroupsNotPartition(NNCertError):
    pass


# attack enumeration
class BudgetTooLarge(NNCertError):
    pass
