"""Exception types shared across the package."""


class SubsetPrivError(Exception):
    """Base class for all package errors."""


class DomainTooSmall(SubsetPrivError):
    """The category domain is too small for the requested construction."""


class DomainTooLarge(SubsetPrivError):
    """An operation would enumerate more subsets than the configured cap."""


class AsymmetricBase(SubsetPrivError):
    """Dummy augmentation requires a complement-symmetric base design."""


class NonInteriorInit(SubsetPrivError):
    """EM needs a strictly positive starting distribution."""


class IdentifiabilityViolation(SubsetPrivError):
    """The design cannot distinguish all category distributions.

    Carries the diagnosis produced by ``check_identifiability`` when
    available.
    """

    def __init__(self, message, diagnosis=None):
        super().__init__(message)
        self.diagnosis = diagnosis


class DegenerateTable(SubsetPrivError):
    """A test was requested on an empty contingency table."""


class IngestError(SubsetPrivError):
    """A raw data file contains a value not covered by the schema."""


class UnknownVariable(SubsetPrivError):
    """The collection service has no variable registered under this id."""


class QuestionPending(SubsetPrivError):
    """A session already has an outstanding question."""


class NoPendingQuestion(SubsetPrivError):
    """An answer was submitted but no question is outstanding."""


class SessionExpired(SubsetPrivError):
    """The session exceeded its lifetime; any pending question was discarded."""
