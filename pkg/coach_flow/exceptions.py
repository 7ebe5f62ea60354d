"""
Exception hierarchy. Every error that reaches the command line carries the
exit code it maps to.
"""


class CoachFlowError(Exception):
    exit_code: int = 1


class InvalidConfigError(CoachFlowError, ValueError):
    exit_code = 2

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class NumericError(CoachFlowError, ArithmeticError):
    """Non-finite logits, losses, gradients or parameters."""
    exit_code = 3


class CorruptRecordError(NumericError):
    """A training record whose old log-probability makes the importance ratio non-finite."""


class EstimatorCheckError(CoachFlowError):
    exit_code = 4


class DegenerateDatasetError(CoachFlowError, ValueError):
    exit_code = 5


class RunStoreError(CoachFlowError):
    exit_code = 1


class EpisodeFinishedError(CoachFlowError, RuntimeError):
    pass


class ContractViolationError(CoachFlowError, RuntimeError):
    pass


class InsufficientGroupError(CoachFlowError, ValueError):
    pass
