"""
Error hierarchy for heftreplay.
Library code raises these; the CLI turns them into a nonzero exit status.
"""

from typing import Optional


class HeftReplayError(Exception):
    """Base class for all heftreplay errors"""


class InvalidInputError(HeftReplayError, ValueError):
    """Non-finite or out-of-domain input values"""


class InvalidLevelError(InvalidInputError):
    """Quantile level outside the open interval (0, 1)"""


class InvalidCoefficientError(InvalidInputError):
    """Market impact coefficient k must be strictly positive"""


class EmptyEvaluationError(HeftReplayError, ValueError):
    """No periods left to evaluate after alignment and filtering"""


class FitError(HeftReplayError, ValueError):
    """A model could not be fitted (rank deficiency, too few rows)"""


class ShapeError(HeftReplayError, ValueError):
    """Covariate arity does not match the fitted model"""


class PreconditionError(HeftReplayError, ValueError):
    """An operation's documented precondition does not hold"""


class InsufficientDataError(HeftReplayError, ValueError):
    """Not enough history to build an estimate"""


class NotFittedError(HeftReplayError, RuntimeError):
    """A learned component was used before being fitted"""


class DataError(HeftReplayError):
    """Archive data is incomplete for the requested operation"""


class AlignmentError(HeftReplayError):
    """Series could not be aligned (empty intersection)"""


class DuplicateTeamError(HeftReplayError, ValueError):
    """The same team name appears twice in one leaderboard"""


class ConfigError(HeftReplayError, ValueError):
    """Invalid run configuration"""


class LoadError(HeftReplayError):
    """A file could not be loaded; carries file and row context"""

    def __init__(self, message: str, path: Optional[str] = None, row: Optional[int] = None):
        self.path = path
        self.row = row
        context = []
        if path is not None:
            context.append(f"file={path}")
        if row is not None:
            context.append(f"row={row}")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)


class OutputError(HeftReplayError):
    """A declared output file was not produced"""
