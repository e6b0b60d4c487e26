"""Exception types shared across the package.

The CLI maps these onto exit codes: config/format/parse problems exit 2,
capability problems (a strategy the model cannot support) exit 3, numeric
failures exit 4.
"""


class LatentVoteError(Exception):
    """Base class for all package errors."""


class ShapeError(LatentVoteError):
    """Tensor shapes do not match an operation's contract."""


class ConfigError(LatentVoteError):
    """Invalid configuration or command-line usage."""


class FormatError(LatentVoteError):
    """A puzzle or file value is out of its documented range."""


class ParseError(LatentVoteError):
    """A dataset file line could not be parsed; carries the line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class GenerationError(LatentVoteError):
    """Puzzle generation could not satisfy its constraints within the retry budget."""


class DegenerateInstanceError(LatentVoteError):
    """An instance has no positions to predict."""


class StrategyUnavailableError(LatentVoteError):
    """A voting strategy needs a capability the model does not provide."""


class NumericError(LatentVoteError):
    """Non-finite values where finite ones are required."""
