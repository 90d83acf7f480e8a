"""Exception hierarchy shared by all subsystems.

Validation-style errors (bad input, bad config) derive from InputError so the
CLI can map them to exit code 1; everything else is a runtime error (exit 2).
"""


class DepgraphRecError(Exception):
    pass


class InputError(DepgraphRecError):
    """User-correctable problem: malformed input or configuration."""


class MiniIrSyntaxError(InputError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(InputError):
    pass


class FormatError(InputError):
    pass


class ConfigError(InputError):
    pass


class CycleError(DepgraphRecError):
    pass


class EmptyVocabulary(InputError):
    pass


class UnknownToken(InputError):
    pass


class VocabMismatch(InputError):
    pass


class ShapeError(DepgraphRecError):
    pass


class NaNError(DepgraphRecError):
    pass


class EmptySequence(InputError):
    pass


class EmptyPathSet(InputError):
    pass
