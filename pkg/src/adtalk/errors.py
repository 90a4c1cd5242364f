"""Exception types shared across the package."""


class AdtalkError(Exception):
    """Base class for all errors raised by adtalk."""


class ValidationError(AdtalkError, ValueError):
    """Input violates a documented precondition."""


class ParseError(ValidationError):
    """Malformed line in a text input; carries the 1-based line number."""

    def __init__(self, message, line_no=None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class EmptyInputError(ValidationError):
    pass


class InsufficientDataError(ValidationError):
    pass


class InsufficientAudioError(InsufficientDataError):
    pass


class WavFormatError(ValidationError):
    pass


class DegenerateStumpError(AdtalkError):
    """All training instances carry the same label."""


class TrainingError(AdtalkError):
    pass


class FoldError(AdtalkError):
    """A trainer failed inside a cross-validation fold."""

    def __init__(self, fold, cause):
        self.fold = fold
        self.cause = cause
        super().__init__(f"fold {fold}: {type(cause).__name__}: {cause}")
