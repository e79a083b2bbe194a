"""Exception hierarchy shared by every module of the package."""


class MlpError(Exception):
    """Base class for all errors raised by mcumlp."""


class ShapeError(MlpError, ValueError):
    pass


class DomainError(MlpError, ValueError):
    pass


class ConfigError(MlpError, ValueError):
    pass


class CodecError(MlpError, ValueError):
    pass


class FitError(MlpError, ValueError):
    pass


class ParseError(MlpError, ValueError):
    """Malformed text input; carries the 1-based line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IntegrityError(MlpError):
    """Checksum or structural corruption in a stored artifact."""


class OutOfWorldError(MlpError, ValueError):
    pass


class TrainingDiverged(MlpError, ArithmeticError):
    def __init__(self, epoch, mse):
        self.epoch = epoch
        self.mse = mse
        super().__init__(f"training diverged at epoch {epoch} (mse={mse!r})")
