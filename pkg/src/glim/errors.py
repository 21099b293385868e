"""Exception hierarchy shared by every module."""


class GlimError(Exception):
    """Base class for all package errors."""


class ParseError(GlimError, ValueError):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class ValidationError(GlimError, ValueError):
    pass


class ConfigError(GlimError, ValueError):
    pass


class DomainError(GlimError, ValueError):
    pass


class SizeError(GlimError, ValueError):
    pass


class ModelError(GlimError, ValueError):
    pass


class SchemaError(ModelError):
    pass


class VersionError(ModelError):
    pass


class TrainingError(GlimError, ArithmeticError):
    def __init__(self, epoch, message="loss diverged"):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch
