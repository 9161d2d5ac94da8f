"""Exception hierarchy shared by every module of the package."""


class ThinningError(Exception):
    """Base class for all errors raised by this package.

    Every subclass carries a stable ``code`` so the command-line layer can
    emit machine-readable errors.
    """

    code = "ThinningError"

    def __init__(self, message, field=None):
        super().__init__(message)
        self.message = message
        self.field = field

    def to_dict(self):
        return {"code": self.code, "message": self.message, "field": self.field}


class InvalidParameter(ThinningError):
    code = "InvalidParameter"


class DomainError(ThinningError):
    code = "DomainError"


class Unsupported(ThinningError):
    code = "Unsupported"


class UnsupportedFamily(ThinningError):
    code = "UnsupportedFamily"


class UnknownRequiredParameter(ThinningError):
    code = "UnknownRequiredParameter"


class NonIntegerAllocation(ThinningError):
    code = "NonIntegerAllocation"


class ShapeMismatch(ThinningError):
    code = "ShapeMismatch"


class InvalidNu(ThinningError):
    code = "InvalidNu"


class InvalidGamma(ThinningError):
    code = "InvalidGamma"


class OutOfSupport(ThinningError):
    code = "OutOfSupport"


class TransformDomainError(ThinningError):
    code = "TransformDomainError"


class SizeMismatch(ThinningError):
    code = "SizeMismatch"


class EmptyFolds(ThinningError):
    code = "EmptyFolds"


class DegenerateInput(ThinningError):
    code = "DegenerateInput"


class McmcNonConvergence(ThinningError):
    code = "McmcNonConvergence"


class BadInit(ThinningError):
    code = "BadInit"


class NonFiniteTarget(ThinningError):
    code = "NonFiniteTarget"


class UnsortedInput(ThinningError):
    code = "UnsortedInput"


class DegeneratePits(ThinningError):
    code = "DegeneratePits"


class SeriesTooShort(ThinningError):
    code = "SeriesTooShort"


class EmptySegment(ThinningError):
    code = "EmptySegment"


class ConfigError(ThinningError):
    code = "ConfigError"
