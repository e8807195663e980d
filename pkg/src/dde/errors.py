"""Exception hierarchy.

Every error carries a machine-readable ``category`` so the command line can
map it to an exit code without string matching.
"""


class DDEError(Exception):
    category = "error"


class InvalidArgumentError(DDEError, ValueError):
    category = "invalid-argument"


class ResourceLimitError(DDEError):
    category = "resource-limit"


class DegenerateDenominatorError(DDEError, ArithmeticError):
    category = "degenerate-denominator"


class BoundInapplicableError(DDEError, ValueError):
    category = "bound-inapplicable"


class FitFailureError(DDEError, RuntimeError):
    category = "fit-failure"

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NumericalError(DDEError, ArithmeticError):
    category = "numerical"

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ParseError(DDEError, ValueError):
    category = "parse"

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsupportedVersionError(ParseError):
    category = "unsupported-version"


class ConfigError(DDEError, ValueError):
    category = "config"


class ImaginaryResidualWarning(RuntimeWarning):
    """A distilled ratio carries a non-negligible imaginary part."""
