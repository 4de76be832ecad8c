"""Exception hierarchy shared by all tsqes modules."""


class TsqesError(Exception):
    """Base class for every error raised by this package."""


class StructuralError(TsqesError, ValueError):
    """Malformed operator structure (mismatched string lengths, bad letters)."""


class DimensionMismatchError(TsqesError, ValueError):
    pass


class ResourceLimitError(TsqesError):
    """A dense path was requested beyond the configured qubit cap."""


class NonHermitianError(TsqesError, ValueError):
    pass


class DestructiveInterferenceError(TsqesError, ArithmeticError):
    """The iterate norm underflowed: psi0 has no weight on the surviving subspace."""


class ConstraintViolationError(TsqesError):
    """(E_i - e_s) t left [-pi/2, pi/2] while the constraint is enforced."""


class DegenerateRatioError(TsqesError, ValueError):
    """Contraction ratio equals one; no finite iteration bound exists."""


class UnstableRatioError(TsqesError, ArithmeticError):
    """Denominator estimate is statistically consistent with zero."""


class UnsupportedParameterError(TsqesError, ValueError):
    pass


class ParseError(TsqesError, ValueError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(f"{where}{message}")


class SpecError(TsqesError, ValueError):
    """Invalid experiment spec; ``field`` names the offending key path."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
