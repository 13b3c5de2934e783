"""Exception hierarchy.

Every error raised deliberately by this package derives from
:class:`MaxEntError`, so callers (and the CLI) can map them to exit codes.
"""


class MaxEntError(Exception):
    """Base class."""


class SpaceMismatch(MaxEntError, ValueError):
    """Objects that must share an outcome space do not."""


class ZeroProbabilityConditioning(MaxEntError, ValueError):
    """Conditioning on an event of probability zero."""


class Infeasible(MaxEntError, ValueError):
    """A constraint set is empty."""


class NonConvergence(MaxEntError, RuntimeError):
    """An iterative solver hit its cap; ``best`` holds the last iterate."""

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class VerificationFailed(MaxEntError, RuntimeError):
    """An a-posteriori optimality check did not hold."""


class ProbeOutsideConstraintSet(MaxEntError, ValueError):
    pass


class InvalidShift(MaxEntError, ValueError):
    pass


class YNotExpressibleInNewSpace(MaxEntError, ValueError):
    pass


class IrrationalWeights(MaxEntError, ValueError):
    pass


class DenominatorOverflow(MaxEntError, ValueError):
    pass


class ZNotDeterminingV(MaxEntError, ValueError):
    pass


class ProblemFileError(MaxEntError, ValueError):
    """Malformed problem file; carries an optional line/column position."""

    def __init__(self, message, line=None, column=None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column
