"""Exception types shared across the package."""


class CircleLabError(Exception):
    """Base class for all package errors."""


class ConfigError(CircleLabError):
    """Invalid experiment configuration; carries the offending field path."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class InvariantViolation(CircleLabError):
    """A verified construction failed one of its structural invariants."""


class RationalDetected(CircleLabError):
    """Continued-fraction expansion exhausted: value indistinguishable from a rational."""


class DepthUnreachable(CircleLabError):
    """Working precision cannot support the requested expansion depth."""


class NonInvertiblePiece(CircleLabError):
    """A map piece fails the positive-derivative bound needed for inversion."""


class RationalRotation(CircleLabError):
    """A periodic orbit was detected while certifying a rotation number."""

    def __init__(self, p, q, message=""):
        self.p = p
        self.q = q
        super().__init__(message or f"rotation number equals {p}/{q} to working precision")


class BracketFailure(CircleLabError):
    """Tuning bracket endpoints do not straddle the target rotation number."""


class PrecisionExhausted(CircleLabError):
    """An iterative search shrank below the resolution of the working precision."""


class AmbiguousMatch(CircleLabError):
    """Two candidate orbit offsets both matched within tolerance."""


class InfeasibleSlopes(CircleLabError):
    """No admissible one-sided slope pair exists for the requested jump."""


class SupportCollision(CircleLabError):
    """An adjuster support overlaps another break point or its image window."""


class OrderMismatch(CircleLabError):
    """Circular orders of two orbit prefixes disagree; no monotone pairing exists."""


class DepthBeyondPrecision(CircleLabError):
    """Partition endpoints collide at working precision; depth is too deep."""


class EvenDepthWithoutReversal(CircleLabError):
    """An even partition depth was requested with the orientation shim disabled."""


class DegenerateTriple(CircleLabError):
    """A triple has a gap below working tolerance."""


class DepthTooShallow(CircleLabError):
    """A cell property failed at the requested depth; carries the first failing property."""

    def __init__(self, prop, message=""):
        self.prop = prop
        super().__init__(message or f"property {prop} failed")


class BadParameters(CircleLabError):
    """Cell parameters out of admissible range."""


class InconclusiveWindow(CircleLabError):
    """No classification tag criterion was met over the supplied depth window."""
