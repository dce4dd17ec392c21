"""Exception types shared across the package."""


class QWLecamError(Exception):
    """Base class for all package errors."""


class RangeError(QWLecamError, ValueError):
    """A parameter lies outside its admissible interval."""

    def __init__(self, field, value, lo, hi):
        self.field = field
        self.value = value
        super().__init__(f"{field}={value!r} outside [{lo}, {hi}]")


class DegenerateCoin(QWLecamError, ValueError):
    """A coin entry vanishes, so u11*u12*u21*u22 == 0."""


class MarginViolation(QWLecamError, ValueError):
    """The coin angle phi is closer than kappa to 0 or pi/2."""


class CapExceeded(QWLecamError, ValueError):
    """Requested walk length is above the evolution cap."""


class DomainError(QWLecamError, ValueError):
    """Argument outside the domain of a closed-form map."""


class GridTooCoarse(QWLecamError, ValueError):
    """Grid cells are too wide to resolve the smoothing window."""


class UnsupportedBias(QWLecamError, ValueError):
    """Oscillation analysis requested for a biased coin (phi != pi/4)."""


class ConvergenceError(QWLecamError, ArithmeticError):
    """A bracketing solve failed to reach the requested width."""


class NonFinite(QWLecamError, ArithmeticError):
    """A Langevin chain produced a non-finite state."""

    def __init__(self, chain, step):
        self.chain = chain
        self.step = step
        super().__init__(f"non-finite state in chain {chain} at step {step}")


class NormDrift(QWLecamError, ArithmeticError):
    """Walk amplitudes lost unitarity beyond round-off."""


class SupportMismatch(QWLecamError, ValueError):
    """Two distributions or a kernel do not share an aligned support."""


class DivergentLog(QWLecamError, ArithmeticError):
    """log(dp/dq) requested where q vanishes but p does not."""


class SizeCap(QWLecamError, ValueError):
    """LP instance larger than the dense-solver cap."""
