"""Exception types shared across the package."""


class PrioqpError(Exception):
    """Base class for all package errors."""


# --- plant / kinematics ---

class SingularInertia(PrioqpError):
    """Inertia matrix factorization failed (bad plant parameters)."""


class UnknownFrame(PrioqpError):
    """Task point refers to a frame the plant does not have."""


class InvalidPlant(PrioqpError):
    """Plant parameters violate their invariants (masses, lengths, ...)."""


# --- tasks ---

class NonUnitQuaternion(PrioqpError):
    """Quaternion input is not unit-norm within tolerance."""


class DegenerateDistance(PrioqpError):
    """Task point coincides with the obstacle center; gradient undefined."""


class InvalidLimits(PrioqpError):
    """Joint limits do not satisfy min < max elementwise."""


class SingularBBt(PrioqpError):
    """B*B^T numerically singular; actuation-measure gradient degenerates."""


# --- clf / cbf ---

class InvalidEps(PrioqpError):
    """CLF rate parameter must be positive."""


class NoStabilizingSolution(PrioqpError):
    """Riccati iteration failed to produce a stabilizing solution."""


class NotHurwitz(PrioqpError):
    """Barrier gain does not place all closed-loop poles in the open left half plane."""


class DimensionMismatch(PrioqpError):
    """Constraint-row data does not match the task/function dimensions."""


# --- qp ---

class IllConditioned(PrioqpError):
    """QP factorization failed even after regularization."""


class TooManyRows(PrioqpError):
    """Brute-force oracle refuses problems with too many inequality rows."""


# --- sim / cli ---

class UnknownQuantity(PrioqpError):
    """Requested log quantity does not exist."""


class UnsafeInitialState(PrioqpError):
    """Initial state violates a set-based task (h(x0) < 0)."""


class NumericalBlowup(PrioqpError):
    """State norm exceeded the blowup threshold; run aborted."""


class ParseError(PrioqpError):
    """Scenario file is not well-formed."""


class ValidationError(PrioqpError):
    """Scenario parsed but violates semantic rules."""
