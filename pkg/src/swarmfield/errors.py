"""Exception and warning types shared across the package."""

from __future__ import annotations


class SwarmfieldError(Exception):
    """Base class for all package-specific errors."""


class DensityFloorError(SwarmfieldError):
    """A controller division by the density hit the safety floor.

    Attributes:
        cell: flat index of the offending cell.
        value: the density value found there.
    """

    def __init__(self, cell: int, value: float, floor: float):
        self.cell = cell
        self.value = value
        self.floor = floor
        super().__init__(
            f"density {value:.3e} at cell {cell} is below the floor {floor:.1e}"
        )


class NonFiniteStateError(SwarmfieldError):
    """The evolving density became NaN or infinite.

    Carries the partial trajectory accumulated before the blow-up in
    ``trajectory`` (may be None when raised outside simulate).
    """

    def __init__(self, message: str, trajectory=None):
        self.trajectory = trajectory
        super().__init__(message)


class PositivityLossWarning(UserWarning):
    """A density update produced negative cells (recorded, not fatal)."""


class MassMismatchError(SwarmfieldError):
    """Two fields that must carry equal mass do not."""


class SolverStallError(SwarmfieldError):
    """The exact transport solver failed to certify optimality."""


class NoConvergenceError(SwarmfieldError):
    """An iterative solver exhausted its budget above tolerance."""


class NotZeroMeanError(SwarmfieldError):
    """An operation requiring a zero-mean field received one with mass."""


class SolverDivergedError(SwarmfieldError):
    """An iterative linear solve diverged or broke down."""


class ViolationError(SwarmfieldError):
    """A certified inequality failed beyond tolerance.

    Attributes:
        lhs, rhs: the two sides of the inequality as evaluated.
    """

    def __init__(self, message: str, lhs: float, rhs: float):
        self.lhs = lhs
        self.rhs = rhs
        super().__init__(f"{message}: lhs={lhs:.6e} rhs={rhs:.6e}")


class NotAFixedPointError(SwarmfieldError):
    """The reference density is not stationary for the given controller."""

    def __init__(self, residual: float, tol: float):
        self.residual = residual
        self.tol = tol
        super().__init__(
            f"reference density is not a fixed point: residual {residual:.3e} > {tol:.1e}"
        )


class FlowEscapeError(SwarmfieldError):
    """Characteristics left the domain by more than the clamp tolerance."""


class CrossCheckFailureError(SwarmfieldError):
    """Two independent computations of the same quantity disagree."""

    def __init__(self, message: str, mismatch: float, tol: float):
        self.mismatch = mismatch
        self.tol = tol
        super().__init__(f"{message}: mismatch {mismatch:.3e} > {tol:.1e}")


class NotInvariantError(SwarmfieldError):
    """The reference density is not invariant under the given field."""


class WindowEmptyError(SwarmfieldError):
    """A fit window selects fewer than two usable samples."""


class UnsupportedTransformError(SwarmfieldError):
    """The symmetry transform is outside the supported group."""


class SchemaError(SwarmfieldError):
    """A scenario document violates the schema.

    Attributes:
        path: dotted path to the offending key.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class InitializerUnknownError(SchemaError):
    """A scenario names an initializer, field, or controller not in the catalog."""
