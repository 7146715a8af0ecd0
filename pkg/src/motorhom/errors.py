"""Exception hierarchy.

Validation errors (bad input, violated preconditions) derive from
:class:`ValidationError`; numerical failures of a solver derive from
:class:`SolverError`.  The CLI maps the two families to distinct exit codes.
"""

from __future__ import annotations


class MotorhomError(Exception):
    """Base class for all package errors."""


class ValidationError(MotorhomError, ValueError):
    pass


class SolverError(MotorhomError, RuntimeError):
    pass


class InvalidField(ValidationError):
    pass


class NonPositiveRate(ValidationError):
    pass


class InvalidGrid(ValidationError):
    pass


class InvalidMass(ValidationError):
    pass


class DomainTooSmall(ValidationError):
    pass


class WindowOverlap(ValidationError):
    pass


class SpecFileError(ValidationError):
    pass


class PecletViolation(SolverError):
    """Central differences lose monotonicity; ``n_required`` is the smallest even grid that works."""

    def __init__(self, n_required: int, peclet: float, n: int):
        self.n_required = n_required
        self.peclet = peclet
        self.n = n
        super().__init__(
            f"grid Peclet number {peclet:.3g} >= 2 at N={n}; need N >= {n_required}"
        )


class NoConvergence(SolverError):
    def __init__(self, iterations: int, detail: str = ""):
        self.iterations = iterations
        msg = f"no convergence after {iterations} iterations"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class NonPositiveEigenvector(SolverError):
    pass


class EigenvalueMismatch(SolverError):
    pass


class DegeneratePairing(SolverError):
    pass


class BracketFailure(SolverError):
    pass


class CflViolation(SolverError):
    def __init__(self, dt: float, dt_max: float):
        self.dt = dt
        self.dt_max = dt_max
        super().__init__(f"dt={dt:.6g} exceeds the upwind CFL limit dt_max={dt_max:.6g}")


class NonFiniteState(SolverError):
    pass


class InconclusiveFit(SolverError):
    pass


class SnapshotMissing(SolverError):
    pass
