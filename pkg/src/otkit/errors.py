"""Exception types shared across the package.

Two broad families matter to callers: ``ValidationError`` for inputs that
violate a documented precondition (bad shapes, negative weights, infeasible
potentials, CFL violations), and ``ConvergenceError`` for iterative solvers
that exhaust their budget without meeting their tolerance.  The command line
front end maps the first family to exit code 2 and the second to exit code 3.
"""

__all__ = [
    "OTError",
    "ValidationError",
    "MetricAxiomError",
    "InfeasiblePotentialsError",
    "NoSupportError",
    "CFLViolationError",
    "VanishingDensityError",
    "UnbalancedError",
    "ConvergenceError",
]


class OTError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(OTError, ValueError):
    """An input violates a documented precondition."""


class MetricAxiomError(ValidationError):
    """A claimed distance matrix fails a metric axiom.

    Attributes
    ----------
    axiom : str
        Which axiom failed: "symmetry", "zero_diagonal", "nonnegativity",
        or "triangle".
    witness : tuple
        Index tuple exhibiting the violation ((i, j) or (i, k, j)).
    """

    def __init__(self, axiom, witness, detail=""):
        self.axiom = axiom
        self.witness = tuple(witness)
        msg = f"metric axiom '{axiom}' violated at indices {self.witness}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class InfeasiblePotentialsError(ValidationError):
    """Dual potentials violate f_i + g_j <= C_ij beyond tolerance.

    Attributes
    ----------
    witness : tuple[int, int]
        Entry (i, j) with the largest violation.
    violation : float
        Magnitude of f_i + g_j - C_ij at the witness.
    """

    def __init__(self, witness, violation):
        self.witness = tuple(witness)
        self.violation = float(violation)
        super().__init__(
            f"potentials infeasible at (i, j) = {self.witness}: "
            f"f_i + g_j - C_ij = {self.violation:.3e} > 0"
        )


class NoSupportError(ValidationError):
    """A query point has no path atoms within the matching bandwidth."""


class CFLViolationError(ValidationError):
    """Requested diffusion time step exceeds the parabolic stability limit."""


class VanishingDensityError(ValidationError):
    """A velocity reconstruction was requested where the density vanishes."""


class UnbalancedError(ValidationError):
    """Signed masses or graph imbalances do not cancel as required."""


class ConvergenceError(OTError, RuntimeError):
    """An iterative solver exhausted its budget without converging."""
