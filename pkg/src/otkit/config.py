"""Central numeric tolerances.

Every validation threshold used across the package is collected here so that
test suites and applications can tighten or relax them in one place.  The two
levels have distinct roles: ``marginal`` guards constraint satisfaction of
computed objects (coupling marginals, dual feasibility), while ``equality``
guards identities that hold up to floating point rounding only (weight
normalization, atom coincidence, zero-sum checks).
"""

from dataclasses import dataclass

__all__ = ["Tolerances", "DEFAULT_TOLERANCES"]


@dataclass(frozen=True)
class Tolerances:
    """Package-wide numeric tolerances.

    Attributes
    ----------
    marginal : float
        Allowed absolute defect in coupling marginals and dual feasibility.
    equality : float
        Allowed rounding slack in identities that are exact in real
        arithmetic: probability normalization, coincidence of atoms,
        zero-sum of signed masses.
    """

    marginal: float = 1e-9
    equality: float = 1e-12


DEFAULT_TOLERANCES = Tolerances()
