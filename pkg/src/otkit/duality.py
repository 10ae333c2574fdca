"""Kantorovich duality: potentials, c-transforms, gaps, semi-dual energy.

The sign conventions are fixed throughout the package: a potential pair
``(f, g)`` is feasible for the cost ``C`` when ``f_i + g_j <= C_ij``, the
dual objective is ``<f, a> + <g, b>``, and the two partial minimizations

    c_transform(g, C)_i     = min_j C_ij - g_j        (target -> source)
    c_bar_transform(f, C)_j = min_i C_ij - f_i        (source -> target)

produce the tightest feasible completion of one side given the other.
Because both transforms are pure min/subtract reductions, identities such
as ``c_bar(c(c_bar(f))) == c_bar(f)`` hold exactly in floating point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import InfeasiblePotentialsError, ValidationError
from .measures import DiscreteMeasure, GridDensity1D

__all__ = [
    "DualPotentials",
    "c_transform",
    "c_bar_transform",
    "dual_objective",
    "check_feasibility",
    "duality_gap",
    "semi_dual_energy",
    "BrenierReport",
    "w2_brenier_check",
]


@dataclass(frozen=True)
class DualPotentials:
    """A pair of dual potentials, optionally attached to a regularization.

    ``epsilon == 0`` marks potentials for the unregularized problem, where
    feasibility ``f_i + g_j <= C_ij`` is meaningful; entropic potentials
    carry their epsilon instead.
    """

    f: np.ndarray
    g: np.ndarray
    epsilon: float = 0.0

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if f.ndim != 1 or g.ndim != 1:
            raise ValidationError("potentials must be 1-D arrays")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
            raise ValidationError("potentials contain non-finite values")
        if not self.epsilon >= 0.0:
            raise ValidationError("epsilon must be nonnegative")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)


def c_transform(g, C):
    """Tightest source potential for a given target potential.

    ``f_i = min_j C_ij - g_j``.
    """
    g = np.asarray(g, dtype=float)
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or g.shape != (C.shape[1],):
        raise ValidationError(
            f"expected g of length {C.shape[1] if C.ndim == 2 else '?'}, "
            f"got shape {g.shape}"
        )
    return np.min(C - g[None, :], axis=1)


def c_bar_transform(f, C):
    """Tightest target potential for a given source potential.

    ``g_j = min_i C_ij - f_i``.
    """
    f = np.asarray(f, dtype=float)
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or f.shape != (C.shape[0],):
        raise ValidationError(
            f"expected f of length {C.shape[0] if C.ndim == 2 else '?'}, "
            f"got shape {f.shape}"
        )
    return np.min(C - f[:, None], axis=0)


def dual_objective(a, b, potentials: DualPotentials) -> float:
    """Dual value <f, a> + <g, b>."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != potentials.f.shape or b.shape != potentials.g.shape:
        raise ValidationError("marginal and potential lengths disagree")
    return float(np.dot(potentials.f, a) + np.dot(potentials.g, b))


def check_feasibility(potentials: DualPotentials, C, atol=None,
                      tolerances: Tolerances = DEFAULT_TOLERANCES):
    """Verify ``f_i + g_j <= C_ij`` up to ``atol``.

    Raises
    ------
    InfeasiblePotentialsError
        With the worst-violating entry (i, j) as witness.
    """
    if atol is None:
        atol = tolerances.marginal
    C = np.asarray(C, dtype=float)
    slack = potentials.f[:, None] + potentials.g[None, :] - C
    worst = np.unravel_index(np.argmax(slack), slack.shape)
    violation = float(slack[worst])
    if violation > atol:
        raise InfeasiblePotentialsError(worst, violation)
    return violation


def duality_gap(result, potentials: DualPotentials, C,
                tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Primal cost minus dual value for a transport result.

    The potentials are first checked for feasibility (epsilon must be 0);
    infeasible pairs are rejected with a witness entry.  The returned gap
    is nonnegative up to rounding for any feasible pair, and is ~0 at an
    optimal primal/dual pair.
    """
    if potentials.epsilon != 0.0:
        raise ValidationError("duality_gap applies to unregularized potentials")
    check_feasibility(potentials, C, tolerances=tolerances)
    a = result.coupling.row_marginal
    b = result.coupling.col_marginal
    return float(result.cost) - dual_objective(a, b, potentials)


def semi_dual_energy(f, a, b, C) -> float:
    """Semi-dual value <f, a> + <f^c, b> with f^c the tight completion."""
    f = np.asarray(f, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    g = c_bar_transform(f, C)
    return float(np.dot(f, a) + np.dot(g, b))


@dataclass(frozen=True)
class BrenierReport:
    """Outcome of a 1-D monotone-map check.

    Attributes
    ----------
    monotone : bool
        Whether the candidate map is nondecreasing across the support.
    violation : tuple or None
        Grid interval (x_left, x_right) of the first monotonicity failure.
    pushforward_w1 : float
        W1 distance between the mapped source and the target.
    threshold : float
        Largest grid cell width; the pushforward must match within it.
    passed : bool
    """

    monotone: bool
    violation: tuple | None
    pushforward_w1: float
    threshold: float
    passed: bool


def w2_brenier_check(source: GridDensity1D, target, transport_map,
                     monotonicity_atol=None,
                     tolerances: Tolerances = DEFAULT_TOLERANCES) -> BrenierReport:
    """Check that a candidate 1-D map is monotone and pushes source to target.

    The source density is discretized to cell-midpoint atoms (trapezoid
    masses), the map is applied, and the image is compared to the target in
    W1.  A map optimal for the squared cost must be nondecreasing on the
    support and reproduce the target up to the grid resolution.

    Parameters
    ----------
    source : GridDensity1D
        Probability density on a 1-D grid.
    target : DiscreteMeasure or GridDensity1D
        Probability measure the map should reach.
    transport_map : callable
        Vectorized map from positions to positions.
    """
    from .exact import w1_1d_cdf

    if monotonicity_atol is None:
        monotonicity_atol = tolerances.equality
    if abs(source.total_mass - 1.0) > tolerances.marginal:
        raise ValidationError("source must be a probability density")
    atoms = source.to_discrete()
    keep = atoms.weights > 0
    src = DiscreteMeasure(atoms.points[keep], atoms.weights[keep], tolerances)

    mapped = np.asarray(transport_map(src.points[:, 0]), dtype=float)
    if mapped.shape != (src.n,):
        raise ValidationError("transport map must return one value per input")
    diffs = np.diff(mapped)
    bad = np.flatnonzero(diffs < -monotonicity_atol)
    monotone = bad.size == 0
    violation = None
    if not monotone:
        k = int(bad[0])
        violation = (float(src.points[k, 0]), float(src.points[k + 1, 0]))

    image = DiscreteMeasure(mapped, src.weights, tolerances).normalized()
    if isinstance(target, GridDensity1D):
        target_atoms = target.to_discrete().normalized()
    elif isinstance(target, DiscreteMeasure):
        target_atoms = target.normalized()
    else:
        raise ValidationError(f"unsupported target type {type(target).__name__}")
    w1 = w1_1d_cdf(image, target_atoms)
    threshold = float(np.max(source.cell_widths))
    return BrenierReport(
        monotone=monotone,
        violation=violation,
        pushforward_w1=w1,
        threshold=threshold,
        passed=bool(monotone and w1 <= threshold),
    )
