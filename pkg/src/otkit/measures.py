"""Discrete measures, 1-D grid densities, cost matrices, and couplings.

This module owns the basic objects every solver consumes: weighted point
clouds (`DiscreteMeasure`), piecewise-linear densities on 1-D grids
(`GridDensity1D`), ground cost constructors (`CostSpec`,
`build_cost_matrix`), and validated transport plans (`Coupling`).  It also
provides the measure-level operations that are purely combinatorial:
pushforward under a map, cdf/quantile construction, product couplings, and
the gluing of two plans that share a middle marginal.

File formats
------------
Point measures travel as JSON ``{"points": [[...], ...], "weights": [...]}``
or as CSV with one row per atom and the weight in the last column.  Grid
densities travel as JSON ``{"grid": [...], "density": [...]}``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import ValidationError

__all__ = [
    "DiscreteMeasure",
    "GridDensity1D",
    "CostSpec",
    "Coupling",
    "build_cost_matrix",
    "normalize",
    "pushforward",
    "cdf_and_quantile",
    "product_coupling",
    "glue",
    "align_supports",
    "save_measure_json",
    "load_measure_json",
    "load_measure_csv",
    "save_grid_json",
    "load_grid_json",
]


def _as_points(points):
    """Coerce input to a float array of shape (n, d)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ValidationError(f"points must be 1-D or 2-D, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValidationError("points contain non-finite values")
    return pts


def _as_weights(weights, n=None):
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1:
        raise ValidationError(f"weights must be 1-D, got shape {w.shape}")
    if n is not None and w.shape[0] != n:
        raise ValidationError(f"expected {n} weights, got {w.shape[0]}")
    if not np.all(np.isfinite(w)):
        raise ValidationError("weights contain non-finite values")
    if np.any(w < 0):
        raise ValidationError("weights must be nonnegative")
    return w


class DiscreteMeasure:
    """A nonnegative measure ``sum_i a_i * delta_{x_i}`` on R^d.

    Parameters
    ----------
    points : array_like, shape (n, d) or (n,)
        Atom locations; a 1-D array is treated as n points in R^1.
    weights : array_like, shape (n,)
        Nonnegative atom masses.
    tolerances : Tolerances, optional
        Numeric thresholds used in validation.

    Notes
    -----
    Weights are stored as given; use :meth:`normalized` to obtain the
    probability measure with the same atoms.  ``is_probability`` checks
    the total mass against the ``equality`` tolerance.
    """

    def __init__(self, points, weights, tolerances: Tolerances = DEFAULT_TOLERANCES):
        self.points = _as_points(points)
        self.weights = _as_weights(weights, n=self.points.shape[0])
        self.tolerances = tolerances

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    @property
    def is_probability(self) -> bool:
        return abs(self.total_mass - 1.0) <= self.tolerances.equality

    def normalized(self) -> "DiscreteMeasure":
        """Return the probability measure with the same atoms.

        Raises
        ------
        ValidationError
            If the total mass is zero.
        """
        total = self.total_mass
        if total <= 0.0:
            raise ValidationError("cannot normalize a measure with zero total mass")
        return DiscreteMeasure(self.points, self.weights / total, self.tolerances)

    def require_probability(self, atol=None):
        """Raise unless the total mass is 1 within ``atol``."""
        if atol is None:
            atol = self.tolerances.equality
        if abs(self.total_mass - 1.0) > atol:
            raise ValidationError(
                f"measure is not a probability: total mass {self.total_mass!r}"
            )
        return self

    def sorted_1d(self) -> "DiscreteMeasure":
        """Return a copy with atoms sorted by position (1-D only)."""
        if self.dim != 1:
            raise ValidationError("sorted_1d requires 1-D support")
        order = np.argsort(self.points[:, 0], kind="stable")
        return DiscreteMeasure(self.points[order], self.weights[order], self.tolerances)

    def __repr__(self):
        return (
            f"DiscreteMeasure(n={self.n}, dim={self.dim}, "
            f"total_mass={self.total_mass:.6g})"
        )


class GridDensity1D:
    """A density sampled at the nodes of a strictly increasing 1-D grid.

    Cell masses are obtained by the trapezoid rule,
    ``m_c = (rho_c + rho_{c+1}) / 2 * (x_{c+1} - x_c)``, and the cdf is the
    piecewise-linear interpolant of the cumulative cell masses, which
    amounts to spreading each cell's mass uniformly inside the cell.

    Parameters
    ----------
    grid : array_like, shape (N,)
        Strictly increasing node positions, N >= 2.
    density : array_like, shape (N,)
        Nonnegative density values at the nodes.
    """

    def __init__(self, grid, density, tolerances: Tolerances = DEFAULT_TOLERANCES):
        grid = np.asarray(grid, dtype=float)
        density = np.asarray(density, dtype=float)
        if grid.ndim != 1 or grid.shape[0] < 2:
            raise ValidationError("grid must be 1-D with at least two nodes")
        if density.shape != grid.shape:
            raise ValidationError(
                f"density shape {density.shape} does not match grid {grid.shape}"
            )
        if not np.all(np.isfinite(grid)) or not np.all(np.isfinite(density)):
            raise ValidationError("grid or density contains non-finite values")
        if np.any(np.diff(grid) <= 0):
            raise ValidationError("grid must be strictly increasing")
        if np.any(density < 0):
            raise ValidationError("density must be nonnegative")
        self.grid = grid
        self.density = density
        self.tolerances = tolerances

    @property
    def n_nodes(self) -> int:
        return self.grid.shape[0]

    @property
    def cell_widths(self) -> np.ndarray:
        return np.diff(self.grid)

    @property
    def cell_masses(self) -> np.ndarray:
        rho = self.density
        return 0.5 * (rho[:-1] + rho[1:]) * self.cell_widths

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.cell_masses))

    def node_cdf(self) -> np.ndarray:
        """Cumulative mass at each node, starting at 0."""
        out = np.empty(self.n_nodes)
        out[0] = 0.0
        np.cumsum(self.cell_masses, out=out[1:])
        return out

    def normalized(self) -> "GridDensity1D":
        total = self.total_mass
        if total <= 0.0:
            raise ValidationError("cannot normalize a density with zero total mass")
        return GridDensity1D(self.grid, self.density / total, self.tolerances)

    def to_discrete(self) -> DiscreteMeasure:
        """Collapse each cell's mass to an atom at the cell midpoint."""
        mids = 0.5 * (self.grid[:-1] + self.grid[1:])
        return DiscreteMeasure(mids, self.cell_masses, self.tolerances)

    def __repr__(self):
        return (
            f"GridDensity1D(n_nodes={self.n_nodes}, "
            f"range=({self.grid[0]:.6g}, {self.grid[-1]:.6g}), "
            f"total_mass={self.total_mass:.6g})"
        )


_COST_KINDS = ("sq_euclidean", "euclidean", "p_power", "zero_one", "explicit_matrix")


@dataclass(frozen=True, eq=False)
class CostSpec:
    """Ground cost description used by `build_cost_matrix`.

    Kinds: ``sq_euclidean`` |x-y|^2, ``euclidean`` |x-y|, ``p_power``
    |x-y|^p with p >= 1, ``zero_one`` (0 iff the points coincide), and
    ``explicit_matrix`` with a user-provided cost table.
    """

    kind: str
    p: float | None = None
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in _COST_KINDS:
            raise ValidationError(
                f"unknown cost kind {self.kind!r}; expected one of {_COST_KINDS}"
            )
        if self.kind == "p_power":
            if self.p is None or not np.isfinite(self.p) or self.p < 1:
                raise ValidationError("p_power cost requires finite p >= 1")
        if self.kind == "explicit_matrix":
            if self.matrix is None:
                raise ValidationError("explicit_matrix cost requires a matrix")
            m = np.asarray(self.matrix, dtype=float)
            if m.ndim != 2 or not np.all(np.isfinite(m)):
                raise ValidationError("explicit cost matrix must be 2-D and finite")
            object.__setattr__(self, "matrix", m)

    @classmethod
    def sq_euclidean(cls):
        return cls("sq_euclidean")

    @classmethod
    def euclidean(cls):
        return cls("euclidean")

    @classmethod
    def p_power(cls, p):
        return cls("p_power", p=float(p))

    @classmethod
    def zero_one(cls):
        return cls("zero_one")

    @classmethod
    def explicit(cls, matrix):
        return cls("explicit_matrix", matrix=matrix)


def _points_of(obj):
    if isinstance(obj, DiscreteMeasure):
        return obj.points
    return _as_points(obj)


def build_cost_matrix(alpha, beta, spec: CostSpec,
                      tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Evaluate the ground cost between the supports of two measures.

    Parameters
    ----------
    alpha, beta : DiscreteMeasure or array_like
        Measures or raw point arrays of shapes (n, d) and (m, d).
    spec : CostSpec
        Which cost to evaluate.

    Returns
    -------
    numpy.ndarray, shape (n, m)
    """
    x = _points_of(alpha)
    y = _points_of(beta)
    if spec.kind == "explicit_matrix":
        m = spec.matrix
        if m.shape != (x.shape[0], y.shape[0]):
            raise ValidationError(
                f"explicit cost matrix shape {m.shape} does not match "
                f"supports ({x.shape[0]}, {y.shape[0]})"
            )
        return m.copy()
    if x.shape[1] != y.shape[1]:
        raise ValidationError(
            f"point dimensions differ: {x.shape[1]} vs {y.shape[1]}"
        )
    if spec.kind == "sq_euclidean":
        return cdist(x, y, "sqeuclidean")
    if spec.kind == "euclidean":
        return cdist(x, y, "euclidean")
    if spec.kind == "p_power":
        return cdist(x, y, "euclidean") ** spec.p
    # zero_one: points are "equal" when they coincide in sup norm within
    # the equality tolerance.
    return (cdist(x, y, "chebyshev") > tolerances.equality).astype(float)


class Coupling:
    """A validated transport plan between two weight vectors.

    Parameters
    ----------
    plan : array_like, shape (n, m)
        Nonnegative joint weights.
    row_marginal, col_marginal : array_like
        The marginals the plan is required to match.
    atol : float, optional
        Allowed entrywise marginal defect; defaults to the ``marginal``
        tolerance.  Solvers that converge to a looser criterion pass their
        own achieved tolerance.

    Notes
    -----
    Entries in ``[-equality_tol, 0)`` are clamped to zero; anything more
    negative is rejected.
    """

    def __init__(self, plan, row_marginal, col_marginal, atol=None,
                 tolerances: Tolerances = DEFAULT_TOLERANCES):
        plan = np.asarray(plan, dtype=float)
        row = np.asarray(row_marginal, dtype=float)
        col = np.asarray(col_marginal, dtype=float)
        if plan.ndim != 2:
            raise ValidationError(f"plan must be 2-D, got shape {plan.shape}")
        if plan.shape != (row.shape[0], col.shape[0]):
            raise ValidationError(
                f"plan shape {plan.shape} does not match marginals "
                f"({row.shape[0]}, {col.shape[0]})"
            )
        if not np.all(np.isfinite(plan)):
            raise ValidationError("plan contains non-finite values")
        lowest = plan.min(initial=0.0)
        if lowest < -tolerances.equality:
            raise ValidationError(f"plan has negative entry {lowest!r}")
        if lowest < 0.0:
            plan = np.maximum(plan, 0.0)
        if atol is None:
            atol = tolerances.marginal
        row_defect = float(np.max(np.abs(plan.sum(axis=1) - row), initial=0.0))
        col_defect = float(np.max(np.abs(plan.sum(axis=0) - col), initial=0.0))
        if row_defect > atol or col_defect > atol:
            raise ValidationError(
                f"plan marginals deviate by ({row_defect:.3e}, {col_defect:.3e}), "
                f"allowed {atol:.3e}"
            )
        self.plan = plan
        self.row_marginal = row
        self.col_marginal = col
        self.atol = float(atol)
        self.tolerances = tolerances

    @property
    def shape(self):
        return self.plan.shape

    def cost(self, cost_matrix) -> float:
        """Total transport cost <C, P>."""
        C = np.asarray(cost_matrix, dtype=float)
        if C.shape != self.plan.shape:
            raise ValidationError(
                f"cost matrix shape {C.shape} does not match plan {self.plan.shape}"
            )
        return float(np.sum(self.plan * C))

    def support(self, threshold=0.0):
        """Indices (i, j) of entries strictly above ``threshold``."""
        return np.argwhere(self.plan > threshold)

    def __repr__(self):
        nnz = int(np.count_nonzero(self.plan))
        return f"Coupling(shape={self.plan.shape}, nnz={nnz})"


def normalize(measure):
    """Return the probability-normalized copy of a measure or grid density."""
    return measure.normalized()


def _weights_of(obj):
    if isinstance(obj, DiscreteMeasure):
        return obj.weights
    w = np.asarray(obj, dtype=float)
    if w.ndim != 1:
        raise ValidationError("expected a DiscreteMeasure or a 1-D weight array")
    return w


def product_coupling(alpha, beta, tolerances: Tolerances = DEFAULT_TOLERANCES) -> Coupling:
    """The independent coupling a (x) b of two probability vectors."""
    a = _weights_of(alpha)
    b = _weights_of(beta)
    for name, w in (("alpha", a), ("beta", b)):
        if abs(float(np.sum(w)) - 1.0) > tolerances.marginal:
            raise ValidationError(f"{name} must be a probability vector")
    return Coupling(np.outer(a, b), a, b, tolerances=tolerances)


def glue(P: Coupling, Q: Coupling, tolerances: Tolerances = DEFAULT_TOLERANCES):
    """Glue two couplings along their shared middle marginal.

    Given P between (a, b) and Q between (b, c), forms the three-way
    array ``S[i, j, k] = P[i, j] * Q[j, k] / b[j]`` (zero where b
    vanishes) and the composed coupling ``R = sum_j S[:, j, :]`` between
    (a, c).

    Returns
    -------
    (numpy.ndarray, Coupling)
        The (n, k, m) gluing and the composed plan.
    """
    b_left = P.plan.sum(axis=0)
    b_right = Q.plan.sum(axis=1)
    if b_left.shape != b_right.shape:
        raise ValidationError(
            f"middle marginals have different sizes: "
            f"{b_left.shape[0]} vs {b_right.shape[0]}"
        )
    defect = float(np.max(np.abs(b_left - b_right), initial=0.0))
    if defect > tolerances.marginal:
        raise ValidationError(
            f"middle marginals disagree by {defect:.3e}, "
            f"allowed {tolerances.marginal:.3e}"
        )
    b = b_left
    inv_b = np.zeros_like(b)
    positive = b > 0
    inv_b[positive] = 1.0 / b[positive]
    S = P.plan[:, :, None] * Q.plan[None, :, :] * inv_b[None, :, None]
    R = S.sum(axis=1)
    a = P.plan.sum(axis=1)
    c = Q.plan.sum(axis=0)
    # Gluing compounds the marginal defects of both inputs.
    atol = max(P.atol + Q.atol, tolerances.marginal)
    return S, Coupling(R, a, c, atol=atol, tolerances=tolerances)


def _merge_close_points(points, weights, tol):
    """Merge atoms whose positions coincide within ``tol`` in sup norm.

    Points are sorted lexicographically; each point is compared with the
    representative (first member) of the current group.  Returns sorted
    merged points and accumulated weights, plus the group index of each
    input atom (in sorted order positions).
    """
    n = points.shape[0]
    if n == 0:
        return points, weights, np.zeros(0, dtype=int), np.zeros(n, dtype=int)
    order = np.lexsort(points.T[::-1])
    pts = points[order]
    wts = weights[order]
    group = np.empty(n, dtype=int)
    rep_rows = [0]
    group[0] = 0
    for i in range(1, n):
        rep = pts[rep_rows[-1]]
        if np.max(np.abs(pts[i] - rep)) <= tol:
            group[i] = len(rep_rows) - 1
        else:
            rep_rows.append(i)
            group[i] = len(rep_rows) - 1
    merged_points = pts[np.asarray(rep_rows)]
    merged_weights = np.zeros(len(rep_rows))
    np.add.at(merged_weights, group, wts)
    # Map original atom index -> group index.
    group_of_original = np.empty(n, dtype=int)
    group_of_original[order] = group
    return merged_points, merged_weights, group_of_original, order


def pushforward(measure: DiscreteMeasure, mapping) -> DiscreteMeasure:
    """Image measure T#a of a discrete measure under a map.

    Parameters
    ----------
    measure : DiscreteMeasure
    mapping : callable
        Either vectorized (accepts an (n, d) array and returns (n, d')) or
        applicable to a single point.

    Notes
    -----
    Output atoms whose images coincide within the ``equality`` tolerance in
    sup norm are merged, and the result is sorted lexicographically by
    position.
    """
    pts = measure.points
    try:
        out = np.asarray(mapping(pts), dtype=float)
        if out.ndim == 1 and out.shape[0] == pts.shape[0]:
            out = out[:, None]
        if out.ndim != 2 or out.shape[0] != pts.shape[0]:
            raise ValueError
    except Exception:
        rows = [np.atleast_1d(np.asarray(mapping(p), dtype=float)) for p in pts]
        out = np.stack(rows, axis=0)
    if not np.all(np.isfinite(out)):
        raise ValidationError("mapping produced non-finite points")
    merged_pts, merged_wts, _, _ = _merge_close_points(
        out, measure.weights, measure.tolerances.equality
    )
    return DiscreteMeasure(merged_pts, merged_wts, measure.tolerances)


def align_supports(alpha: DiscreteMeasure, beta: DiscreteMeasure):
    """Express two measures as weight vectors on their union support.

    Atoms coinciding within the ``equality`` tolerance (sup norm) are
    identified.  Returns ``(points, wa, wb)`` with points sorted
    lexicographically.
    """
    if alpha.dim != beta.dim:
        raise ValidationError("measures live in different dimensions")
    pts = np.vstack([alpha.points, beta.points])
    wts = np.concatenate([alpha.weights, beta.weights])
    tol = alpha.tolerances.equality
    merged_pts, _, group_of_original, _ = _merge_close_points(pts, wts, tol)
    k = merged_pts.shape[0]
    wa = np.zeros(k)
    wb = np.zeros(k)
    na = alpha.n
    np.add.at(wa, group_of_original[:na], alpha.weights)
    np.add.at(wb, group_of_original[na:], beta.weights)
    return merged_pts, wa, wb


def cdf_and_quantile(measure):
    """Build the cdf and its generalized inverse for a 1-D measure.

    For a `DiscreteMeasure`, the cdf is the right-continuous step function
    ``F(x) = sum of weights of atoms <= x`` and the quantile follows the
    minimum convention ``Q(r) = min{x : F(x) >= r}`` for r in (0, 1].
    For a `GridDensity1D`, the cdf is piecewise linear and the quantile is
    its inverse, with exact ties across zero-mass cells resolved at the
    midpoint of the flat interval.

    Parameters
    ----------
    measure : DiscreteMeasure or GridDensity1D
        Must be a probability measure (total mass 1 within the marginal
        tolerance).

    Returns
    -------
    (cdf, quantile)
        Two vectorized callables.
    """
    tol = measure.tolerances
    if abs(measure.total_mass - 1.0) > tol.marginal:
        raise ValidationError(
            f"cdf requires a probability measure, total mass {measure.total_mass!r}"
        )
    if isinstance(measure, DiscreteMeasure):
        if measure.dim != 1:
            raise ValidationError("cdf_and_quantile requires 1-D support")
        pts, wts, _, _ = _merge_close_points(
            measure.points, measure.weights, tol.equality
        )
        xs = pts[:, 0]
        cum = np.cumsum(wts)

        def cdf(x):
            x = np.asarray(x, dtype=float)
            idx = np.searchsorted(xs, x, side="right")
            vals = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
            return vals if vals.ndim else float(vals)

        def quantile(r):
            r = np.asarray(r, dtype=float)
            idx = np.minimum(np.searchsorted(cum, r, side="left"), xs.shape[0] - 1)
            vals = xs[idx]
            return vals if vals.ndim else float(vals)

        return cdf, quantile

    if isinstance(measure, GridDensity1D):
        grid = measure.grid
        F = measure.node_cdf()

        def cdf(x):
            x = np.asarray(x, dtype=float)
            vals = np.interp(x, grid, F)
            return vals if vals.ndim else float(vals)

        def quantile(r):
            r = np.asarray(r, dtype=float)
            scalar = r.ndim == 0
            rr = np.clip(np.atleast_1d(r), 0.0, F[-1])
            j = np.searchsorted(F, rr, side="left")
            j = np.minimum(j, F.shape[0] - 1)
            # Last node with F <= r; j..j_hi is the flat run when F[j] == r.
            j_hi = np.maximum(np.searchsorted(F, rr, side="right") - 1, 0)
            exact = F[j] == rr
            flat_mid = 0.5 * (grid[j] + grid[j_hi])
            lo = np.maximum(j - 1, 0)
            denom = F[j] - F[lo]
            safe = np.where(denom > 0, denom, 1.0)
            t = (rr - F[lo]) / safe
            interp = grid[lo] + t * (grid[j] - grid[lo])
            vals = np.where(exact, flat_mid, np.where(j == 0, grid[0], interp))
            vals = vals if not scalar else float(vals[0])
            return vals

        return cdf, quantile

    raise ValidationError(f"unsupported measure type {type(measure).__name__}")


def save_measure_json(measure: DiscreteMeasure, path):
    payload = {
        "points": measure.points.tolist(),
        "weights": measure.weights.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def measure_from_dict(payload) -> DiscreteMeasure:
    try:
        points = payload["points"]
        weights = payload["weights"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(
            "measure JSON must contain 'points' and 'weights'"
        ) from exc
    return DiscreteMeasure(points, weights)


def load_measure_json(path) -> DiscreteMeasure:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return measure_from_dict(payload)


def load_measure_csv(path) -> DiscreteMeasure:
    """Read atoms from CSV; each row is x_1, ..., x_d, weight."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for record in csv.reader(fh):
            if not record or all(not cell.strip() for cell in record):
                continue
            try:
                rows.append([float(cell) for cell in record])
            except ValueError as exc:
                raise ValidationError(f"non-numeric CSV cell in row {record}") from exc
    if not rows:
        raise ValidationError("CSV measure file is empty")
    width = len(rows[0])
    if width < 2 or any(len(r) != width for r in rows):
        raise ValidationError("CSV rows must all have d coordinates plus a weight")
    data = np.asarray(rows, dtype=float)
    return DiscreteMeasure(data[:, :-1], data[:, -1])


def save_grid_json(density: GridDensity1D, path):
    payload = {"grid": density.grid.tolist(), "density": density.density.tolist()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def grid_from_dict(payload) -> GridDensity1D:
    try:
        grid = payload["grid"]
        density = payload["density"]
    except (KeyError, TypeError) as exc:
        raise ValidationError("grid JSON must contain 'grid' and 'density'") from exc
    return GridDensity1D(grid, density)


def load_grid_json(path) -> GridDensity1D:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return grid_from_dict(payload)
