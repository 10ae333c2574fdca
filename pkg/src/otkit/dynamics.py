"""Evolutions of measures: particle flows, 1-D diffusion, flow matching.

Particle flows discretize gradient flows of functionals evaluated on the
uniform empirical measure alpha = (1/n) sum_i delta_{x_i}.  The supported
kinds and their per-particle velocities are

    linear       f(alpha) = int h dalpha              v_i = -(1/n) grad h(x_i)
    interaction  f(alpha) = iint k d(alpha x alpha)   v_i = -(2/n) sum_j grad_1 k(x_i, x_j)
    mlp_risk     two-layer regression risk            v_i = -grad_{theta_i} F

Grid flows solve the nonlinear diffusion d/dt rho = Lap(gtilde(rho)) with
zero-flux boundaries, where the flux satisfies gtilde'(s) = s g''(s) for a
generalized entropy g (Shannon gives the heat equation).  Flow matching
evaluates the conditional-expectation velocity of a coupling path and
integrates it; `dacorogna_moser_1d` inverts a 1-D density path into the
velocity rho v = -d/dt cumulative(rho).  `transformer_flow` applies a
softmax attention layer as repeated Euler steps of a token transport ODE,
and `mlp_flow` trains a mean-field two-layer network on its neuron
particles.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import (
    CFLViolationError,
    ConvergenceError,
    NoSupportError,
    ValidationError,
    VanishingDensityError,
)
from .measures import Coupling, GridDensity1D

__all__ = [
    "ParticleTrajectory",
    "FunctionalSpec",
    "gradient_flow",
    "GeneralizedEntropy",
    "Density1DPath",
    "entropy_flow_1d",
    "CouplingPath",
    "flow_match_velocity",
    "integrate_flow_match",
    "dacorogna_moser_1d",
    "attention_velocity",
    "transformer_flow",
    "mlp_flow",
]


def _as_point_array(obj):
    pts = np.asarray(obj, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ValidationError(
            f"expected an (n, d) point array, got shape {np.shape(obj)}"
        )
    if not np.all(np.isfinite(pts)):
        raise ValidationError("points contain non-finite values")
    return pts


def _step_count(dt, horizon):
    dt = float(dt)
    horizon = float(horizon)
    if not np.isfinite(dt) or dt <= 0.0:
        raise ValidationError("dt must be positive")
    if not np.isfinite(horizon) or horizon <= 0.0:
        raise ValidationError("the time horizon must be positive")
    steps = int(round(horizon / dt))
    if steps < 1 or abs(steps * dt - horizon) > 1e-8 * max(1.0, horizon):
        raise ValidationError(
            f"horizon {horizon:g} must be an integer multiple of dt={dt:g}"
        )
    return steps


class ParticleTrajectory:
    """Time-sampled positions of a fixed set of weighted particles.

    Parameters
    ----------
    times : array_like, shape (k+1,)
        Strictly increasing sample times.
    states : array_like, shape (k+1, n, d)
        Particle positions at each time.
    weights : array_like, shape (n,)
        Simplex weights shared by every time slice; the flows in this
        module never split or merge particles.
    """

    def __init__(self, times, states, weights):
        times = np.asarray(times, dtype=float)
        states = np.asarray(states, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if times.ndim != 1 or times.shape[0] < 1:
            raise ValidationError("times must be a nonempty 1-D array")
        if np.any(np.diff(times) <= 0):
            raise ValidationError("times must be strictly increasing")
        if states.ndim != 3 or states.shape[0] != times.shape[0]:
            raise ValidationError(
                f"states must have shape (len(times), n, d), got {states.shape}"
            )
        if not np.all(np.isfinite(times)) or not np.all(np.isfinite(states)):
            raise ValidationError("trajectory contains non-finite values")
        if weights.shape != (states.shape[1],) or np.any(weights < 0):
            raise ValidationError("weights must be nonnegative, one per particle")
        if abs(float(weights.sum()) - 1.0) > 1e-9:
            raise ValidationError("weights must sum to 1")
        self.times = times
        self.states = states
        self.weights = weights

    @property
    def n_times(self) -> int:
        return self.times.shape[0]

    @property
    def n_particles(self) -> int:
        return self.states.shape[1]

    @property
    def dim(self) -> int:
        return self.states.shape[2]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def __repr__(self):
        return (
            f"ParticleTrajectory(n_times={self.n_times}, "
            f"n_particles={self.n_particles}, dim={self.dim}, "
            f"T={self.times[-1]:.6g})"
        )


def _check_gradient(fn, grad, probes, label):
    """Compare a user gradient against central differences at probe points."""
    step = 1e-5
    for x in probes:
        x = np.asarray(x, dtype=float)
        g = np.asarray(grad(x), dtype=float)
        if g.shape != x.shape or not np.all(np.isfinite(g)):
            raise ValidationError(
                f"{label}: gradient must return a finite array of shape {x.shape}"
            )
        fd = np.empty_like(x)
        for axis in range(x.size):
            e = np.zeros_like(x)
            e[axis] = step
            fd[axis] = (float(fn(x + e)) - float(fn(x - e))) / (2.0 * step)
        err = float(np.max(np.abs(fd - g)))
        if err > 1e-5 * max(1.0, float(np.max(np.abs(g)))):
            raise ValidationError(
                f"{label}: finite differences disagree with the supplied "
                f"gradient (max deviation {err:.3e})"
            )


_FUNCTIONAL_KINDS = ("linear", "interaction", "mlp_risk")
_ACTIVATIONS = ("identity", "tanh")


class FunctionalSpec:
    """A functional on empirical measures plus its particle velocity field.

    Built through the classmethods `linear`, `interaction`, and
    `mlp_risk`.  `value(X)` evaluates the functional on the uniform
    empirical measure of the particle array X, shape (n, dim), and
    `velocity(X)` returns the flow velocity at each particle.  Supplied
    gradients are checked against central finite differences at
    construction (relative tolerance 1e-5).
    """

    def __init__(self, kind, dim, *, h=None, grad_h=None, k=None, grad_k=None,
                 features=None, labels=None, activation=None):
        if kind not in _FUNCTIONAL_KINDS:
            raise ValidationError(
                f"unknown functional kind {kind!r}; expected one of {_FUNCTIONAL_KINDS}"
            )
        dim = int(dim)
        if dim < 1:
            raise ValidationError("dim must be at least 1")
        self.kind = kind
        self.dim = dim
        self.h = h
        self.grad_h = grad_h
        self.k = k
        self.grad_k = grad_k
        self.features = features
        self.labels = labels
        self.activation = activation

    @classmethod
    def linear(cls, h, grad_h, dim):
        """Potential energy f(alpha) = int h dalpha.

        `h` maps a point (dim,) to a float and `grad_h` to its gradient.
        """
        spec = cls("linear", dim, h=h, grad_h=grad_h)
        probes = np.random.default_rng(0).standard_normal((3, spec.dim))
        _check_gradient(h, grad_h, probes, "linear h")
        return spec

    @classmethod
    def interaction(cls, k, grad_k, dim):
        """Interaction energy f(alpha) = iint k(x, y) dalpha(x) dalpha(y).

        `k` must be symmetric in its two point arguments; `grad_k` is the
        gradient of k in the first argument.
        """
        spec = cls("interaction", dim, k=k, grad_k=grad_k)
        rng = np.random.default_rng(0)
        xs = rng.standard_normal((3, spec.dim))
        ys = rng.standard_normal((3, spec.dim))
        for x, y in zip(xs, ys):
            kxy = float(k(x, y))
            kyx = float(k(y, x))
            if abs(kxy - kyx) > 1e-8 * max(1.0, abs(kxy)):
                raise ValidationError(
                    f"interaction kernel must be symmetric: k(x,y)={kxy:.6g} "
                    f"but k(y,x)={kyx:.6g}"
                )
            _check_gradient(
                lambda z, y=y: k(z, y),
                lambda z, y=y: grad_k(z, y),
                [x],
                "interaction k",
            )
        return spec

    @classmethod
    def mlp_risk(cls, features, labels, activation="identity"):
        """Square-loss risk of a two-layer network with neuron particles.

        A particle theta = (w, a) in R^{d+1} contributes psi(theta, u) =
        a sigma(<w, u>) to the mean prediction G(u) = (1/n) sum_i psi; the
        functional is the empirical risk (1/2N) sum_k (G(u_k) - y_k)^2.
        """
        U = np.asarray(features, dtype=float)
        if U.ndim == 1:
            U = U[:, None]
        y = np.asarray(labels, dtype=float)
        if U.ndim != 2 or U.shape[0] < 1:
            raise ValidationError("features must be an (N, d) array")
        if y.shape != (U.shape[0],):
            raise ValidationError(
                f"labels shape {y.shape} does not match {U.shape[0]} samples"
            )
        if not np.all(np.isfinite(U)) or not np.all(np.isfinite(y)):
            raise ValidationError("features or labels contain non-finite values")
        if activation not in _ACTIVATIONS:
            raise ValidationError(
                f"unknown activation {activation!r}; expected one of {_ACTIVATIONS}"
            )
        return cls("mlp_risk", U.shape[1] + 1, features=U, labels=y,
                   activation=activation)

    def _as_particles(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] != self.dim:
            raise ValidationError(
                f"expected particles of shape (n, {self.dim}), got {X.shape}"
            )
        if not np.all(np.isfinite(X)):
            raise ValidationError("particles contain non-finite values")
        return X

    def _sigma(self, z):
        if self.activation == "identity":
            return z, np.ones_like(z)
        s = np.tanh(z)
        return s, 1.0 - s * s

    def _predictions(self, X):
        W = X[:, :-1]
        a = X[:, -1]
        s, _ = self._sigma(W @ self.features.T)
        return a @ s / X.shape[0]

    def value(self, X) -> float:
        """Evaluate F(X) = f of the uniform empirical measure on X."""
        X = self._as_particles(X)
        n = X.shape[0]
        if self.kind == "linear":
            return float(sum(float(self.h(x)) for x in X)) / n
        if self.kind == "interaction":
            total = 0.0
            for x in X:
                for y in X:
                    total += float(self.k(x, y))
            return total / n**2
        residual = self._predictions(X) - self.labels
        return float(0.5 * np.mean(residual * residual))

    def risk_gradient(self, X) -> np.ndarray:
        """Euclidean gradient of the mlp_risk functional, one row per neuron."""
        if self.kind != "mlp_risk":
            raise ValidationError("risk_gradient is defined for mlp_risk only")
        X = self._as_particles(X)
        n = X.shape[0]
        U = self.features
        big_n = U.shape[0]
        W = X[:, :-1]
        a = X[:, -1]
        s, sp = self._sigma(W @ U.T)
        residual = a @ s / n - self.labels
        grad_w = (sp * residual[None, :]) @ U * a[:, None] / (big_n * n)
        grad_a = s @ residual / (big_n * n)
        return np.hstack([grad_w, grad_a[:, None]])

    def velocity(self, X) -> np.ndarray:
        """Flow velocity at each particle, shape (n, dim).

        Linear kind: -(1/n) grad h(x_i).  Interaction kind:
        -(2/n) sum_j grad_1 k(x_i, x_j).  mlp_risk kind: -grad_theta_i F.
        """
        X = self._as_particles(X)
        n = X.shape[0]
        if self.kind == "linear":
            out = np.empty_like(X)
            for i, x in enumerate(X):
                out[i] = np.asarray(self.grad_h(x), dtype=float) / (-n)
            return out
        if self.kind == "interaction":
            out = np.empty_like(X)
            for i, x in enumerate(X):
                acc = np.zeros(self.dim)
                for y in X:
                    acc += np.asarray(self.grad_k(x, y), dtype=float)
                out[i] = (-2.0 / n) * acc
            return out
        return -self.risk_gradient(X)


_SCHEMES = ("explicit", "implicit")


def gradient_flow(functional: FunctionalSpec, x0, dt, T, scheme="explicit",
                  inner_tol=1e-10, max_inner=200000) -> ParticleTrajectory:
    """Integrate the particle flow dX/dt = velocity(X) of a functional.

    Parameters
    ----------
    functional : FunctionalSpec
    x0 : array_like, shape (n, d)
        Initial particle positions; a 1-D array is read as n points in R.
    dt, T : float
        Step size and horizon; T must be an integer multiple of dt.
    scheme : {"explicit", "implicit"}
        Explicit Euler x <- x + dt v(x), or the proximal implicit step
        x+ = x + dt v(x+) solved by inner gradient descent on
        z -> ||z - x||^2/2 + dt Phi(z), where grad Phi = -velocity, down
        to max-norm gradient `inner_tol`.

    Returns
    -------
    ParticleTrajectory
        States at times 0, dt, ..., T with uniform weights.

    Raises
    ------
    ConvergenceError
        If an implicit inner solve stalls or exhausts `max_inner` steps.
    """
    if scheme not in _SCHEMES:
        raise ValidationError(
            f"unknown scheme {scheme!r}; expected one of {_SCHEMES}"
        )
    X = functional._as_particles(x0)
    steps = _step_count(dt, T)
    states = np.empty((steps + 1,) + X.shape)
    states[0] = X
    for s in range(steps):
        if scheme == "explicit":
            X = X + dt * functional.velocity(X)
        else:
            X = _proximal_step(functional, X, float(dt), inner_tol, max_inner)
        states[s + 1] = X
    times = np.arange(steps + 1) * float(dt)
    weights = np.full(X.shape[0], 1.0 / X.shape[0])
    return ParticleTrajectory(times, states, weights)


def _proximal_step(functional, X, dt, tol, max_inner):
    # Gradient descent on z -> ||z - X||^2/2 + dt*Phi(z); the stationarity
    # condition (z - X) - dt*velocity(z) = 0 is the implicit Euler update.
    z = X.copy()
    eta = 1.0
    g = (z - X) - dt * functional.velocity(z)
    norm = float(np.max(np.abs(g)))
    for _ in range(max_inner):
        if norm <= tol:
            return z
        while True:
            z_new = z - eta * g
            g_new = (z_new - X) - dt * functional.velocity(z_new)
            norm_new = float(np.max(np.abs(g_new)))
            if norm_new < norm or eta < 1e-18:
                break
            eta *= 0.5
        if eta < 1e-18:
            raise ConvergenceError(
                "implicit inner solve stalled before reaching tolerance"
            )
        z, g, norm = z_new, g_new, norm_new
        eta = min(1.0, 2.0 * eta)
    if norm <= tol:
        return z
    raise ConvergenceError(
        f"implicit inner solve did not reach {tol:g} within {max_inner} iterations"
    )


class GeneralizedEntropy:
    """Flux description of a generalized-entropy diffusion.

    The flow of f(alpha) = int g(rho(x)) dx is d/dt rho = Lap(gtilde(rho))
    with gtilde'(s) = s g''(s).  Instances carry the flux `gtilde` and its
    derivative `gtilde_prime`, which is all the finite-volume scheme needs.
    """

    def __init__(self, name, gtilde, gtilde_prime):
        if not callable(gtilde) or not callable(gtilde_prime):
            raise ValidationError("gtilde and gtilde_prime must be callable")
        self.name = str(name)
        self.gtilde = gtilde
        self.gtilde_prime = gtilde_prime

    def __repr__(self):
        return f"GeneralizedEntropy({self.name!r})"

    @classmethod
    def shannon(cls):
        """g(s) = s log s - s: gtilde(s) = s, the heat equation."""
        return cls(
            "shannon",
            lambda s: np.asarray(s, dtype=float),
            lambda s: np.ones_like(np.asarray(s, dtype=float)),
        )

    @classmethod
    def power(cls, q):
        """g(s) = s^q with q > 1: porous-medium flux gtilde(s) = (q-1) s^q."""
        q = float(q)
        if not np.isfinite(q) or q <= 1.0:
            raise ValidationError("power entropy requires q > 1")
        return cls(
            f"power({q:g})",
            lambda s: (q - 1.0) * np.asarray(s, dtype=float) ** q,
            lambda s: q * (q - 1.0) * np.asarray(s, dtype=float) ** (q - 1.0),
        )

    @classmethod
    def custom(cls, gtilde, gtilde_prime, name="custom"):
        return cls(name, gtilde, gtilde_prime)


class Density1DPath:
    """Densities on a fixed 1-D grid sampled at increasing times."""

    def __init__(self, times, grid, densities):
        times = np.asarray(times, dtype=float)
        grid = np.asarray(grid, dtype=float)
        densities = np.asarray(densities, dtype=float)
        if times.ndim != 1 or times.shape[0] < 1 or np.any(np.diff(times) <= 0):
            raise ValidationError("times must be 1-D and strictly increasing")
        if grid.ndim != 1 or grid.shape[0] < 2 or np.any(np.diff(grid) <= 0):
            raise ValidationError("grid must be 1-D and strictly increasing")
        if densities.shape != (times.shape[0], grid.shape[0]):
            raise ValidationError(
                "densities must have shape (len(times), len(grid)), "
                f"got {densities.shape}"
            )
        if not np.all(np.isfinite(densities)):
            raise ValidationError("densities contain non-finite values")
        self.times = times
        self.grid = grid
        self.densities = densities

    @property
    def n_times(self) -> int:
        return self.times.shape[0]

    def density_at(self, index) -> GridDensity1D:
        # Flux-form rounding can leave nodes a few ulp below zero; clamp
        # only those before the validating constructor sees them.
        rho = self.densities[int(index)]
        if np.any(rho < -1e-12):
            raise ValidationError("density snapshot has negative values")
        return GridDensity1D(self.grid, np.maximum(rho, 0.0))

    def __repr__(self):
        return (
            f"Density1DPath(n_times={self.n_times}, "
            f"n_nodes={self.grid.shape[0]})"
        )


def entropy_flow_1d(rho0: GridDensity1D, entropy: GeneralizedEntropy,
                    dt, T) -> Density1DPath:
    """Evolve d/dt rho = Lap(gtilde(rho)) with zero-flux boundaries.

    Node-centered finite volumes on the uniform grid of `rho0`: each
    interior interface carries the flux (gtilde(rho_{i+1}) - gtilde(rho_i))/h,
    entering the two neighbouring cells with opposite signs, and the
    boundary fluxes are zero, so the discrete mass sum_i w_i rho_i is
    conserved to rounding at every step.  The stability bound
    dt <= h^2 / (2 max gtilde'(rho)) is enforced against the current
    density before each step.

    Returns
    -------
    Density1DPath
        Snapshots at times 0, dt, ..., T.

    Raises
    ------
    CFLViolationError
        If dt exceeds the stability bound at any step.
    """
    if not isinstance(rho0, GridDensity1D):
        raise ValidationError("rho0 must be a GridDensity1D")
    if not isinstance(entropy, GeneralizedEntropy):
        raise ValidationError("entropy must be a GeneralizedEntropy")
    steps = _step_count(dt, T)
    dt = float(dt)
    grid = rho0.grid
    spacings = np.diff(grid)
    h = float(spacings[0])
    if float(np.max(np.abs(spacings - h))) > 1e-9 * h:
        raise ValidationError("entropy_flow_1d requires a uniform grid")
    n = grid.shape[0]
    widths = np.full(n, h)
    widths[0] = widths[-1] = 0.5 * h
    rho = rho0.density.copy()
    out = np.empty((steps + 1, n))
    out[0] = rho
    for s in range(steps):
        gp = np.asarray(entropy.gtilde_prime(rho), dtype=float)
        if not np.all(np.isfinite(gp)) or np.any(gp < 0):
            raise ValidationError(
                "gtilde_prime must be finite and nonnegative on the density range"
            )
        gpmax = float(np.max(gp))
        if gpmax > 0.0:
            limit = h * h / (2.0 * gpmax)
            if dt > limit * (1.0 + 1e-12):
                raise CFLViolationError(
                    f"dt={dt:g} violates the stability bound "
                    f"h^2/(2 max gtilde') = {limit:g} at step {s}"
                )
        flux = np.diff(np.asarray(entropy.gtilde(rho), dtype=float)) / h
        div = np.zeros(n)
        div[:-1] += flux
        div[1:] -= flux
        rho = rho + dt * div / widths
        out[s + 1] = rho
    times = np.arange(steps + 1) * dt
    return Density1DPath(times, grid, out)


def _check_unit_time(t):
    t = float(t)
    if not np.isfinite(t) or t < 0.0 or t > 1.0:
        raise ValidationError("interpolation time must lie in [0, 1]")
    return t


class CouplingPath:
    """A coupling between two atomic measures plus an interpolation map.

    The path places mass pi_ij at P_t(x_i, y_j) for every support pair of
    the coupling.  P_0 and P_1 must be the coordinate projections, so the
    endpoint ensembles reproduce the coupling's two marginals exactly.

    Parameters
    ----------
    source_points : array_like, shape (n, d)
    target_points : array_like, shape (m, d)
    coupling : Coupling
        Joint weights over source x target atoms.
    interpolation, d_dt : callable, optional
        `interpolation(t, x, y)` maps paired atom arrays of shape (S, d)
        to positions, `d_dt(t, x, y)` to its time derivative.  Both
        default to the linear map (1-t) x + t y with derivative y - x and
        must be supplied together.
    """

    def __init__(self, source_points, target_points, coupling,
                 interpolation=None, d_dt=None):
        X = _as_point_array(source_points)
        Y = _as_point_array(target_points)
        if not isinstance(coupling, Coupling):
            raise ValidationError("coupling must be a Coupling instance")
        n, m = coupling.shape
        if X.shape[0] != n or Y.shape[0] != m:
            raise ValidationError(
                f"point counts ({X.shape[0]}, {Y.shape[0]}) do not match "
                f"the coupling shape {coupling.shape}"
            )
        if X.shape[1] != Y.shape[1]:
            raise ValidationError("source and target points must share a dimension")
        if (interpolation is None) != (d_dt is None):
            raise ValidationError(
                "a custom interpolation requires its time derivative and vice versa"
            )
        self.source_points = X
        self.target_points = Y
        self.coupling = coupling
        pairs = coupling.support()
        self.pairs = pairs
        self.pair_weights = coupling.plan[pairs[:, 0], pairs[:, 1]]
        self._xs = X[pairs[:, 0]]
        self._ys = Y[pairs[:, 1]]
        self._interp = interpolation
        self._d_dt = d_dt
        if interpolation is not None:
            p0 = np.asarray(interpolation(0.0, self._xs, self._ys), dtype=float)
            p1 = np.asarray(interpolation(1.0, self._xs, self._ys), dtype=float)
            if p0.shape != self._xs.shape or p1.shape != self._xs.shape:
                raise ValidationError(
                    "interpolation must preserve the paired atom array shape"
                )
            if (float(np.max(np.abs(p0 - self._xs))) > 1e-12
                    or float(np.max(np.abs(p1 - self._ys))) > 1e-12):
                raise ValidationError(
                    "interpolation must satisfy P_0(x,y) = x and P_1(x,y) = y"
                )

    @classmethod
    def monge(cls, points, targets, weights):
        """Paired path: atom i moves from points[i] to targets[i]."""
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1:
            raise ValidationError("weights must be a 1-D array")
        return cls(points, targets, Coupling(np.diag(w), w, w))

    @property
    def dim(self) -> int:
        return self.source_points.shape[1]

    @property
    def n_atoms(self) -> int:
        return self.pairs.shape[0]

    def atoms_at(self, t):
        """Positions and velocities of the path's atoms at time t.

        Returns
        -------
        positions, velocities : ndarray, shape (S, d)
            One row per support pair of the coupling, in support order;
            the corresponding masses are `pair_weights`.
        """
        t = _check_unit_time(t)
        if self._interp is None:
            pos = (1.0 - t) * self._xs + t * self._ys
            vel = self._ys - self._xs
        else:
            pos = np.asarray(self._interp(t, self._xs, self._ys), dtype=float)
            vel = np.asarray(self._d_dt(t, self._xs, self._ys), dtype=float)
        return pos, vel

    def __repr__(self):
        return f"CouplingPath(n_atoms={self.n_atoms}, dim={self.dim})"


def flow_match_velocity(path: CouplingPath, t, z, bandwidth) -> np.ndarray:
    """Conditional-expectation velocity of a coupling path at a point.

    v_t(z) averages the atom velocities d/dt P_t(x_i, y_j), weighted by
    the coupling mass, over the atoms whose position at time t lies within
    Euclidean distance `bandwidth` of `z`.  At an atom with a unique
    preimage this is that atom's own velocity.

    Raises
    ------
    NoSupportError
        If no atom position is within `bandwidth` of `z`.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (path.dim,):
        raise ValidationError(
            f"query point must have shape ({path.dim},), got {z.shape}"
        )
    bandwidth = float(bandwidth)
    if not np.isfinite(bandwidth) or bandwidth < 0:
        raise ValidationError("bandwidth must be finite and nonnegative")
    pos, vel = path.atoms_at(t)
    dist = np.sqrt(np.sum((pos - z) ** 2, axis=1))
    near = dist <= bandwidth
    if not np.any(near):
        raise NoSupportError(
            f"no path atom within bandwidth {bandwidth:g} of the query "
            f"(nearest at distance {float(dist.min()):g})"
        )
    w = path.pair_weights[near]
    return (w @ vel[near]) / float(np.sum(w))


def integrate_flow_match(path: CouplingPath, x0, dt, bandwidth=None) -> np.ndarray:
    """Euler-integrate dz/dt = v_t(z) from t=0 to t=1.

    Parameters
    ----------
    x0 : array_like, shape (s, d) or (d,)
        Start points, expected on the atoms of the path at t=0.
    dt : float
        Step size; 1 must be an integer multiple of dt.
    bandwidth : float, optional
        Match radius for the velocity queries.  The default is a small
        multiple of the path's coordinate scale, tight enough for paired
        couplings whose integrated points ride single atom trajectories;
        branched couplings need an explicit, coarser radius.

    Returns
    -------
    ndarray
        Endpoint positions at t=1, same shape as `x0`.
    """
    Z = np.asarray(x0, dtype=float)
    single = Z.ndim == 1
    if single:
        Z = Z[None, :]
    if Z.ndim != 2 or Z.shape[1] != path.dim or not np.all(np.isfinite(Z)):
        raise ValidationError(f"x0 must be finite points in R^{path.dim}")
    steps = _step_count(dt, 1.0)
    if bandwidth is None:
        scale = max(
            float(np.max(np.abs(path.source_points))),
            float(np.max(np.abs(path.target_points))),
        )
        bandwidth = 1e-7 * (1.0 + scale)
    Z = Z.copy()
    dt = float(dt)
    for s in range(steps):
        t = s * dt
        for i in range(Z.shape[0]):
            Z[i] += dt * flow_match_velocity(path, t, Z[i], bandwidth)
    return Z[0] if single else Z


def _cumulative_mass(grid, rho):
    out = np.zeros(grid.shape[0])
    np.cumsum(0.5 * (rho[1:] + rho[:-1]) * np.diff(grid), out=out[1:])
    return out


def dacorogna_moser_1d(path: Density1DPath, t, vanish_tol=1e-12) -> np.ndarray:
    """Recover the 1-D continuity-equation velocity of a density path.

    In one dimension mass conservation forces rho_t v_t = -d/dt C_t with
    C_t the cumulative mass function, so v = -(d/dt C_t) / rho_t.  The
    time derivative is a centered difference of the trapezoid cumulative
    masses of the neighbouring snapshots (one-sided at the path ends).

    Parameters
    ----------
    path : Density1DPath
    t : float
        Must coincide with one of the stored times.
    vanish_tol : float
        Node densities at or below this value make the quotient
        meaningless and raise VanishingDensityError.

    Returns
    -------
    ndarray, shape (n_nodes,)
        Velocity at the grid nodes.
    """
    if not isinstance(path, Density1DPath):
        raise ValidationError("path must be a Density1DPath")
    if path.n_times < 2:
        raise ValidationError("velocity recovery needs at least two snapshots")
    t = float(t)
    times = path.times
    idx = int(np.argmin(np.abs(times - t)))
    if abs(times[idx] - t) > 1e-9 * max(1.0, abs(t)):
        raise ValidationError(f"t={t:g} is not one of the stored times")
    rho = path.densities[idx]
    if np.any(rho <= vanish_tol):
        raise VanishingDensityError(
            "velocity recovery needs a strictly positive density "
            f"(min {float(rho.min()):.3e} at t={times[idx]:g})"
        )
    lo = max(idx - 1, 0)
    hi = min(idx + 1, path.n_times - 1)
    dC = (_cumulative_mass(path.grid, path.densities[hi])
          - _cumulative_mass(path.grid, path.densities[lo]))
    return -(dC / (times[hi] - times[lo])) / rho


def attention_velocity(tokens, Q, K, V, queries) -> np.ndarray:
    """Evaluate the softmax attention vector field at query points.

    The token cloud carries the uniform empirical measure.  With tokens
    and queries as rows, the score of query x against token y is
    <xQ, yK> and the value of y is yV, so

        Gamma(x) = sum_j softmax_j(<xQ, y_jK>) (y_j V).

    Scores are max-subtracted before exponentiation, and the softmax
    reductions use exactly rounded summation, so the output is invariant
    under any reordering of the tokens.
    """
    Y = _as_point_array(tokens)
    X = _as_point_array(queries)
    d = Y.shape[1]
    Q = np.asarray(Q, dtype=float)
    K = np.asarray(K, dtype=float)
    V = np.asarray(V, dtype=float)
    if (Q.ndim != 2 or K.ndim != 2 or Q.shape[0] != d or K.shape[0] != d
            or Q.shape[1] != K.shape[1]):
        raise ValidationError(
            f"Q and K must be ({d}, p) matrices with a common score width"
        )
    if V.shape != (d, d):
        raise ValidationError(f"V must have shape ({d}, {d}), got {V.shape}")
    if X.shape[1] != d:
        raise ValidationError("queries must share the token dimension")
    if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(K))
            and np.all(np.isfinite(V))):
        raise ValidationError("Q, K, V must be finite")
    keys = Y @ K
    values = Y @ V
    out = np.empty_like(X)
    for i, x in enumerate(X):
        scores = keys @ (x @ Q)
        w = np.exp(scores - np.max(scores))
        denom = math.fsum(w)
        for axis in range(d):
            out[i, axis] = math.fsum(w * values[:, axis]) / denom
    return out


def transformer_flow(tokens, Q, K, V, depth) -> ParticleTrajectory:
    """Apply the attention layer map `depth` times with step 1/depth.

    Each layer moves every token by (1/depth) of the attention field of
    the current cloud, an explicit Euler discretization on [0, 1] of the
    token transport ODE.  Permuting the input tokens permutes the output
    states identically, bit for bit.
    """
    X = _as_point_array(tokens)
    depth = int(depth)
    if depth < 1:
        raise ValidationError("depth must be at least 1")
    states = np.empty((depth + 1,) + X.shape)
    states[0] = X
    for layer in range(depth):
        X = X + attention_velocity(X, Q, K, V, X) / depth
        states[layer + 1] = X
    times = np.arange(depth + 1) / depth
    weights = np.full(X.shape[0], 1.0 / X.shape[0])
    return ParticleTrajectory(times, states, weights)


def mlp_flow(features, labels, n_neurons, dt, T, activation="identity",
             seed=0):
    """Train a mean-field two-layer network by explicit particle descent.

    Neurons are particles theta_i = (w_i, a_i) flowing down the square-loss
    risk.  Input weights start standard normal scaled by 1/sqrt(d) drawn
    from `seed`; output weights start at zero, so the initial risk is
    (1/2N) sum_k y_k^2.

    Returns
    -------
    trajectory : ParticleTrajectory
        Neuron positions in R^{d+1} at times 0, dt, ..., T.
    risk : ndarray
        The risk along the trajectory, one value per time.
    """
    spec = FunctionalSpec.mlp_risk(features, labels, activation)
    n = int(n_neurons)
    if n < 1:
        raise ValidationError("n_neurons must be at least 1")
    rng = np.random.default_rng(seed)
    d = spec.dim - 1
    theta0 = np.hstack([
        rng.standard_normal((n, d)) / np.sqrt(d),
        np.zeros((n, 1)),
    ])
    trajectory = gradient_flow(spec, theta0, dt, T, scheme="explicit")
    risk = np.array([spec.value(state) for state in trajectory.states])
    return trajectory, risk
