"""Acceptance run: every advertised guarantee checked at its stated tolerance.

Each test covers one guarantee end to end, prints a single
``ACCEPTANCE nn <name>: PASS`` or ``FAIL`` line on the real stdout
(bypassing pytest capture, so the checklist survives in a plain
``pytest -v`` transcript), and then asserts with the first offending
details.  Tolerances here are part of the package contract and are
asserted verbatim; none of them are tuned per machine.
"""

import math
import subprocess
import sys

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.spatial.distance import cdist

from conftest import random_points, random_simplex, rational_simplex
from oracles import (
    brute_force_assignment,
    linprog_transport_cost,
    mmd_squared_quadruple,
    vertex_enumeration_cost,
)
from otkit import divergences
from otkit.divergences import KernelSpec, mmd_squared
from otkit.duality import c_bar_transform, c_transform, duality_gap
from otkit.dynamics import (
    CouplingPath,
    FunctionalSpec,
    GeneralizedEntropy,
    entropy_flow_1d,
    gradient_flow,
    integrate_flow_match,
    transformer_flow,
)
from otkit.entropic import (
    SinkhornConfig,
    contraction_eta_lambda,
    gibbs_kernel,
    hilbert_metric,
    sinkhorn,
    sinkhorn_divergence,
)
from otkit.exact import (
    solve_1d_sorted,
    solve_kantorovich,
    w1_1d_cdf,
    wasserstein_p,
)
from otkit.gaussian import bures_squared, gaussian_w2_squared
from otkit.measures import DiscreteMeasure, GridDensity1D
from otkit.selftest import run_selftest
from otkit.semidiscrete import (
    LloydConfig,
    Sampler,
    SemiDiscreteProblem,
    SGDConfig,
    lloyd_quantize,
    semi_discrete_gradient_mc,
    sgd_solve,
)
from otkit.w1 import (
    FlowGraph,
    SignedDiscreteMeasure,
    flat_norm,
    w1_graph_beckmann,
    w1_kr_lp,
)


_CAPTURE_MANAGER = None


@pytest.fixture(autouse=True)
def _checklist_passthrough(request):
    # The checklist below must survive in the terminal transcript even
    # though pytest captures file descriptors during the test call.
    global _CAPTURE_MANAGER
    _CAPTURE_MANAGER = request.config.pluginmanager.getplugin(
        "capturemanager")
    yield


def _report(num, name, failures):
    status = "FAIL" if failures else "PASS"
    line = f"ACCEPTANCE {num:02d} {name}: {status}\n"
    if _CAPTURE_MANAGER is not None:
        with _CAPTURE_MANAGER.global_and_fixture_disabled():
            sys.stdout.write(line)
            sys.stdout.flush()
    else:
        sys.stdout.write(line)
    assert not failures, f"{name}: " + " | ".join(failures[:6])


def _check(failures, ok, detail):
    if not ok:
        failures.append(detail)


def _cloud_instance(rng, n, m, rational=True, offset=0.0):
    a = rational_simplex(rng, n) if rational else random_simplex(rng, n)
    b = rational_simplex(rng, m) if rational else random_simplex(rng, m)
    x = random_points(rng, n, 2)
    y = random_points(rng, m, 2) + offset
    C = cdist(x, y, "sqeuclidean")
    return a, b, C


def _plan_from_potentials(a, b, C, f, g, eps):
    return np.outer(a, b) * np.exp((f[:, None] + g[None, :] - C) / eps)


def test_01_exact_solver_matches_enumeration_oracles():
    # 200 instances with n, m <= 7.  Uniform square marginals are checked
    # against exhaustive permutation enumeration; general marginals
    # against vertex enumeration of the transport polytope where the
    # basis count is small, and an independent LP solver otherwise.
    failures = []
    rng = np.random.default_rng(101)
    for k in range(100):
        n = 2 + k % 6
        C = rng.random((n, n)) * rng.uniform(0.5, 5.0)
        u = np.full(n, 1.0 / n)
        res = solve_kantorovich(u, u, C)
        _, oracle = brute_force_assignment(C)
        _check(failures, abs(res.cost - oracle) <= 1e-8,
               f"square {k} (n={n}): lp={res.cost:.12f} enum={oracle:.12f}")
    for k in range(100):
        n = int(rng.integers(2, 8))
        m = int(rng.integers(2, 8))
        a = rational_simplex(rng, n)
        b = rational_simplex(rng, m)
        C = rng.random((n, m)) * rng.uniform(0.5, 5.0)
        res = solve_kantorovich(a, b, C)
        if math.comb(n * m, n + m - 1) <= 12000:
            oracle, label = vertex_enumeration_cost(a, b, C), "vertex"
        else:
            oracle, label = linprog_transport_cost(a, b, C), "linprog"
        _check(failures, abs(res.cost - oracle) <= 1e-8,
               f"general {k} ({n}x{m}, {label}): "
               f"lp={res.cost:.12f} oracle={oracle:.12f}")
    _report(1, "exact solver matches enumeration oracles", failures)


def test_02_one_dimensional_routes_agree_pairwise():
    failures = []
    rng = np.random.default_rng(202)
    for k in range(200):
        n = int(rng.integers(2, 9))
        m = int(rng.integers(2, 9))
        alpha = DiscreteMeasure(2.0 * rng.standard_normal((n, 1)),
                                rational_simplex(rng, n))
        beta = DiscreteMeasure(2.0 * rng.standard_normal((m, 1)) + 0.5,
                               rational_simplex(rng, m))
        sweep = solve_1d_sorted(alpha, beta, 1).cost
        cdf = w1_1d_cdf(alpha, beta)
        C = np.abs(alpha.points - beta.points.T)
        lp = solve_kantorovich(alpha.weights, beta.weights, C).cost
        for u, v, lab in ((sweep, cdf, "sweep/cdf"),
                          (sweep, lp, "sweep/lp"),
                          (cdf, lp, "cdf/lp")):
            _check(failures, abs(u - v) <= 1e-8,
                   f"instance {k} {lab}: {u:.12f} vs {v:.12f}")
    _report(2, "one dimensional routes agree pairwise", failures)


def test_03_wasserstein_metric_axioms_and_order_relations():
    failures = []
    rng = np.random.default_rng(303)
    for k in range(200):
        pts = random_points(rng, 5, 2)
        D = cdist(pts, pts)
        dmax = float(D.max())
        a = rational_simplex(rng, 5)
        b = rational_simplex(rng, 5)
        c = rational_simplex(rng, 5)
        vals = {}
        for p in (1, 2, 3):
            wab = wasserstein_p(a, b, D, p)
            wba = wasserstein_p(b, a, D, p)
            wac = wasserstein_p(a, c, D, p)
            wbc = wasserstein_p(b, c, D, p)
            waa = wasserstein_p(a, a, D, p)
            _check(failures, abs(wab - wba) <= 1e-9,
                   f"triple {k} p={p} symmetry {wab} vs {wba}")
            _check(failures, waa <= 1e-9, f"triple {k} p={p} identity {waa}")
            _check(failures, wac <= wab + wbc + 1e-9,
                   f"triple {k} p={p} triangle {wac} > {wab}+{wbc}")
            vals[p] = wab
        _check(failures,
               vals[1] <= vals[2] + 1e-9 and vals[2] <= vals[3] + 1e-9,
               f"triple {k} order {vals}")
        for p, q in ((1, 2), (1, 3), (2, 3)):
            bound = dmax ** (1.0 - p / q) * vals[p] ** (p / q)
            _check(failures, vals[q] <= bound + 1e-9,
                   f"triple {k} diameter p={p},q={q}: {vals[q]} > {bound}")
    _report(3, "wasserstein metric axioms and order relations", failures)


def test_04_unit_cost_w1_is_half_total_variation():
    failures = []
    rng = np.random.default_rng(404)
    for k in range(100):
        n = int(rng.integers(3, 8))
        a = rational_simplex(rng, n)
        b = rational_simplex(rng, n)
        tv_half = 0.5 * float(np.abs(a - b).sum())
        w01 = wasserstein_p(a, b, 1.0 - np.eye(n), 1)
        _check(failures, abs(w01 - tv_half) <= 1e-10,
               f"instance {k}: w1={w01:.14f} tv/2={tv_half:.14f}")
        D = cdist(*(random_points(rng, n, 3),) * 2)
        off = D[~np.eye(n, dtype=bool)]
        dmin, dmax = float(off.min()), float(off.max())
        wd = wasserstein_p(a, b, D, 1)
        _check(failures,
               dmin * tv_half - 1e-10 <= wd <= dmax * tv_half + 1e-10,
               f"instance {k}: {dmin * tv_half} <= {wd} <= {dmax * tv_half}")
    _report(4, "unit cost w1 equals half total variation", failures)


def test_05_gaussian_closed_forms():
    failures = []
    # Univariate closed form, exact on a grid whose squares and square
    # roots round trip in binary floating point.
    means = (-2.0, -0.5, 0.0, 1.5, 3.0)
    sigmas = (0.5, 1.0, 2.0, 2.5, 4.0)
    for m1 in means:
        for s1 in sigmas:
            for m2 in means:
                for s2 in sigmas:
                    got = gaussian_w2_squared([m1], [[s1 * s1]],
                                              [m2], [[s2 * s2]])
                    want = (m1 - m2) ** 2 + (s1 - s2) ** 2
                    _check(failures, got == want,
                           f"grid ({m1},{s1})/({m2},{s2}): {got} != {want}")
    rng = np.random.default_rng(505)
    for k in range(100):
        m1, m2 = 2.0 * rng.standard_normal(2)
        s1, s2 = rng.uniform(0.3, 3.0, 2)
        got = gaussian_w2_squared([m1], [[s1 * s1]], [m2], [[s2 * s2]])
        want = (m1 - m2) ** 2 + (s1 - s2) ** 2
        _check(failures, abs(got - want) <= 1e-12 * max(want, 1.0),
               f"random {k}: {got} vs {want}")
    # Commuting (diagonal) covariances reduce the Bures term to a squared
    # Hellinger-type distance between the eigenvalue vectors.
    for k in range(100):
        r = rng.uniform(0.2, 4.0, 3)
        s = rng.uniform(0.2, 4.0, 3)
        got = bures_squared(np.diag(r), np.diag(s))
        want = float(((np.sqrt(r) - np.sqrt(s)) ** 2).sum())
        _check(failures, abs(got - want) <= 1e-10,
               f"diag {k}: {got} vs {want}")
    _report(5, "gaussian closed forms", failures)


@pytest.mark.slow
def test_05b_gaussian_w2_matches_sampled_debiased_sinkhorn():
    failures = []
    mA = np.array([0.0, 0.0])
    SA = np.array([[1.0, 0.3], [0.3, 0.7]])
    mB = np.array([3.0, 1.0])
    SB = np.array([[0.5, -0.2], [-0.2, 1.2]])
    true = gaussian_w2_squared(mA, SA, mB, SB)
    rng = np.random.default_rng(31337)
    n = 2000
    x = mA + rng.standard_normal((n, 2)) @ np.linalg.cholesky(SA).T
    y = mB + rng.standard_normal((n, 2)) @ np.linalg.cholesky(SB).T
    w = np.full(n, 1.0 / n)
    cfg = SinkhornConfig(epsilon=0.5, max_iter=40000, marginal_tol=1e-7,
                         log_domain=False)
    est = sinkhorn_divergence(w, w, cdist(x, y, "sqeuclidean"),
                              cdist(x, x, "sqeuclidean"),
                              cdist(y, y, "sqeuclidean"), cfg)
    _check(failures, abs(est - true) <= 0.02 * true,
           f"sampled={est:.6f} closed form={true:.6f}")
    _report(5, "sampled debiased divergence recovers gaussian w2", failures)


def test_06_epsilon_ladder_descends_to_lp_and_blurs_to_product():
    failures = []
    rng = np.random.default_rng(606)
    for k in range(5):
        a, b, C = _cloud_instance(rng, 10, 11, offset=1.0)
        lp = solve_kantorovich(a, b, C).cost
        base = float(C.mean())
        costs = []
        for scale in (1.0, 0.1, 0.01, 0.001):
            eps = scale * base
            sched = tuple(base * 0.5 ** j for j in range(14)
                          if base * 0.5 ** j > eps) + (eps,)
            cfg = SinkhornConfig(epsilon=eps, max_iter=200000,
                                 marginal_tol=1e-9,
                                 epsilon_schedule=sched if len(sched) > 1
                                 else None)
            res = sinkhorn(a, b, C, cfg)
            _check(failures, res.state.status == "optimal",
                   f"instance {k} eps={eps:.2e}: status {res.state.status}")
            costs.append(res.cost_linear)
        for lo, hi in zip(costs[1:], costs[:-1]):
            _check(failures, lo <= hi + 1e-9,
                   f"instance {k}: ladder not monotone {costs}")
        _check(failures, costs[-1] >= lp - 1e-9,
               f"instance {k}: entropic cost {costs[-1]} below lp {lp}")
        _check(failures, costs[-1] - lp <= 0.01 * lp,
               f"instance {k}: final gap {costs[-1] - lp} > 1% of {lp}")
    for k in range(20):
        a, b, C = _cloud_instance(rng, 6, 7, rational=False)
        cmax = float(np.abs(C).max())
        eps = 1000.0 * cmax
        res = sinkhorn(a, b, C, SinkhornConfig(epsilon=eps))
        deviation = float(np.abs(res.coupling.plan - np.outer(a, b)).sum())
        _check(failures, deviation <= 3.0 * cmax / eps,
               f"product {k}: |P - a x b|_1 = {deviation}")
    _report(6, "epsilon ladder descends to lp and blurs to product",
            failures)


def test_07_hilbert_contraction_rate_and_a_posteriori_bound():
    failures = []
    rng = np.random.default_rng(707)
    for k, factor in enumerate((0.3, 0.4, 0.6)):
        a = random_simplex(rng, 6)
        b = random_simplex(rng, 6)
        C = cdist(random_points(rng, 6, 2), random_points(rng, 6, 2),
                  "sqeuclidean")
        eps = factor * float(C.mean())
        _, lam = contraction_eta_lambda(gibbs_kernel(C, eps))
        tight = SinkhornConfig(epsilon=eps, marginal_tol=1e-15,
                               max_iter=100000)
        f_star = sinkhorn(a, b, C, tight).state.f
        cfg = SinkhornConfig(epsilon=eps, max_iter=40, marginal_tol=1e-16,
                             record_history=True)
        state = sinkhorn(a, b, C, cfg).state
        iterates = [state.history[2 * j] for j in range(41)]
        dists = [float(np.ptp((f - f_star) / eps)) for f, _ in iterates]
        for j, (d0, d1) in enumerate(zip(dists[1:], dists[2:])):
            if d0 <= 1e-9:
                break
            _check(failures, d1 <= (lam ** 2 + 0.05) * d0,
                   f"instance {k} sweep {j}: ratio {d1 / d0:.4f} "
                   f"> lambda^2+0.05 = {lam ** 2 + 0.05:.4f}")
        for j in range(1, 41):
            f_j, g_j = state.history[2 * j]
            P_j = _plan_from_potentials(a, b, C, f_j, g_j, eps)
            lhs = float(np.ptp((f_j - f_star) / eps))
            rhs = hilbert_metric(P_j.sum(axis=1), a) / (1.0 - lam)
            _check(failures, lhs <= rhs + 1e-12,
                   f"instance {k} sweep {j}: error {lhs} > bound {rhs}")
    _report(7, "hilbert contraction rate and a posteriori bound", failures)


def test_08_duality_gap_and_c_transform_identities():
    failures = []
    rng = np.random.default_rng(808)
    for k in range(100):
        n = int(rng.integers(2, 9))
        m = int(rng.integers(2, 9))
        a, b, C = _cloud_instance(rng, n, m)
        res = solve_kantorovich(a, b, C)
        gap = duality_gap(res, res.potentials, C)
        _check(failures, -1e-10 <= gap <= 1e-8,
               f"solve {k}: duality gap {gap}")
    # Order and involution identities of the two conjugations.  The
    # pointwise inequalities survive floating point exactly because
    # subtraction and minima are monotone under rounding; the involution
    # equalities cancel a term that was itself rounded, so they are
    # asserted to within one part in 1e12 of the data scale.
    for k in range(100):
        n = int(rng.integers(2, 8))
        m = int(rng.integers(2, 8))
        C = rng.random((n, m)) * rng.uniform(0.5, 4.0)
        f = rng.standard_normal(n)
        tol = 1e-12 * (1.0 + float(np.abs(C).max()) + float(np.abs(f).max()))
        f_up = f + rng.random(n)
        _check(failures,
               bool(np.all(c_bar_transform(f, C)
                           >= c_bar_transform(f_up, C))),
               f"draw {k}: conjugation not antitone")
        s = c_bar_transform(f, C)
        r = c_transform(s, C)
        _check(failures, bool(np.all(r >= f - tol)),
               f"draw {k}: double conjugate fell below f by "
               f"{float(np.max(f - r))}")
        g = rng.standard_normal(m)
        rg = c_transform(g, C)
        sg = c_bar_transform(rg, C)
        _check(failures, bool(np.all(sg >= g - tol)),
               f"draw {k}: double conjugate fell below g")
        s2 = c_bar_transform(r, C)
        _check(failures, float(np.abs(s2 - s).max()) <= tol,
               f"draw {k}: triple conjugate differs by "
               f"{float(np.abs(s2 - s).max())}")
        # One alternating sweep from an arbitrary start reaches a fixed
        # point of the pair of conjugations.
        f1 = c_transform(g, C)
        g1 = c_bar_transform(f1, C)
        f2 = c_transform(g1, C)
        g2 = c_bar_transform(f2, C)
        drift = max(float(np.abs(f2 - f1).max()),
                    float(np.abs(g2 - g1).max()))
        _check(failures, drift <= tol,
               f"draw {k}: second sweep moved by {drift}")
    _report(8, "duality gap and c transform identities", failures)


def test_09_semidiscrete_gradient_sgd_and_lloyd():
    failures = []
    rng = np.random.default_rng(909)
    # Monte Carlo gradient against central finite differences of the
    # energy under common random numbers.
    for k in range(20):
        d = int(rng.integers(1, 4))
        m = int(rng.integers(2, 5))
        if k % 2 == 0:
            sampler = Sampler.uniform_box(np.zeros(d), np.ones(d))
            targets = rng.random((m, d))
        else:
            sampler = Sampler.gaussian(np.zeros(d), np.eye(d))
            targets = rng.standard_normal((m, d))
        weights = random_simplex(rng, m)
        prob = SemiDiscreteProblem(sampler, targets, weights)
        g = 0.05 * rng.standard_normal(m)
        n, seed, delta = 20000, 1000 + k, 1e-3
        grad = semi_discrete_gradient_mc(prob, g, n, seed)
        samples = prob.sampler.draw(np.random.default_rng(seed), n)
        C = cdist(samples, prob.targets, "sqeuclidean")

        def energy_per_sample(gv):
            return np.min(C - gv, axis=1) + float(gv @ weights)

        for j in range(m):
            e = np.zeros(m)
            e[j] = delta
            diff = (energy_per_sample(g + e)
                    - energy_per_sample(g - e)) / (2.0 * delta)
            fd = float(diff.mean())
            se = float(diff.std(ddof=1) / math.sqrt(n))
            tol = max(3.0 * se, 5e-3)
            _check(failures, abs(grad[j] - fd) <= tol,
                   f"instance {k} coord {j}: grad={grad[j]:.5f} "
                   f"fd={fd:.5f} tol={tol:.1e}")
    # Stochastic ascent on the interval with masses (1/4, 3/4) puts the
    # cell boundary near the first quartile.
    prob = SemiDiscreteProblem(Sampler.uniform_box([0.0], [1.0]),
                               np.array([[0.0], [1.0]]),
                               np.array([0.25, 0.75]))
    cfg = SGDConfig(n_iter=100000, seed=7, eval_every=50000,
                    heldout_samples=20000)
    g, _ = sgd_solve(prob, cfg)
    boundary = (1.0 + g[0] - g[1]) / 2.0
    _check(failures, abs(boundary - 0.25) <= 0.02,
           f"sgd boundary {boundary:.4f} not within 0.02 of 0.25")
    # Lloyd on the uniform interval with two cells.
    Y, masses, cost = lloyd_quantize(Sampler.uniform_box([0.0], [1.0]), 2,
                                     LloydConfig(n_iter=80, seed=2,
                                                 n_samples=40000))
    centers = np.sort(Y.ravel())
    _check(failures,
           float(np.abs(centers - np.array([0.25, 0.75])).max()) <= 0.01,
           f"lloyd centers {centers}")
    _check(failures, abs(cost - 1.0 / 48.0) <= 0.05 / 48.0,
           f"lloyd cost {cost} vs 1/48")
    _report(9, "semidiscrete gradient, sgd, and lloyd", failures)


def test_10_kr_duality_beckmann_and_flat_norm():
    failures = []
    rng = np.random.default_rng(1010)
    for k in range(100):
        n = int(rng.integers(3, 7))
        pts = random_points(rng, n, 2)
        D = cdist(pts, pts)
        a = rational_simplex(rng, n)
        b = rational_simplex(rng, n)
        lp = solve_kantorovich(a, b, D).cost
        kr, _ = w1_kr_lp(SignedDiscreteMeasure(pts, a - b), D)
        # On a complete graph with euclidean lengths the path metric is
        # the euclidean metric, so the network flow value is w1.
        edges = [(i, j, float(D[i, j]))
                 for i in range(n) for j in range(i + 1, n)]
        beck, _ = w1_graph_beckmann(FlowGraph(n, edges, a - b))
        for u, v, lab in ((kr, beck, "kr/beckmann"),
                          (kr, lp, "kr/lp"),
                          (beck, lp, "beckmann/lp")):
            _check(failures, abs(u - v) <= 1e-8,
                   f"instance {k} {lab}: {u:.12f} vs {v:.12f}")
    dists = [0.25, 1.0, 1.999, 2.0, 2.5, 7.0]
    dists += list(np.random.default_rng(1011).uniform(0.05, 4.0, 20))
    for d in dists:
        m = SignedDiscreteMeasure(np.array([[0.0], [d]]),
                                  np.array([1.0, -1.0]))
        val = flat_norm(m, np.array([[0.0, d], [d, 0.0]]))
        _check(failures, abs(val - min(2.0, d)) <= 1e-9,
               f"dirac pair at distance {d}: flat norm {val}")
    _report(10, "kr duality, beckmann flow, and flat norm", failures)


def test_11_phi_divergences_and_mmd():
    failures = []
    rng = np.random.default_rng(1111)
    entropies = {name: divergences.from_name(name)
                 for name in ("kl", "tv", "chi2")}
    for k in range(500):
        n = int(rng.integers(2, 9))
        a = random_simplex(rng, n)
        b = random_simplex(rng, n)
        for name, entropy in entropies.items():
            val = divergences.phi_divergence(a, b, entropy)
            _check(failures, val >= -1e-12, f"pair {k} {name}: {val} < 0")
            self_val = divergences.phi_divergence(a, a, entropy)
            _check(failures, self_val <= 1e-12,
                   f"pair {k} {name}: self divergence {self_val}")
        gap = divergences.phi_dual_gap(a, b, np.log(a / b),
                                       entropies["kl"])
        _check(failures, abs(gap) <= 1e-10,
               f"pair {k}: kl witness gap {gap}")
    for k in range(100):
        n = int(rng.integers(2, 7))
        m = int(rng.integers(2, 7))
        x = random_points(rng, n, 2)
        y = random_points(rng, m, 2)
        a = random_simplex(rng, n)
        b = random_simplex(rng, m)
        sigma = rng.uniform(0.4, 1.5)
        val = mmd_squared(DiscreteMeasure(x, a), DiscreteMeasure(y, b),
                          KernelSpec.gaussian(sigma))
        _check(failures, val >= -1e-10, f"mmd {k}: {val} < 0")
        oracle = mmd_squared_quadruple(
            x, a, y, b,
            lambda u, v: math.exp(-float((u - v) @ (u - v))
                                  / (2.0 * sigma ** 2)))
        _check(failures, abs(val - oracle) <= 1e-12,
               f"mmd {k}: {val} vs quadruple {oracle}")
    _report(11, "phi divergences and mmd", failures)


def test_12_sinkhorn_divergence_axioms_and_energy_limit():
    failures = []
    rng = np.random.default_rng(1212)
    for k in range(20):
        n = int(rng.integers(3, 7))
        x = random_points(rng, n, 2)
        a = random_simplex(rng, n)
        Caa = cdist(x, x, "sqeuclidean")
        cfg = SinkhornConfig(epsilon=0.5 * float(Caa.mean()) + 0.1,
                             max_iter=20000, marginal_tol=1e-10)
        val = sinkhorn_divergence(a, a, Caa, Caa, Caa, cfg)
        _check(failures, abs(val) <= 1e-9, f"self {k}: {val}")
    for k in range(100):
        n = int(rng.integers(3, 7))
        m = int(rng.integers(3, 7))
        x = random_points(rng, n, 2)
        y = random_points(rng, m, 2) + rng.uniform(-0.5, 0.5, 2)
        a = random_simplex(rng, n)
        b = random_simplex(rng, m)
        Cab = cdist(x, y, "sqeuclidean")
        cfg = SinkhornConfig(epsilon=0.5 * float(Cab.mean()) + 0.05,
                             max_iter=20000, marginal_tol=1e-10)
        val = sinkhorn_divergence(a, b, Cab,
                                  cdist(x, x, "sqeuclidean"),
                                  cdist(y, y, "sqeuclidean"), cfg)
        _check(failures, val >= -1e-9, f"pair {k}: divergence {val}")
    # With the euclidean cost the infinite-smoothing limit is half the
    # energy-distance kernel norm of alpha - beta.
    for k in range(10):
        n = int(rng.integers(4, 8))
        m = int(rng.integers(4, 8))
        x = random_points(rng, n, 2)
        y = random_points(rng, m, 2) + 1.5
        a = random_simplex(rng, n)
        b = random_simplex(rng, m)
        Cab = cdist(x, y)
        eps = 1000.0 * float(Cab.max())
        cfg = SinkhornConfig(epsilon=eps, max_iter=20000,
                             marginal_tol=1e-12, log_domain=False)
        val = sinkhorn_divergence(a, b, Cab, cdist(x, x), cdist(y, y), cfg)
        m2 = mmd_squared(DiscreteMeasure(x, a), DiscreteMeasure(y, b),
                         KernelSpec.energy(1.0))
        _check(failures, abs(2.0 * val - m2) <= 0.02 * m2,
               f"limit {k}: 2*divergence {2 * val} vs energy mmd {m2}")
    _report(12, "sinkhorn divergence axioms and energy limit", failures)


def test_13_particle_flows_density_flow_and_attention():
    failures = []
    # Pairwise quadratic interaction: the mean is conserved and the
    # deviations contract at rate 2.
    quad = FunctionalSpec.interaction(
        lambda x, y: 0.5 * float((x - y) @ (x - y)),
        lambda x, y: x - y, dim=2)
    x0 = np.random.default_rng(7).standard_normal((5, 2))
    traj = gradient_flow(quad, x0, dt=1e-3, T=1.0)
    drift = float(np.abs(traj.states.mean(axis=1) - x0.mean(axis=0)).max())
    _check(failures, drift <= 1e-9, f"interaction mean drift {drift}")
    dev0 = x0 - x0.mean(axis=0)
    for idx in (200, 1000):
        t = traj.times[idx]
        dev = traj.states[idx] - traj.states[idx].mean(axis=0)
        rel = float(np.abs(dev - np.exp(-2.0 * t) * dev0).max()
                    / np.abs(np.exp(-2.0 * t) * dev0).max())
        _check(failures, rel <= 0.01,
               f"interaction decay at t={t}: rel err {rel}")
    # Shannon entropy flow on a grid is the heat flow: a gaussian bump
    # widens by 2t in variance.
    grid = np.linspace(-3.0, 3.0, 301)
    var0 = 0.09
    rho0 = GridDensity1D(grid, np.exp(-grid ** 2 / (2 * var0))
                         / np.sqrt(2 * np.pi * var0))
    path = entropy_flow_1d(rho0, GeneralizedEntropy.shannon(),
                           dt=1.25e-4, T=0.1)
    var_t = var0 + 2 * 0.1
    exact = np.exp(-grid ** 2 / (2 * var_t)) / np.sqrt(2 * np.pi * var_t)
    h = grid[1] - grid[0]
    widths = np.full(grid.shape, h)
    widths[0] = widths[-1] = 0.5 * h
    l1 = float(np.sum(np.abs(path.densities[-1] - exact) * widths))
    _check(failures, l1 <= 0.02, f"heat flow L1 error {l1}")
    # Velocity-field integration returns the paired targets.
    rngd = np.random.default_rng(1313)
    x = np.sort(rngd.random(5))[:, None]
    y = np.sort(rngd.random(5))[:, None] + 1.5
    path2 = CouplingPath.monge(x, y, np.full(5, 0.2))
    out = integrate_flow_match(path2, x, dt=1e-2)
    endpoint = float(np.abs(out - y).max())
    _check(failures, endpoint <= 1e-6, f"flow match endpoint {endpoint}")
    # Kinetic energy of the displacement path equals the quadratic
    # transport cost.
    _, vel = path2.atoms_at(0.0)
    energy = float(np.sum(path2.pair_weights * np.sum(vel ** 2, axis=1)))
    lp = solve_kantorovich(np.full(5, 0.2), np.full(5, 0.2),
                           (x - y.T) ** 2).cost
    _check(failures, abs(energy - lp) <= 1e-8,
           f"displacement energy {energy} vs lp {lp}")
    # Attention dynamics: relabeling tokens relabels the whole
    # trajectory bitwise, and a single token obeys the linear flow.
    rngt = np.random.default_rng(24)
    tokens = rngt.standard_normal((6, 3))
    Q = 0.4 * rngt.standard_normal((3, 2))
    K = 0.4 * rngt.standard_normal((3, 2))
    V = 0.4 * rngt.standard_normal((3, 3))
    perm = rngt.permutation(6)
    base = transformer_flow(tokens, Q, K, V, depth=4)
    permuted = transformer_flow(tokens[perm], Q, K, V, depth=4)
    _check(failures,
           bool(np.array_equal(permuted.states, base.states[:, perm, :])),
           "attention equivariance broke")
    V1 = 0.5 * np.random.default_rng(23).standard_normal((2, 2))
    x0_tok = np.array([[0.7, -0.3]])
    single = transformer_flow(x0_tok, np.zeros((2, 1)), np.zeros((2, 1)),
                              V1, depth=1000)
    ref = x0_tok @ expm(V1)
    rel = float(np.linalg.norm(single.final_state - ref)
                / np.linalg.norm(ref))
    _check(failures, rel <= 1e-3, f"single token exponential error {rel}")
    _report(13, "particle flows, density flow, and attention", failures)


def test_14_selftest_reruns_byte_identical(tmp_path):
    failures = []
    report_a, ok_a = run_selftest()
    report_b, ok_b = run_selftest()
    _check(failures, ok_a and ok_b, "selftest reported failures")
    _check(failures, report_a == report_b,
           "selftest reports differ between runs")
    cmd = [sys.executable, "-m", "otkit.cli", "selftest"]
    runs = [subprocess.run(cmd, capture_output=True) for _ in range(2)]
    _check(failures, all(r.returncode == 0 for r in runs),
           f"cli selftest exit codes {[r.returncode for r in runs]}")
    _check(failures, runs[0].stdout == runs[1].stdout,
           "cli selftest stdout differs between runs")
    rng = np.random.default_rng(1414)
    for name, n in (("a.json", 5), ("b.json", 6)):
        pts = rng.standard_normal((n, 2))
        w = rational_simplex(rng, n)
        (tmp_path / name).write_text(
            '{"points": %s, "weights": %s}'
            % (np.array2string(pts, separator=",").replace("\n", ""),
               np.array2string(w, separator=",", precision=17)))
    solve = [sys.executable, "-m", "otkit.cli", "exact",
             "--a", str(tmp_path / "a.json"),
             "--b", str(tmp_path / "b.json"), "--cost", "sqeuclidean"]
    outs = [subprocess.run(solve, capture_output=True) for _ in range(2)]
    _check(failures, all(r.returncode == 0 for r in outs),
           f"cli exact exit codes {[r.returncode for r in outs]}")
    _check(failures, outs[0].stdout == outs[1].stdout,
           "cli exact stdout differs between runs")
    _report(14, "selftest and cli reruns are byte identical", failures)
