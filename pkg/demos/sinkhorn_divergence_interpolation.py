#!/usr/bin/env python3
"""The debiased divergence between transport and kernel norms.

For a fixed pair of clouds, sweeps the smoothing parameter from tiny
to huge.  At the small end the divergence approaches the 2-Wasserstein
cost; with the euclidean ground cost and large smoothing, twice the
divergence approaches the energy-distance kernel norm.
"""

import argparse

import numpy as np
from scipy.spatial.distance import cdist

from otkit.divergences import KernelSpec, mmd_squared
from otkit.entropic import SinkhornConfig, sinkhorn_divergence
from otkit.exact import solve_kantorovich
from otkit.measures import DiscreteMeasure


def divergence(a, b, Cab, Caa, Cbb, eps):
    cfg = SinkhornConfig(epsilon=eps, max_iter=100000, marginal_tol=1e-10)
    return sinkhorn_divergence(a, b, Cab, Caa, Cbb, cfg)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    x = rng.standard_normal((args.n, 2))
    y = rng.standard_normal((args.n, 2)) + np.array([1.5, 0.0])
    a = rng.dirichlet(np.ones(args.n))
    b = rng.dirichlet(np.ones(args.n))

    # Quadratic cost: the small-eps limit is the transport cost.
    C2 = (cdist(x, y) ** 2, cdist(x, x) ** 2, cdist(y, y) ** 2)
    w2sq = solve_kantorovich(a, b, C2[0]).cost
    print(f"squared cost, LP value {w2sq:.6f}")
    for scale in (0.01, 0.1, 1.0, 10.0):
        eps = scale * float(C2[0].mean())
        val = divergence(a, b, *C2, eps)
        print(f"  eps = {scale:5.2f} * mean: divergence {val:.6f}")

    # Euclidean cost: the large-eps limit is half the kernel norm.
    C1 = (cdist(x, y), cdist(x, x), cdist(y, y))
    m2 = mmd_squared(DiscreteMeasure(x, a), DiscreteMeasure(y, b),
                     KernelSpec.energy(1.0))
    print(f"\neuclidean cost, energy kernel norm {m2:.6f}")
    for scale in (1.0, 10.0, 100.0, 1000.0):
        eps = scale * float(C1[0].max())
        val = divergence(a, b, *C1, eps)
        print(f"  eps = {scale:6.1f} * max: 2 * divergence {2 * val:.6f}")


if __name__ == "__main__":
    main()
