"""Successive-shortest-path min-cost flow on integer supplies.

Internal engine behind the exact Kantorovich solver, the assignment solver,
and the Wasserstein-1 norms (Kantorovich-Rubinstein, flat norm, Beckmann).
Arcs are uncapacitated and directed; supplies are int64 and must sum to
zero.  Flows stay integral throughout, so conservation at every node is
exact.  Node potentials are maintained with reduced-cost Dijkstra (Johnson
updates), which yields optimal LP duals on termination: an arc carries flow
only if its reduced cost is zero.
"""

from __future__ import annotations

import heapq
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, ValidationError

__all__ = [
    "MinCostFlowResult",
    "solve_min_cost_flow",
    "quantize_simplex",
    "quantize_balanced",
    "solve_transportation",
]


class MinCostFlowResult(NamedTuple):
    flows: np.ndarray
    potentials: np.ndarray
    cost: float
    augmentations: int
    status: str


def solve_min_cost_flow(n_nodes, tails, heads, costs, supplies, max_augmentations=None):
    """Route integer supplies at minimum cost through a directed graph.

    Parameters
    ----------
    n_nodes : int
    tails, heads : array_like of int, shape (n_arcs,)
        Arc endpoints; arcs are uncapacitated in the forward direction.
    costs : array_like of float, shape (n_arcs,)
        Per-unit arc costs (any sign; negative costs trigger a
        Bellman-Ford potential initialization).
    supplies : array_like of int, shape (n_nodes,)
        Positive entries are sources, negative are sinks; must sum to 0.

    Returns
    -------
    MinCostFlowResult
        ``flows`` per arc (int64), node ``potentials`` such that
        ``cost + pot[tail] - pot[head] >= 0`` with equality on arcs
        carrying flow, total ``cost``, the number of augmentations, and
        status "optimal" or "infeasible".
    """
    tails = np.asarray(tails, dtype=np.int64)
    heads = np.asarray(heads, dtype=np.int64)
    costs = np.asarray(costs, dtype=float)
    supplies = np.asarray(supplies, dtype=np.int64)
    n_arcs = tails.shape[0]
    if heads.shape[0] != n_arcs or costs.shape[0] != n_arcs:
        raise ValidationError("tails, heads, and costs must have equal length")
    if supplies.shape[0] != n_nodes:
        raise ValidationError("supplies length must equal n_nodes")
    if int(supplies.sum()) != 0:
        raise ValidationError("supplies must sum to zero")
    if not np.all(np.isfinite(costs)):
        raise ValidationError("arc costs must be finite")
    if n_arcs and (tails.min() < 0 or heads.max() >= n_nodes or
                   heads.min() < 0 or tails.max() >= n_nodes):
        raise ValidationError("arc endpoints out of range")

    out_arcs = [[] for _ in range(n_nodes)]
    in_arcs = [[] for _ in range(n_nodes)]
    for a in range(n_arcs):
        out_arcs[tails[a]].append(a)
        in_arcs[heads[a]].append(a)

    flow = np.zeros(n_arcs, dtype=np.int64)
    pot = np.zeros(n_nodes, dtype=float)
    excess = supplies.astype(np.int64).copy()

    if n_arcs and costs.min() < 0.0:
        pot = _bellman_ford_potentials(n_nodes, tails, heads, costs)

    if max_augmentations is None:
        max_augmentations = 1000 + 40 * (n_nodes + n_arcs)

    augmentations = 0
    while True:
        sources = np.flatnonzero(excess > 0)
        if sources.size == 0:
            status = "optimal"
            break
        if augmentations >= max_augmentations:
            raise ConvergenceError(
                f"min-cost flow exceeded {max_augmentations} augmentations"
            )

        dist = np.full(n_nodes, np.inf)
        prev_arc = np.full(n_nodes, -1, dtype=np.int64)
        prev_back = np.zeros(n_nodes, dtype=bool)
        heap = [(0.0, int(s)) for s in sources]
        heapq.heapify(heap)
        dist[sources] = 0.0
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            for a in out_arcs[u]:
                rc = costs[a] + pot[u] - pot[heads[a]]
                v = int(heads[a])
                nd = d + max(rc, 0.0)
                if nd < dist[v]:
                    dist[v] = nd
                    prev_arc[v] = a
                    prev_back[v] = False
                    heapq.heappush(heap, (nd, v))
            for a in in_arcs[u]:
                if flow[a] <= 0:
                    continue
                rc = -costs[a] + pot[u] - pot[tails[a]]
                v = int(tails[a])
                nd = d + max(rc, 0.0)
                if nd < dist[v]:
                    dist[v] = nd
                    prev_arc[v] = a
                    prev_back[v] = True
                    heapq.heappush(heap, (nd, v))

        sinks = np.flatnonzero(excess < 0)
        reachable = sinks[np.isfinite(dist[sinks])]
        if reachable.size == 0:
            status = "infeasible"
            break
        t = int(reachable[np.argmin(dist[reachable])])
        d_t = dist[t]
        pot += np.minimum(dist, d_t)

        # Walk back from the sink until a node with positive excess; every
        # shortest-path tree root is a source, so the walk terminates.
        path = []
        v = t
        while excess[v] <= 0:
            a = int(prev_arc[v])
            back = bool(prev_back[v])
            path.append((a, back))
            v = int(heads[a]) if back else int(tails[a])
        s = v
        bottleneck = min(int(excess[s]), int(-excess[t]))
        for a, back in path:
            if back:
                bottleneck = min(bottleneck, int(flow[a]))
        for a, back in path:
            flow[a] += -bottleneck if back else bottleneck
        excess[s] -= bottleneck
        excess[t] += bottleneck
        augmentations += 1

    cost = float(np.dot(flow.astype(float), costs))
    return MinCostFlowResult(flow, pot, cost, augmentations, status)


def _bellman_ford_potentials(n_nodes, tails, heads, costs):
    """Feasible potentials for graphs with negative arc costs."""
    pot = np.zeros(n_nodes)
    for _ in range(n_nodes):
        new = pot.copy()
        np.minimum.at(new, heads, pot[tails] + costs)
        if np.array_equal(new, pot):
            break
        pot = new
    else:
        raise ValidationError("negative-cost cycle detected")
    return pot


def quantize_simplex(weights, scale):
    """Largest-remainder rounding of a probability vector to integers.

    Returns int64 values summing exactly to ``scale``; each entry deviates
    from ``weights * scale`` by less than 1, and zero weights stay zero.
    """
    w = np.asarray(weights, dtype=float)
    t = w * scale
    base = np.floor(t).astype(np.int64)
    frac = t - base
    deficit = int(scale - base.sum())
    if deficit > 0:
        candidates = np.flatnonzero(w > 0)
        order = candidates[np.argsort(-frac[candidates], kind="stable")]
        if order.size < deficit:
            raise ValidationError("weights do not sum to 1 closely enough to quantize")
        base[order[:deficit]] += 1
    elif deficit < 0:
        candidates = np.flatnonzero(base > 0)
        order = candidates[np.argsort(frac[candidates], kind="stable")]
        if order.size < -deficit:
            raise ValidationError("weights do not sum to 1 closely enough to quantize")
        base[order[:-deficit]] -= 1
    return base


def quantize_balanced(masses, scale):
    """Round signed masses to integers that sum exactly to zero.

    Nearest-integer rounding followed by +/-1 corrections applied to the
    entries of largest magnitude (stable order).  Input must be close to
    zero-sum; corrections never exceed one unit per entry beyond rounding.
    """
    m = np.asarray(masses, dtype=float)
    t = m * scale
    base = np.rint(t).astype(np.int64)
    residual = int(base.sum())
    if residual != 0:
        order = np.argsort(-np.abs(t), kind="stable")
        step = -1 if residual > 0 else 1
        for idx in order[: abs(residual)]:
            base[idx] += step
    return base


def solve_transportation(a_int, b_int, C, forestify=True):
    """Exact transportation LP with integer marginals.

    Parameters
    ----------
    a_int, b_int : int64 arrays with equal positive sums.
    C : float cost matrix, shape (n, m).
    forestify : bool
        Cancel zero-cost cycles in the support so the returned basis is a
        forest (at most n + m - 1 positive entries).

    Returns
    -------
    (plan_int, f, g, augmentations, status)
        Integer plan with exact marginals and dual potentials satisfying
        ``f_i + g_j <= C_ij`` with equality on the support.
    """
    a_int = np.asarray(a_int, dtype=np.int64)
    b_int = np.asarray(b_int, dtype=np.int64)
    C = np.asarray(C, dtype=float)
    n, m = C.shape
    if a_int.shape != (n,) or b_int.shape != (m,):
        raise ValidationError("marginal lengths do not match the cost matrix")
    if int(a_int.sum()) != int(b_int.sum()):
        raise ValidationError("integer marginals are unbalanced")
    tails = np.repeat(np.arange(n), m)
    heads = n + np.tile(np.arange(m), n)
    costs = C.reshape(-1)
    supplies = np.concatenate([a_int, -b_int])
    res = solve_min_cost_flow(n + m, tails, heads, costs, supplies)
    plan_int = res.flows.reshape(n, m)
    if forestify and res.status == "optimal":
        plan_int = _cancel_support_cycles(plan_int, C)
    f = -res.potentials[:n]
    g = res.potentials[n:]
    return plan_int, f, g, res.augmentations, res.status


def _cancel_support_cycles(plan_int, C):
    """Remove cycles from a bipartite support by pushing along them.

    At optimality every support cycle has zero cost (up to rounding), so
    flow is pushed in the direction whose cost change is <= 0 until some
    arc empties.  Terminates because each push zeroes at least one entry.
    """
    plan = plan_int.copy()
    n, m = plan.shape
    while True:
        cycle = _find_support_cycle(plan)
        if cycle is None:
            return plan
        # cycle: list of (i, j, forward) alternating arcs; pushing one unit
        # "forward" increases plan[i, j] on forward arcs and decreases it
        # on backward arcs.
        delta = sum(C[i, j] if fwd else -C[i, j] for i, j, fwd in cycle)
        if delta > 0.0:
            cycle = [(i, j, not fwd) for i, j, fwd in cycle]
        shrink = [int(plan[i, j]) for i, j, fwd in cycle if not fwd]
        push = min(shrink)
        for i, j, fwd in cycle:
            plan[i, j] += push if fwd else -push


def _find_support_cycle(plan):
    """Locate one cycle in the bipartite support graph, if any.

    Nodes are rows 0..n-1 and columns n..n+m-1; edges are positive plan
    entries.  Returns alternating arcs as (i, j, forward) where forward
    means the cycle traverses row->column, or None when the support is a
    forest.
    """
    n, m = plan.shape
    adj = [[] for _ in range(n + m)]
    for i, j in np.argwhere(plan > 0):
        i = int(i)
        j = int(j)
        adj[i].append((n + j, i, j))
        adj[n + j].append((i, i, j))
    seen = np.zeros(n + m, dtype=bool)
    parent_edge = {}
    for root in range(n + m):
        if seen[root] or not adj[root]:
            continue
        stack = [(root, -1, -1)]
        seen[root] = True
        parent_edge[root] = None
        while stack:
            node, pi, pj = stack.pop()
            for nxt, i, j in adj[node]:
                if (i, j) == (pi, pj):
                    continue
                if not seen[nxt]:
                    seen[nxt] = True
                    parent_edge[nxt] = (node, i, j)
                    stack.append((nxt, i, j))
                else:
                    return _extract_cycle(parent_edge, node, nxt, (i, j), n)
    return None


def _extract_cycle(parent_edge, u, v, closing, n):
    """Assemble the cycle closed by edge ``closing`` between u and v."""

    def path_to_root(x):
        nodes = [x]
        edges = []
        while parent_edge[x] is not None:
            par, i, j = parent_edge[x]
            edges.append((i, j))
            x = par
            nodes.append(x)
        return nodes, edges

    nodes_u, edges_u = path_to_root(u)
    nodes_v, edges_v = path_to_root(v)
    set_u = {node: k for k, node in enumerate(nodes_u)}
    meet = next(node for node in nodes_v if node in set_u)
    ku = set_u[meet]
    kv = nodes_v.index(meet)
    # Edge sequence: u -> meet, then reversed meet -> v, then closing edge.
    edge_seq = edges_u[:ku] + list(reversed(edges_v[:kv])) + [closing]
    node_seq = nodes_u[:ku] + [meet] + list(reversed(nodes_v[:kv]))
    cycle = []
    for k, (i, j) in enumerate(edge_seq):
        from_node = node_seq[k]
        forward = from_node == i  # traversed row -> column
        cycle.append((i, j, forward))
    return cycle
