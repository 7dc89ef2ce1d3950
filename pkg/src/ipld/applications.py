"""Benchmark problem builders: network utility maximization and DSL spectrum
management.

The NUM model allocates a rate to each (source, destination) pair routed on a
fixed shortest path; per-node log utilities with a quadratic tracking penalty
are maximized under per-edge capacity windows and per-pair rate caps. The DSL
model allocates per-user powers on each channel, maximizing linear-plus-log
utilities under a per-user coupling budget and per-user power caps.

Data generators are seeded and split their random streams per field, so the
draws for one field do not depend on how many values another field consumed.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .blocks import BoxBarrierFamily, SmoothFamily
from .composites import BoxWindowComposite, UpperBoundComposite
from .model import BlockGroup, ProblemInstance
from .scalars import GscParams

__all__ = [
    "Network",
    "synthetic_network",
    "shortest_paths",
    "bfs_ball",
    "NumData",
    "generate_num",
    "build_num_instance",
    "DslData",
    "generate_dsl",
    "build_dsl_instance",
    "LogUtilityFamily",
    "PowerLogFamily",
]


# ---------------------------------------------------------------------------
# networks and routing


@dataclass(frozen=True)
class Network:
    """Undirected graph: node count plus a sorted, deduplicated edge list."""

    nodes: int
    edges: tuple

    def __post_init__(self):
        for u, v in self.edges:
            if not (0 <= u < self.nodes and 0 <= v < self.nodes) or u == v:
                raise ValueError(f"bad edge ({u}, {v}) for {self.nodes} nodes")

    @property
    def edge_index(self) -> dict:
        return {e: i for i, e in enumerate(self.edges)}

    def adjacency(self) -> list:
        adj = [[] for _ in range(self.nodes)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return [sorted(a) for a in adj]


def _canon_edges(edges):
    seen = set()
    out = []
    for u, v in edges:
        if u == v:
            continue
        e = (min(u, v), max(u, v))
        if e not in seen:
            seen.add(e)
            out.append(e)
    return tuple(sorted(out))


def synthetic_network(nodes: int, seed: int = 0, extra_edge_frac: float = 0.3) -> Network:
    """Seeded connected random network: a random attachment tree plus a
    fraction of extra random edges."""
    if nodes < 2:
        raise ValueError("need at least 2 nodes")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    edges = [(int(rng.integers(0, k)), k) for k in range(1, nodes)]
    n_extra = int(round(extra_edge_frac * nodes))
    for _ in range(n_extra):
        u = int(rng.integers(0, nodes))
        v = int(rng.integers(0, nodes))
        if u != v:
            edges.append((min(u, v), max(u, v)))
    return Network(nodes, _canon_edges(edges))


def _bfs_tree(adj, source):
    """Parent array of the BFS tree; ties broken by smallest-index parent."""
    parent = [-1] * len(adj)
    parent[source] = source
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if parent[v] < 0:
                parent[v] = u
                queue.append(v)
    return parent


def shortest_paths(network: Network, pairs) -> dict:
    """Unweighted shortest path per pair as a tuple of edge indices.

    BFS visits neighbors in ascending index order, which makes the
    tie-breaking deterministic (smallest-index predecessor). Self-pairs map
    to the empty path; unreachable pairs raise.
    """
    adj = network.adjacency()
    eidx = network.edge_index
    sources = sorted({i for i, _ in pairs})
    parents = {s: _bfs_tree(adj, s) for s in sources}
    routes = {}
    for i, j in pairs:
        if i == j:
            routes[(i, j)] = ()
            continue
        par = parents[i]
        if par[j] < 0:
            raise ValueError(f"node {j} unreachable from {i}")
        path = []
        v = j
        while v != i:
            u = par[v]
            path.append(eidx[(min(u, v), max(u, v))])
            v = u
        routes[(i, j)] = tuple(reversed(path))
    return routes


def bfs_ball(network: Network, max_nodes: int, root: int = 0) -> Network:
    """Induced subgraph on the first ``max_nodes`` nodes discovered by BFS
    from ``root``, relabeled to 0..max_nodes-1. Sub-network sampling for
    scaling down large parsed graphs; the sampling rule is a choice of this
    implementation."""
    adj = network.adjacency()
    order = []
    seen = {root}
    queue = deque([root])
    while queue and len(order) < max_nodes:
        u = queue.popleft()
        order.append(u)
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    keep = {u: i for i, u in enumerate(order)}
    edges = [
        (keep[u], keep[v]) for u, v in network.edges if u in keep and v in keep
    ]
    return Network(len(order), _canon_edges(edges))


# ---------------------------------------------------------------------------
# NUM


@dataclass
class NumData:
    """Per-node utility data and per-edge capacity windows.

    ``dests[i]`` lists node i's destination nodes (ascending); ``d[i]`` and
    ``r[i]`` hold the matching utility weights and target rates. ``lower``
    and ``upper`` are indexed by the network's edge list (zero rows mark
    edges no selected pair routes over).
    """

    dests: list
    d: list
    mu: np.ndarray
    r: list
    lower: np.ndarray
    upper: np.ndarray
    rate_cap: float = 1.0
    rho: float = 0.01

    @property
    def num_vars(self) -> int:
        return sum(len(v) for v in self.dests)


class LogUtilityFamily(SmoothFamily):
    """Blocks -ln(d^T x + mu) + (rho/2) ||x - r||^2 (negated node utility)."""

    def __init__(self, d, mu, r, rho):
        d = np.atleast_2d(np.asarray(d, dtype=float))
        super().__init__(d.shape[0], d.shape[1], GscParams(2.0, 3.0))
        self.d = d
        self.mu = np.asarray(mu, dtype=float)
        self.r = np.atleast_2d(np.asarray(r, dtype=float))
        self.rho = float(rho)

    def _s(self, X):
        return (self.d * X).sum(axis=1) + self.mu

    def value(self, X):
        pen = 0.5 * self.rho * ((X - self.r) ** 2).sum(axis=1)
        return -np.log(self._s(X)) + pen

    def grad(self, X):
        s = self._s(X)
        return -self.d / s[:, None] + self.rho * (X - self.r)

    def hess(self, X):
        w = self.d / self._s(X)[:, None]
        H = w[:, :, None] * w[:, None, :]
        idx = np.arange(self.dim)
        H[:, idx, idx] += self.rho
        return H

    def in_domain(self, X):
        return self._s(X) > 0.0


def generate_num(network: Network, seed: int = 0, pairs_per_node: int | None = None) -> NumData:
    """Draw NUM data on a network, reproducibly per seed.

    Targets r, weights d, and offsets mu are uniform on (0, 1); the edge
    windows are L_e = (1 - U(0, 0.5)) * load_e and U_e = (1 + U(0, 0.5)) *
    load_e with load the per-edge sum of target rates over routed paths; the
    rate cap is 1 and the tracking penalty 0.01. ``pairs_per_node`` restricts
    each node to that many random destinations (all other reachable nodes if
    None); the selection is the support of the utility weights.
    """
    ss = np.random.SeedSequence(seed)
    rng_dest = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    rng_d = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2,)))
    rng_mu = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(3,)))
    rng_r = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(4,)))
    rng_b = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(5,)))
    del ss

    adj = network.adjacency()
    dests = []
    for i in range(network.nodes):
        par = _bfs_tree(adj, i)
        reachable = np.array([j for j in range(network.nodes) if j != i and par[j] >= 0])
        if pairs_per_node is not None and pairs_per_node < reachable.size:
            pick = rng_dest.choice(reachable, size=pairs_per_node, replace=False)
            reachable = np.sort(pick)
        dests.append(reachable.astype(int))

    d = [rng_d.uniform(0.0, 1.0, size=len(v)) for v in dests]
    mu = rng_mu.uniform(0.0, 1.0, size=network.nodes)
    r = [rng_r.uniform(0.0, 1.0, size=len(v)) for v in dests]

    pairs = [(i, int(j)) for i in range(network.nodes) for j in dests[i]]
    routes = shortest_paths(network, pairs)
    load = np.zeros(len(network.edges))
    for i in range(network.nodes):
        for j, rate in zip(dests[i], r[i]):
            for e in routes[(i, int(j))]:
                load[e] += rate
    lower = (1.0 - rng_b.uniform(0.0, 0.5, size=load.size)) * load
    upper = (1.0 + rng_b.uniform(0.0, 0.5, size=load.size)) * load
    return NumData(dests=dests, d=d, mu=mu, r=r, lower=lower, upper=upper)


def build_num_instance(network: Network, data: NumData) -> ProblemInstance:
    """Assemble the separable instance of the NUM model.

    Blocks are nodes (variables: rates to the selected destinations); the
    coupling rows are edges, entry 1 where the pair's path crosses the edge.
    Edges carrying no flow are dropped with a warning; duplicated coupling
    rows (edges crossed by exactly the same pairs) are merged by
    intersecting their windows, which removes redundant rows without
    changing the feasible set.
    """
    pairs = [(i, int(j)) for i in range(network.nodes) for j in data.dests[i]]
    routes = shortest_paths(network, pairs)
    n_edges = len(network.edges)

    # per-edge variable membership, used for pruning and duplicate detection
    cols_per_edge = [[] for _ in range(n_edges)]
    var_map = []
    for col, (i, j) in enumerate(pairs):
        var_map.append((i, j))
        for e in routes[(i, j)]:
            cols_per_edge[e].append(col)

    used = [e for e in range(n_edges) if cols_per_edge[e]]
    dropped = n_edges - len(used)
    if dropped:
        warnings.warn(f"dropping {dropped} edge(s) with no routed flow", stacklevel=2)

    signature = {}
    merged_rows = []  # (representative edge, lower, upper)
    row_of_edge = {}
    for e in used:
        sig = tuple(cols_per_edge[e])
        if sig in signature:
            ridx = signature[sig]
            rep, lo, up = merged_rows[ridx]
            merged_rows[ridx] = (rep, max(lo, data.lower[e]), min(up, data.upper[e]))
        else:
            ridx = len(merged_rows)
            signature[sig] = ridx
            merged_rows.append((e, data.lower[e], data.upper[e]))
        row_of_edge[e] = ridx
    if len(merged_rows) < len(used):
        warnings.warn(
            f"merged {len(used) - len(merged_rows)} duplicated edge row(s) by "
            "window intersection",
            stacklevel=2,
        )
    n = len(merged_rows)
    lower = np.array([lo for _, lo, _ in merged_rows])
    upper = np.array([up for _, _, up in merged_rows])

    # group nodes by block dimension
    dims = {}
    for i in range(network.nodes):
        dims.setdefault(len(data.dests[i]), []).append(i)

    groups = []
    order = []
    for q in sorted(dims):
        nodes = dims[q]
        if q == 0:
            continue
        B = len(nodes)
        A = np.zeros((B, n, q))
        for b, i in enumerate(nodes):
            for c, j in enumerate(data.dests[i]):
                for e in routes[(i, int(j))]:
                    A[b, row_of_edge[e], c] = 1.0
        smooth = LogUtilityFamily(
            np.stack([data.d[i] for i in nodes]),
            np.array([data.mu[i] for i in nodes]),
            np.stack([data.r[i] for i in nodes]),
            data.rho,
        )
        barrier = BoxBarrierFamily(0.0, data.rate_cap, B, q)
        groups.append(BlockGroup(smooth, barrier, A))
        order.extend(nodes)

    composite = BoxWindowComposite(lower, upper)
    meta = {
        "model": "num",
        "network": network,
        "data": data,
        "var_map": var_map,
        "node_order": order,
        "row_edges": [rep for rep, _, _ in merged_rows],
        "lower": lower,
        "upper": upper,
    }
    return ProblemInstance(groups, composite, meta=meta)


# ---------------------------------------------------------------------------
# DSL spectrum management


@dataclass
class DslData:
    """Per-channel utility data for the DSL model.

    Shapes: a, c, offsets (M, m); gains (M, m, m); budget, power_cap (m,).
    c must be componentwise nonnegative and the affine forms
    gains @ x + offsets positive at the domain midpoint.
    """

    a: np.ndarray
    c: np.ndarray
    offsets: np.ndarray
    gains: np.ndarray
    budget: np.ndarray
    power_cap: np.ndarray

    @property
    def channels(self) -> int:
        return self.a.shape[0]

    @property
    def users(self) -> int:
        return self.a.shape[1]


class PowerLogFamily(SmoothFamily):
    """Blocks a^T x - c^T ln(G x + offset) on the domain G x + offset > 0."""

    def __init__(self, a, c, gains, offsets):
        a = np.atleast_2d(np.asarray(a, dtype=float))
        super().__init__(a.shape[0], a.shape[1], GscParams(2.0, 3.0))
        self.a = a
        self.c = np.atleast_2d(np.asarray(c, dtype=float))
        if np.any(self.c < 0.0):
            raise ValueError("log weights c must be nonnegative")
        self.gains = np.asarray(gains, dtype=float)
        self.offsets = np.atleast_2d(np.asarray(offsets, dtype=float))

    def _s(self, X):
        return np.matmul(self.gains, X[..., None])[..., 0] + self.offsets

    def value(self, X):
        return (self.a * X).sum(axis=1) - (self.c * np.log(self._s(X))).sum(axis=1)

    def grad(self, X):
        w = self.c / self._s(X)
        return self.a - np.matmul(w[:, None, :], self.gains)[:, 0, :]

    def hess(self, X):
        w = self.c / self._s(X) ** 2
        return np.matmul(np.swapaxes(self.gains, 1, 2) * w[:, None, :], self.gains)

    def in_domain(self, X):
        return np.all(self._s(X) > 0.0, axis=1)


def generate_dsl(users: int, channels: int, seed: int = 0) -> DslData:
    """Seeded synthetic DSL-shaped data (stands in for the proprietary
    line measurements; shapes and signs match the model).

    Gains are diagonally dominant with nonnegative crosstalk, so the affine
    forms stay positive on the whole power box; log weights lie in [1, 2],
    keeping each block standard self-concordant without rescaling.
    """
    mk = lambda k: np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
    rng_a, rng_c, rng_g, rng_h, rng_b, rng_l = (mk(k) for k in range(1, 7))

    a = rng_a.uniform(0.0, 0.1, size=(channels, users))
    c = rng_c.uniform(1.0, 2.0, size=(channels, users))
    offsets = rng_g.uniform(0.5, 1.5, size=(channels, users))
    gains = rng_h.uniform(0.0, 0.1, size=(channels, users, users)) / max(users - 1, 1)
    idx = np.arange(users)
    gains[:, idx, idx] = rng_h.uniform(0.8, 1.2, size=(channels, users))
    power_cap = rng_l.uniform(0.5, 1.5, size=users)
    budget = channels * power_cap * rng_b.uniform(0.15, 0.35, size=users)
    return DslData(a=a, c=c, offsets=offsets, gains=gains, budget=budget, power_cap=power_cap)


def build_dsl_instance(data: DslData) -> ProblemInstance:
    """Assemble the separable instance of the DSL model.

    Blocks are channels (variables: per-user powers); the coupling is the
    sum over channels (stacked identities, full row rank by construction);
    the composite is the upper budget; the sets are the power boxes.
    """
    M, m = data.channels, data.users
    mid = np.broadcast_to(0.5 * data.power_cap, (M, m))
    s_mid = np.einsum("bij,bj->bi", data.gains, mid) + data.offsets
    if np.any(s_mid <= 0.0):
        raise ValueError("empty interior: affine forms nonpositive at the box midpoint")

    smooth = PowerLogFamily(data.a, data.c, data.gains, data.offsets)
    barrier = BoxBarrierFamily(0.0, np.broadcast_to(data.power_cap, (M, m)), M, m)
    A = np.broadcast_to(np.eye(m), (M, m, m)).copy()
    composite = UpperBoundComposite(data.budget)
    meta = {"model": "dsl", "data": data}
    return ProblemInstance([BlockGroup(smooth, barrier, A)], composite, meta=meta)
