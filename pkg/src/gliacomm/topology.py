"""3D lattice tissue graphs and the four topology builders.

Cells live on an I x J x K lattice; cell id = i + I*j + I*J*k.  All
topologies respect a hard degree cap of six, except the guaranteed
transmitter-receiver edge of the shortcut topology.  Builders are
deterministic given the same numpy Generator seed.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .params import ErdosRenyi, LinkRadius, RegularDegree, Shortcut, TopologySpec

MAX_DEGREE = 6

_UNIT_STEPS = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))


@dataclass
class TissueGraph:
    dims: tuple                      # (I, J, K)
    edges: list                      # sorted list of (a, b), a < b
    uncapped_edges: frozenset = frozenset()  # edges exempt from the degree cap
    neighbors: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.neighbors:
            self.neighbors = {c: [] for c in range(self.n_cells)}
            for a, b in self.edges:
                self.neighbors[a].append(b)
                self.neighbors[b].append(a)

    @property
    def n_cells(self) -> int:
        I, J, K = self.dims
        return I * J * K

    def degree(self, cell: int) -> int:
        return len(self.neighbors[cell])

    def check_invariants(self) -> None:
        n = self.n_cells
        seen = set()
        for a, b in self.edges:
            assert 0 <= a < n and 0 <= b < n, "edge endpoint out of bounds"
            assert a < b, "edges must be stored as ordered pairs"
            assert (a, b) not in seen, "duplicate edge"
            seen.add((a, b))
        for c in range(n):
            capped = [x for x in self.neighbors[c]
                      if tuple(sorted((c, x))) not in self.uncapped_edges]
            assert len(capped) <= MAX_DEGREE, f"cell {c} exceeds degree cap"


def cell_id(coord, dims) -> int:
    i, j, k = coord
    I, J, _ = dims
    return i + I * j + I * J * k


def cell_coord(cid: int, dims):
    I, J, _ = dims
    k, rem = divmod(cid, I * J)
    j, i = divmod(rem, I)
    return (i, j, k)


def _check_dims(dims):
    I, J, K = dims
    if I < 1 or J < 1 or K < 1 or I * J * K < 2:
        raise ValueError(f"lattice {dims} must contain at least 2 cells")


def _in_bounds(c, dims):
    return all(0 <= c[a] < dims[a] for a in range(3))


def _lattice_neighbors(cid: int, dims):
    i, j, k = cell_coord(cid, dims)
    out = []
    for di, dj, dk in _UNIT_STEPS:
        c = (i + di, j + dj, k + dk)
        if _in_bounds(c, dims):
            out.append(cell_id(c, dims))
    return out


class _EdgeSet:
    def __init__(self):
        self.edges = set()
        self.degree = {}

    def can_add(self, a, b):
        if a == b:
            return False
        e = (min(a, b), max(a, b))
        if e in self.edges:
            return False
        return (self.degree.get(a, 0) < MAX_DEGREE
                and self.degree.get(b, 0) < MAX_DEGREE)

    def add(self, a, b, force=False):
        e = (min(a, b), max(a, b))
        if e in self.edges:
            return False
        if not force and not self.can_add(a, b):
            return False
        self.edges.add(e)
        self.degree[a] = self.degree.get(a, 0) + 1
        self.degree[b] = self.degree.get(b, 0) + 1
        return True

    def sorted(self):
        return sorted(self.edges)


def build_regular_degree(dims, n: int, rng: np.random.Generator) -> TissueGraph:
    """Each cell linked to n of its (equidistant) unit lattice neighbours.

    Boundary cells get fewer where the lattice runs out.  The seed only
    breaks ties among the equidistant neighbours.
    """
    _check_dims(dims)
    if not 1 <= n <= MAX_DEGREE:
        raise ValueError("n must be in [1, 6]")
    es = _EdgeSet()
    n_cells = dims[0] * dims[1] * dims[2]
    for c in range(n_cells):
        nbrs = _lattice_neighbors(c, dims)
        order = rng.permutation(len(nbrs))
        picked = 0
        for idx in order:
            if picked >= n:
                break
            b = nbrs[idx]
            if es.add(c, b) or (min(c, b), max(c, b)) in es.edges:
                picked += 1
    return TissueGraph(dims, es.sorted())


def build_link_radius(dims, d: float, n_max: int,
                      rng: np.random.Generator) -> TissueGraph:
    """Per cell, z ~ Uniform{0..n_max} links drawn inside Euclidean radius d."""
    _check_dims(dims)
    if d <= 0:
        raise ValueError("d must be > 0")
    n_cells = dims[0] * dims[1] * dims[2]
    coords = np.array([cell_coord(c, dims) for c in range(n_cells)], dtype=float)
    es = _EdgeSet()
    d2 = d * d
    for c in range(n_cells):
        delta = coords - coords[c]
        dist2 = np.einsum("ij,ij->i", delta, delta)
        candidates = np.flatnonzero((dist2 <= d2) & (dist2 > 0))
        if candidates.size == 0:
            continue
        z = int(rng.integers(0, n_max + 1))
        if z == 0:
            continue
        picks = rng.choice(candidates, size=min(z, candidates.size), replace=False)
        for b in picks:
            es.add(c, int(b))
    return TissueGraph(dims, es.sorted())


def build_shortcut(dims, a: int, n: int, tx: int, rx: int,
                   rng: np.random.Generator) -> TissueGraph:
    """Regular-degree base plus index-arithmetic shortcuts and a tx-rx edge.

    Shortcut partners are cells whose linear index distance is a multiple
    of a; the degree cap holds for those, and is relaxed only for the
    guaranteed transmitter-receiver edge.
    """
    _check_dims(dims)
    if a < 1:
        raise ValueError("a must be >= 1")
    n_cells = dims[0] * dims[1] * dims[2]
    if not (0 <= tx < n_cells and 0 <= rx < n_cells) or tx == rx:
        raise ValueError("tx and rx must be distinct in-bounds cells")
    base = build_regular_degree(dims, n, rng)
    es = _EdgeSet()
    for x, y in base.edges:
        es.add(x, y, force=True)
    for c in range(n_cells):
        for partner in range(c + a, n_cells, a):
            es.add(c, partner)
    uncapped = frozenset()
    e = (min(tx, rx), max(tx, rx))
    if e not in es.edges:
        es.add(tx, rx, force=True)
        uncapped = frozenset({e})
    return TissueGraph(dims, es.sorted(), uncapped_edges=uncapped)


def build_erdos_renyi(dims, p: float, rng: np.random.Generator) -> TissueGraph:
    """One unconditional uniform link per cell, then p-governed extra slots.

    Each cell first attempts one link to a uniformly random other cell;
    its remaining up-to-five slots are each filled with probability p by
    another uniform draw.  The degree cap may reject attempts, and
    connectedness is not guaranteed.
    """
    _check_dims(dims)
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    n_cells = dims[0] * dims[1] * dims[2]
    es = _EdgeSet()
    for c in range(n_cells):
        first = int(rng.integers(0, n_cells - 1))
        if first >= c:
            first += 1
        es.add(c, first)
        for _ in range(MAX_DEGREE - 1):
            if rng.random() < p:
                b = int(rng.integers(0, n_cells - 1))
                if b >= c:
                    b += 1
                es.add(c, b)
    return TissueGraph(dims, es.sorted())


def build_topology(dims, spec: TopologySpec, rng: np.random.Generator,
                   tx: int = 0, rx: int = 1) -> TissueGraph:
    if isinstance(spec, RegularDegree):
        return build_regular_degree(dims, spec.n, rng)
    if isinstance(spec, LinkRadius):
        return build_link_radius(dims, spec.d, spec.n_max, rng)
    if isinstance(spec, Shortcut):
        return build_shortcut(dims, spec.a, spec.n, tx, rx, rng)
    if isinstance(spec, ErdosRenyi):
        return build_erdos_renyi(dims, spec.p, rng)
    raise TypeError(f"unknown topology spec {spec!r}")


# --- statistics and export --------------------------------------------------

def bfs_distances(g: TissueGraph, source: int):
    """Hop distances from source; unreachable cells get -1."""
    dist = [-1] * g.n_cells
    dist[source] = 0
    q = deque([source])
    while q:
        c = q.popleft()
        for b in g.neighbors[c]:
            if dist[b] < 0:
                dist[b] = dist[c] + 1
                q.append(b)
    return dist


def connected_components(g: TissueGraph):
    comp = [-1] * g.n_cells
    comps = []
    for start in range(g.n_cells):
        if comp[start] >= 0:
            continue
        members = []
        comp[start] = len(comps)
        q = deque([start])
        while q:
            c = q.popleft()
            members.append(c)
            for b in g.neighbors[c]:
                if comp[b] < 0:
                    comp[b] = len(comps)
                    q.append(b)
        comps.append(members)
    return comps


def graph_stats(g: TissueGraph, source: int = None) -> dict:
    """Mean degree, mean shortest path and component sizes.

    The mean shortest path is taken over ordered pairs inside the
    component containing `source` (largest component when omitted).
    """
    comps = connected_components(g)
    sizes = sorted((len(c) for c in comps), reverse=True)
    if source is None:
        members = max(comps, key=len)
    else:
        members = next(c for c in comps if source in c)
    total, pairs = 0, 0
    for c in members:
        dist = bfs_distances(g, c)
        for b in members:
            if b != c:
                total += dist[b]
                pairs += 1
    mean_sp = total / pairs if pairs else 0.0
    mean_degree = 2 * len(g.edges) / g.n_cells
    return {"mean_degree": mean_degree,
            "mean_shortest_path": mean_sp,
            "connected_component_sizes": sizes}


def export_edge_list(g: TissueGraph, path) -> None:
    with open(path, "w") as fh:
        for a, b in g.edges:
            fh.write(f"{a} {b}\n")


def export_stats(g: TissueGraph, path, source: int = None) -> None:
    with open(path, "w") as fh:
        json.dump(graph_stats(g, source), fh, indent=2)
        fh.write("\n")
