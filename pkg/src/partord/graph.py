"""System topology, colorings, and the circular color distance."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    """Connected undirected graph on nodes ``1..n``.

    ``adjacency[i]`` is the sorted neighbor tuple N(i); index 0 is unused so
    node ids can be used directly.
    """

    n: int
    edges: frozenset
    adjacency: tuple = field(repr=False)

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self.adjacency[i]

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    @property
    def nodes(self) -> range:
        return range(1, self.n + 1)

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def channels(self) -> list[tuple[int, int]]:
        """All directed channels (k, l) with l in N(k), in sorted order."""
        return [(k, l) for k in self.nodes for l in self.adjacency[k]]

    def distances_from(self, src: int) -> list[int]:
        dist = [-1] * (self.n + 1)
        dist[src] = 0
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v in self.adjacency[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    def all_distances(self) -> list[list[int]]:
        return [[]] + [self.distances_from(i) for i in self.nodes]


def build_topology(n: int, edges: Iterable[Sequence[int]]) -> Topology:
    if n < 1:
        raise TopologyError(f"node count must be >= 1, got {n}")
    seen: set[tuple[int, int]] = set()
    adj: list[list[int]] = [[] for _ in range(n + 1)]
    for e in edges:
        a, b = int(e[0]), int(e[1])
        if not (1 <= a <= n and 1 <= b <= n):
            raise TopologyError(f"edge ({a}, {b}) has an endpoint outside 1..{n}")
        if a == b:
            raise TopologyError(f"self-loop at node {a}")
        key = (min(a, b), max(a, b))
        if key in seen:
            raise TopologyError(f"duplicate edge {key}")
        seen.add(key)
        adj[a].append(b)
        adj[b].append(a)
    topo = Topology(n, frozenset(seen), tuple(tuple(sorted(a)) for a in adj))
    unreached = [i for i, d in enumerate(topo.distances_from(1)) if i and d < 0]
    if unreached:
        raise TopologyError(f"graph is disconnected: nodes {unreached} unreachable from 1")
    return topo


def complete_graph(n: int) -> Topology:
    return build_topology(n, [(a, b) for a in range(1, n + 1) for b in range(a + 1, n + 1)])


def ring_graph(n: int) -> Topology:
    if n == 1:
        return build_topology(1, [])
    if n == 2:
        return build_topology(2, [(1, 2)])
    return build_topology(n, [(i, i % n + 1) for i in range(1, n + 1)])


def path_graph(n: int) -> Topology:
    return build_topology(n, [(i, i + 1) for i in range(1, n)])


def grid_graph(rows: int, cols: int) -> Topology:
    """Row-major grid; node (r, c) has id r*cols + c + 1."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c + 1
            if c + 1 < cols:
                edges.append((u, u + 1))
            if r + 1 < rows:
                edges.append((u, u + cols))
    return build_topology(rows * cols, edges)


@dataclass(frozen=True)
class Coloring:
    color: tuple  # color[i] for node i; index 0 unused
    ncolors: int

    def __getitem__(self, i: int) -> int:
        return self.color[i]


def make_coloring(colors: Sequence[int]) -> Coloring:
    """Build a coloring from a per-node sequence (node 1 first)."""
    cols = tuple(int(c) for c in colors)
    ncolors = max(cols) + 1 if cols else 1
    if min(cols, default=0) < 0 or set(cols) != set(range(ncolors)):
        raise TopologyError("colors must use every value in 0..ncolors-1")
    return Coloring((0,) + cols, ncolors)


def is_proper(t: Topology, c: Coloring) -> bool:
    return all(c[a] != c[b] for a, b in t.edges)


def greedy_coloring(t: Topology, order: Sequence[int] | None = None) -> Coloring:
    """Smallest-available-color sweep over ``order`` (ascending ids by default)."""
    order = list(order) if order is not None else list(t.nodes)
    if sorted(order) != list(t.nodes):
        raise TopologyError("order must be a permutation of the nodes")
    color = [-1] * (t.n + 1)
    for i in order:
        taken = {color[j] for j in t.neighbors(i)}
        c = 0
        while c in taken:
            c += 1
        color[i] = c
    return make_coloring(color[1:])


def uniform_coloring(t: Topology) -> Coloring:
    """Single color class: the coloring of an empty dependency graph."""
    return make_coloring([0] * t.n)


def color_partition(t: Topology, c: Coloring) -> tuple[list[frozenset], list[frozenset]]:
    """Per-node (C(i), C-bar(i)): lower-colored neighbors and the rest."""
    lower: list[frozenset] = [frozenset()]
    upper: list[frozenset] = [frozenset()]
    for i in t.nodes:
        lo = frozenset(j for j in t.neighbors(i) if c[j] < c[i])
        lower.append(lo)
        upper.append(frozenset(t.neighbors(i)) - lo)
    return lower, upper


def circular_distance(a: int, b: int, ncolors: int) -> int:
    if not (0 <= a < ncolors and 0 <= b < ncolors):
        raise ValueError(f"colors ({a}, {b}) out of range 0..{ncolors - 1}")
    return b - a if b >= a else b + ncolors - a


def bfs_tree(t: Topology, root: int = 1) -> tuple[list[int], list[int], list[list[int]]]:
    """BFS spanning tree: (parent, depth, children); parent[root] = 0."""
    parent = [0] * (t.n + 1)
    depth = [-1] * (t.n + 1)
    children: list[list[int]] = [[] for _ in range(t.n + 1)]
    depth[root] = 0
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in t.neighbors(u):
            if depth[v] < 0:
                depth[v] = depth[u] + 1
                parent[v] = u
                children[u].append(v)
                queue.append(v)
    return parent, depth, children
