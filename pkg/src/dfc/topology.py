"""Communication graphs for vehicle networks.

Vertices are numbered 1..n to match vehicle numbering everywhere (JSON, CSV,
public API). Internally adjacency is a boolean matrix indexed from 0.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np


class SpecificationError(ValueError):
    """Invalid construction parameters (platoon size, radius, edge list)."""


class UnreachableError(ValueError):
    """A vertex cannot be reached from the vehicle being analysed."""


@dataclass(frozen=True)
class PlatoonSpec:
    n: int
    k: int

    def __post_init__(self):
        if self.n < 2:
            raise SpecificationError(f"platoon needs n >= 2 vehicles, got n={self.n}")
        if not 1 <= self.k <= self.n - 1:
            raise SpecificationError(
                f"platoon radius must satisfy 1 <= k <= n-1, got n={self.n}, k={self.k}"
            )


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph without self-loops on vertices 1..n."""

    n: int
    adjacency: np.ndarray = field(repr=False)

    def __post_init__(self):
        adj = np.array(self.adjacency, dtype=bool)
        if adj.shape != (self.n, self.n):
            raise SpecificationError(f"adjacency must be {self.n}x{self.n}, got {adj.shape}")
        if np.any(np.diag(adj)):
            raise SpecificationError("self-loops are not allowed")
        if not np.array_equal(adj, adj.T):
            raise SpecificationError("adjacency must be symmetric")
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)

    @classmethod
    def from_edges(cls, edges: Iterable[Iterable[int]], n: int | None = None) -> "Graph":
        edges = [tuple(int(v) for v in e) for e in edges]
        for e in edges:
            if len(e) != 2:
                raise SpecificationError(f"edge must have two endpoints, got {e}")
            if e[0] == e[1]:
                raise SpecificationError(f"self-loop at vertex {e[0]}")
        top = max((max(e) for e in edges), default=0)
        n = top if n is None else n
        if n < 1:
            raise SpecificationError("graph needs at least one vertex")
        adj = np.zeros((n, n), dtype=bool)
        for a, b in edges:
            if not (1 <= a <= n and 1 <= b <= n):
                raise SpecificationError(f"edge ({a}, {b}) outside vertices 1..{n}")
            adj[a - 1, b - 1] = adj[b - 1, a - 1] = True
        return cls(n, adj)

    def __eq__(self, other):
        return (
            isinstance(other, Graph)
            and self.n == other.n
            and np.array_equal(self.adjacency, other.adjacency)
        )

    def __hash__(self):
        return hash((self.n, self.adjacency.tobytes()))

    def neighbors(self, i: int) -> list[int]:
        self._check(i)
        return [int(j) + 1 for j in np.flatnonzero(self.adjacency[i - 1])]

    def degree(self, i: int) -> int:
        self._check(i)
        return int(self.adjacency[i - 1].sum())

    @cached_property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def edges(self) -> list[tuple[int, int]]:
        rows, cols = np.nonzero(np.triu(self.adjacency))
        return [(int(a) + 1, int(b) + 1) for a, b in zip(rows, cols)]

    def observed(self, i: int) -> list[int]:
        """Vertices whose values vehicle i sees each step: itself, then neighbours."""
        return [i] + self.neighbors(i)

    def selection(self, i: int) -> np.ndarray:
        """The (d_i + 1) x n 0/1 matrix picking vehicle i's observed entries."""
        rows = [v - 1 for v in self.observed(i)]
        return np.eye(self.n)[rows]

    def is_complete(self) -> bool:
        return bool(np.all(self.adjacency | np.eye(self.n, dtype=bool)))

    def _check(self, i: int):
        if not 1 <= i <= self.n:
            raise IndexError(f"vertex {i} outside 1..{self.n}")


def build_platoon(spec: PlatoonSpec) -> Graph:
    """k-nearest-neighbour platoon: i ~ j iff 0 < |i - j| <= k."""
    idx = np.arange(spec.n)
    gap = np.abs(idx[:, None] - idx[None, :])
    return Graph(spec.n, (gap > 0) & (gap <= spec.k))


def platoon(n: int, k: int) -> Graph:
    return build_platoon(PlatoonSpec(n, k))


def hop_distances(g: Graph, i: int) -> np.ndarray:
    """BFS hop distance from i to every vertex; -1 marks unreachable ones."""
    g._check(i)
    dist = np.full(g.n, -1, dtype=int)
    dist[i - 1] = 0
    queue = deque([i - 1])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(g.adjacency[u]):
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def reachable_set(g: Graph, i: int) -> set[int]:
    return {int(v) + 1 for v in np.flatnonzero(hop_distances(g, i) >= 0)}


def eccentricity(g: Graph, i: int) -> int:
    dist = hop_distances(g, i)
    if np.any(dist < 0):
        missing = [int(v) + 1 for v in np.flatnonzero(dist < 0)]
        raise UnreachableError(f"vertices {missing} cannot reach vehicle {i}")
    return int(dist.max())


def is_connected(g: Graph) -> bool:
    return bool(np.all(hop_distances(g, 1) >= 0))


def _local_vertex_connectivity(adj: np.ndarray, s: int, t: int) -> int:
    """Max number of internally vertex-disjoint s-t paths (s, t non-adjacent).

    Unit-capacity max-flow on the split graph: vertex v becomes v_in -> v_out
    with capacity 1 (s and t uncapacitated), each undirected edge {u, v}
    becomes u_out -> v_in and v_out -> u_in. Augmenting paths by BFS.
    """
    n = adj.shape[0]
    big = n  # exceeds any possible flow
    size = 2 * n
    cap: dict[tuple[int, int], int] = {}
    nbrs: list[set[int]] = [set() for _ in range(size)]

    def arc(a, b, c):
        cap[(a, b)] = cap.get((a, b), 0) + c
        cap.setdefault((b, a), 0)
        nbrs[a].add(b)
        nbrs[b].add(a)

    for v in range(n):
        arc(2 * v, 2 * v + 1, big if v in (s, t) else 1)
    for u, v in zip(*np.nonzero(adj)):
        arc(2 * u + 1, 2 * v, big)

    source, sink = 2 * s + 1, 2 * t
    flow = 0
    while True:
        parent = {source: source}
        queue = deque([source])
        while queue and sink not in parent:
            a = queue.popleft()
            for b in nbrs[a]:
                if b not in parent and cap[(a, b)] > 0:
                    parent[b] = a
                    queue.append(b)
        if sink not in parent:
            return flow
        b = sink
        while b != source:
            a = parent[b]
            cap[(a, b)] -= 1
            cap[(b, a)] += 1
            b = a
        flow += 1


def local_vertex_connectivity(g: Graph, i: int, j: int) -> int:
    """Size of the smallest (j, i)-cut; for adjacent pairs returns n - 1."""
    g._check(i)
    g._check(j)
    if i == j:
        raise ValueError("cut between a vertex and itself is undefined")
    if g.adjacency[i - 1, j - 1]:
        return g.n - 1
    return _local_vertex_connectivity(g.adjacency, j - 1, i - 1)


def vertex_connectivity(g: Graph) -> int:
    """Minimum (j, i)-cut over non-adjacent pairs; n - 1 for complete graphs."""
    if g.n == 1:
        return 0
    if not is_connected(g):
        return 0
    if g.is_complete():
        return g.n - 1
    best = g.n - 1
    for s in range(g.n):
        for t in range(s + 1, g.n):
            if not g.adjacency[s, t]:
                best = min(best, _local_vertex_connectivity(g.adjacency, s, t))
    return best


def max_tolerable_faults(kappa: int) -> int:
    """Largest f with kappa >= 2f + 1."""
    return max((kappa - 1) // 2, 0)
