"""Immutable bounded-degree graphs with adjacency-list queries."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np


class GraphFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph on vertices 0..n-1.

    `adjacency[v]` is the sorted tuple of neighbours.  An optional bipartition
    is stored as (L, R) with L = {0..k-1}; every edge must cross it.
    """

    n: int
    adjacency: Tuple[Tuple[int, ...], ...]
    max_degree: int
    bipartition: Optional[Tuple[Tuple[int, ...], Tuple[int, ...]]] = None
    _csr: Tuple[np.ndarray, np.ndarray] = field(default=None, repr=False, compare=False)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Tuple[int, int]],
                   bipartition_k: Optional[int] = None) -> "Graph":
        if n < 0:
            raise GraphFormatError("negative vertex count")
        nbrs: List[set] = [set() for _ in range(n)]
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise GraphFormatError(f"edge ({u}, {v}) out of range for n={n}")
            if u == v:
                raise GraphFormatError(f"self-loop at vertex {u}")
            if v in nbrs[u]:
                raise GraphFormatError(f"duplicate edge ({u}, {v})")
            nbrs[u].add(v)
            nbrs[v].add(u)
        adjacency = tuple(tuple(sorted(s)) for s in nbrs)
        max_degree = max((len(a) for a in adjacency), default=0)
        bip = None
        if bipartition_k is not None:
            k = bipartition_k
            if not 0 <= k <= n:
                raise GraphFormatError(f"bipartition size {k} out of range")
            for u in range(n):
                for v in adjacency[u]:
                    if (u < k) == (v < k):
                        raise GraphFormatError(f"edge ({u}, {v}) does not cross the declared bipartition")
            bip = (tuple(range(k)), tuple(range(k, n)))
        offsets = np.zeros(n + 1, dtype=np.int64)
        for v in range(n):
            offsets[v + 1] = offsets[v] + len(adjacency[v])
        targets = np.fromiter((w for a in adjacency for w in a), dtype=np.int64,
                              count=int(offsets[n]))
        return cls(n, adjacency, max_degree, bip, (offsets, targets))

    @property
    def csr(self) -> Tuple[np.ndarray, np.ndarray]:
        return self._csr

    def neighbors(self, v: int) -> Tuple[int, ...]:
        if not 0 <= v < self.n:
            raise IndexError(f"vertex {v} out of range")
        return self.adjacency[v]

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def edges(self) -> List[Tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in self.adjacency[u] if u < v]

    @property
    def m(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def is_connected_subset(self, vertices: Iterable[int]) -> bool:
        vs = set(vertices)
        if not vs:
            return False
        start = next(iter(vs))
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for w in self.adjacency[u]:
                if w in vs and w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(vs)

    def boundary(self, vertices: Iterable[int]) -> set:
        vs = set(vertices)
        out = set()
        for u in vs:
            for w in self.adjacency[u]:
                if w not in vs:
                    out.add(w)
        return out

    def induced_subgraph(self, keep: Sequence[int]) -> Tuple["Graph", Dict[int, int]]:
        """Induced subgraph relabelled densely; returns it with the old->new map."""
        index = {v: i for i, v in enumerate(keep)}
        edges = [(index[u], index[v]) for u in keep for v in self.adjacency[u]
                 if v in index and u < v]
        return Graph.from_edges(len(keep), edges), index

    def bfs_order(self, root: int) -> List[int]:
        seen = {root}
        order = [root]
        dq = deque([root])
        while dq:
            u = dq.popleft()
            for w in self.adjacency[u]:
                if w not in seen:
                    seen.add(w)
                    order.append(w)
                    dq.append(w)
        return order

    def serialize(self) -> str:
        lines = [f"{self.n} {self.m}"]
        lines += [f"{u} {v}" for u, v in self.edges()]
        if self.bipartition is not None:
            lines.append(f"bipartition {len(self.bipartition[0])}")
        return "\n".join(lines) + "\n"

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, Graph) and self.n == other.n
                and self.adjacency == other.adjacency and self.bipartition == other.bipartition)

    def __hash__(self) -> int:
        return hash((self.n, self.adjacency, self.bipartition))


def load_graph(text: str) -> Graph:
    """Parse the text graph format: `n m`, then m lines `u v`, optional `bipartition k`."""
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        rows.append((lineno, line.split()))
    if not rows:
        raise GraphFormatError("empty graph file")
    lineno, head = rows[0]
    if len(head) != 2:
        raise GraphFormatError(f"line {lineno}: header must be 'n m'")
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError as exc:
        raise GraphFormatError(f"line {lineno}: non-integer header") from exc
    if n < 0 or m < 0:
        raise GraphFormatError(f"line {lineno}: negative count")
    body = rows[1:]
    bip_k = None
    if body and body[-1][1][0] == "bipartition":
        lineno, toks = body[-1]
        if len(toks) != 2:
            raise GraphFormatError(f"line {lineno}: expected 'bipartition k'")
        try:
            bip_k = int(toks[1])
        except ValueError as exc:
            raise GraphFormatError(f"line {lineno}: bad bipartition size") from exc
        body = body[:-1]
    if len(body) != m:
        raise GraphFormatError(f"expected {m} edge lines, found {len(body)}")
    edges = []
    for lineno, toks in body:
        if len(toks) != 2:
            raise GraphFormatError(f"line {lineno}: edge lines are 'u v'")
        try:
            u, v = int(toks[0]), int(toks[1])
        except ValueError as exc:
            raise GraphFormatError(f"line {lineno}: non-integer vertex") from exc
        edges.append((u, v))
    try:
        return Graph.from_edges(n, edges, bip_k)
    except GraphFormatError as exc:
        raise GraphFormatError(str(exc)) from None


def neighbors(g: Graph, v: int) -> Tuple[int, ...]:
    return g.neighbors(v)


def distance2_graph(g: Graph) -> Tuple[Graph, Tuple[int, ...]]:
    """Graph on R where two vertices are adjacent iff they share a neighbour in L.

    Returns the graph (vertices relabelled 0..|R|-1) and the tuple mapping each
    new index back to its original R-vertex.
    """
    if g.bipartition is None:
        raise GraphFormatError("distance-two graph needs a declared bipartition")
    left, right = g.bipartition
    index = {v: i for i, v in enumerate(right)}
    edges = set()
    for u in left:
        nb = g.adjacency[u]
        for i in range(len(nb)):
            for j in range(i + 1, len(nb)):
                a, b = index[nb[i]], index[nb[j]]
                edges.add((min(a, b), max(a, b)))
    return Graph.from_edges(len(right), sorted(edges)), right


class ImplicitGraph:
    """Adjacency given by a callback; may describe an infinite graph.

    Vertices are arbitrary hashable values.  `max_degree` must bound every degree.
    """

    def __init__(self, neighbor_fn: Callable[[object], Sequence], max_degree: int):
        self._fn = neighbor_fn
        self.max_degree = max_degree
        self.n = None

    def neighbors(self, v) -> Sequence:
        out = self._fn(v)
        if len(out) > self.max_degree:
            raise ValueError(f"vertex {v!r} has degree {len(out)} > declared {self.max_degree}")
        return out


# -- fixture constructors -----------------------------------------------------


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def star_graph(leaves: int) -> Graph:
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def grid_graph(rows: int, cols: int, bipartite: bool = False) -> Graph:
    """rows x cols grid; with bipartite=True the even-parity cells come first."""
    cells = [(r, c) for r in range(rows) for c in range(cols)]
    if bipartite:
        cells.sort(key=lambda rc: ((rc[0] + rc[1]) % 2, rc))
    index = {rc: i for i, rc in enumerate(cells)}
    edges = []
    for (r, c), i in index.items():
        if (r + 1, c) in index:
            edges.append((i, index[(r + 1, c)]))
        if (r, c + 1) in index:
            edges.append((i, index[(r, c + 1)]))
    k = sum(1 for r, c in cells if (r + c) % 2 == 0) if bipartite else None
    return Graph.from_edges(len(cells), edges, k)


def random_regular_graph(n: int, d: int, rng: np.random.Generator) -> Graph:
    """Uniform-ish simple d-regular graph via the pairing model with restarts."""
    if (n * d) % 2 or d >= n:
        raise ValueError("no simple d-regular graph with these parameters")
    for _ in range(1000):
        stubs = np.repeat(np.arange(n), d)
        rng.shuffle(stubs)
        pairs = stubs.reshape(-1, 2)
        a, b = pairs[:, 0], pairs[:, 1]
        if np.any(a == b):
            continue
        key = np.minimum(a, b) * n + np.maximum(a, b)
        if len(np.unique(key)) != len(key):
            continue
        return Graph.from_edges(n, [(int(u), int(v)) for u, v in pairs])
    raise RuntimeError("pairing model failed to produce a simple graph")


def random_bounded_degree_graph(n: int, max_deg: int, rng: np.random.Generator,
                                connected: bool = True, tries: int = 1000) -> Graph:
    """Random connected graph with degrees <= max_deg (random spanning tree plus extra edges)."""
    for _ in range(tries):
        deg = [0] * n
        edges = set()
        order = list(rng.permutation(n))
        ok = True
        for i in range(1, n):
            cands = [u for u in order[:i] if deg[u] < max_deg]
            if not cands:
                ok = False
                break
            u = cands[int(rng.integers(len(cands)))]
            v = order[i]
            edges.add((min(u, v), max(u, v)))
            deg[u] += 1
            deg[v] += 1
        if not ok:
            continue
        for _ in range(n):
            u, v = (int(x) for x in rng.integers(n, size=2))
            if u != v and deg[u] < max_deg and deg[v] < max_deg and (min(u, v), max(u, v)) not in edges:
                edges.add((min(u, v), max(u, v)))
                deg[u] += 1
                deg[v] += 1
        g = Graph.from_edges(n, sorted(edges))
        if not connected or g.is_connected_subset(range(n)):
            return g
    raise RuntimeError("could not build a bounded-degree graph")
