"""Simple undirected graphs, random generators and edge-list ingestion.

Every graph uses dense 0-indexed integer node ids. Generators are pure
functions of their parameters and seed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Graph",
    "GraphError",
    "EdgeListError",
    "GENERATORS",
    "from_edges",
    "gen_er",
    "gen_ba",
    "gen_ws",
    "gen_caveman",
    "gen_grid",
    "load_edge_list",
    "serialize_edge_list",
    "bundled_graph",
    "bundled_names",
    "giant_component",
    "permute",
    "is_connected",
]


NODES_DIRECTIVE = "# nodes:"


class GraphError(ValueError):
    """Invalid graph or generator parameters."""


class EdgeListError(GraphError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable simple undirected unweighted graph.

    ``edges`` is an ``(m, 2)`` int64 array with ``u < v`` on every row, sorted
    lexicographically. ``labels`` optionally maps ids back to external names.
    """

    n: int
    edges: np.ndarray
    labels: tuple[str, ...] | None = field(default=None)

    def __post_init__(self):
        self.edges.setflags(write=False)

    @property
    def m(self) -> int:
        return int(self.edges.shape[0])

    @cached_property
    def degree(self) -> np.ndarray:
        deg = np.bincount(self.edges.ravel(), minlength=self.n).astype(np.int64)
        deg.setflags(write=False)
        return deg

    @cached_property
    def neighbors(self) -> tuple[np.ndarray, ...]:
        """Sorted neighbour arrays, one per node."""
        src, dst = self.directed_edges
        splits = np.cumsum(np.bincount(src, minlength=self.n))[:-1]
        return tuple(np.split(dst, splits))

    @cached_property
    def directed_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Both orientations of every edge, sorted by (source, target)."""
        u, v = self.edges[:, 0], self.edges[:, 1]
        src = np.concatenate([u, v])
        dst = np.concatenate([v, u])
        order = np.lexsort((dst, src))
        return src[order], dst[order]

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.float64)
        if self.m:
            a[self.edges[:, 0], self.edges[:, 1]] = 1.0
            a[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return a

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.edges}

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self):
        return hash((self.n, self.edges.tobytes()))

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"


def from_edges(n: int, pairs: Iterable[tuple[int, int]], labels=None) -> Graph:
    """Build a graph from arbitrary pairs; duplicates and orientation are normalised."""
    if n < 1:
        raise GraphError("a graph needs at least one node")
    arr = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
    if arr.size:
        if arr.min() < 0 or arr.max() >= n:
            raise GraphError("edge endpoint out of range")
        if np.any(arr[:, 0] == arr[:, 1]):
            raise GraphError("self-loops are not allowed")
        arr = np.sort(arr, axis=1)
        arr = np.unique(arr, axis=0)
    return Graph(n, arr, tuple(labels) if labels is not None else None)


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def gen_er(n: int, p: float, seed=None) -> Graph:
    """Erdos-Renyi G(n, p)."""
    if n < 1:
        raise GraphError("n must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise GraphError(f"edge probability must lie in [0, 1], got {p}")
    rng = _rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.shape[0]) < p
    return Graph(n, np.stack([iu[keep], ju[keep]], axis=1).astype(np.int64))


def gen_ba(n: int, k: int, seed=None) -> Graph:
    """Barabasi-Albert preferential attachment grown from a star on k+1 nodes.

    Produces exactly ``k * (n - k)`` edges.
    """
    if not 1 <= k < n:
        raise GraphError(f"BA needs 1 <= k < n, got k={k}, n={n}")
    rng = _rng(seed)
    pairs = [(0, v) for v in range(1, k + 1)]
    # each node appears once per incident edge, so uniform picks are degree-proportional
    pool = [0] * k + list(range(1, k + 1))
    for new in range(k + 1, n):
        targets: set[int] = set()
        while len(targets) < k:
            targets.add(pool[int(rng.integers(len(pool)))])
        for t in sorted(targets):
            pairs.append((t, new))
            pool.extend((t, new))
    return from_edges(n, pairs)


def _ring_lattice(n: int, k: int) -> list[tuple[int, int]]:
    return [(u, (u + j) % n) for j in range(1, k // 2 + 1) for u in range(n)]


def gen_ws(n: int, k: int, p: float, seed=None, max_tries: int = 100) -> Graph:
    """Watts-Strogatz small world with n*k/2 edges.

    Rewiring keeps the edge count. A disconnected draw is discarded and
    redrawn from the same stream, up to ``max_tries`` times.
    """
    if k % 2:
        raise GraphError(f"k must be even, got {k}")
    if not 0 < k < n:
        raise GraphError(f"WS needs 0 < k < n, got k={k}, n={n}")
    if not 0.0 <= p <= 1.0:
        raise GraphError(f"rewire probability must lie in [0, 1], got {p}")
    rng = _rng(seed)
    for _ in range(max_tries):
        adj = [set() for _ in range(n)]
        lattice = _ring_lattice(n, k)
        for u, v in lattice:
            adj[u].add(v)
            adj[v].add(u)
        for u, v in lattice:
            if rng.random() >= p or len(adj[u]) >= n - 1:
                continue
            w = int(rng.integers(n))
            while w == u or w in adj[u]:
                w = int(rng.integers(n))
            adj[u].discard(v)
            adj[v].discard(u)
            adj[u].add(w)
            adj[w].add(u)
        g = from_edges(n, [(u, v) for u in range(n) for v in adj[u] if u < v])
        if p == 0.0 or is_connected(g):
            return g
    raise GraphError(f"no connected WS graph after {max_tries} draws")


def gen_caveman(cliques: int, size: int, seed=None) -> Graph:
    """Connected caveman graph: a ring of cliques.

    In each clique the edge between its first two members is rewired to
    the last member of the previous clique, keeping ``cliques * C(size, 2)``
    edges. Cliques of two cannot lose their only edge, so they are chained
    into a path instead. The construction is deterministic; ``seed`` is
    accepted for a uniform generator signature.
    """
    if cliques < 2 or size < 2:
        raise GraphError(f"caveman needs cliques >= 2 and size >= 2, got {cliques}, {size}")
    n = cliques * size
    pairs = set()
    for c in range(cliques):
        base = c * size
        for i in range(size):
            for j in range(i + 1, size):
                pairs.add((base + i, base + j))
    if size == 2:
        for c in range(cliques - 1):
            pairs.add((c * size + 1, (c + 1) * size))
        return from_edges(n, pairs)
    for c in range(cliques):
        base = c * size
        pairs.discard((base, base + 1))
        prev_last = (base - 1) % n
        pairs.add((min(base, prev_last), max(base, prev_last)))
    return from_edges(n, pairs)


def gen_grid(rows: int, cols: int) -> Graph:
    if rows < 1 or cols < 1:
        raise GraphError("grid dimensions must be >= 1")
    idx = np.arange(rows * cols).reshape(rows, cols)
    horiz = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
    vert = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
    return from_edges(rows * cols, np.concatenate([horiz, vert]))


GENERATORS = {
    "er": gen_er,
    "ba": gen_ba,
    "ws": gen_ws,
    "caveman": gen_caveman,
    "grid": gen_grid,
}


def load_edge_list(text: str) -> Graph:
    """Parse whitespace-separated ``u v`` lines into a graph.

    Labels become ids in first-appearance order; the original labels are kept
    on the returned graph. Blank lines and ``#`` comments are skipped, except
    a ``# nodes: a b c`` line, which registers labels up front (this is how
    isolated nodes and id order survive a round trip).
    """
    ids: dict[str, int] = {}
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith(NODES_DIRECTIVE):
            for tok in line[len(NODES_DIRECTIVE):].split():
                ids.setdefault(tok, len(ids))
            continue
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise EdgeListError(lineno, f"expected 2 tokens, got {len(tokens)}: {raw!r}")
        a, b = tokens
        if a == b:
            raise EdgeListError(lineno, f"self-loop on {a!r}")
        for tok in tokens:
            if tok not in ids:
                ids[tok] = len(ids)
        pairs.append((ids[a], ids[b]))
    if not ids:
        raise EdgeListError(0, "no edges found")
    return from_edges(len(ids), pairs, labels=list(ids))


def serialize_edge_list(g: Graph) -> str:
    lines = [NODES_DIRECTIVE + " " + " ".join(map(str, range(g.n)))]
    lines += [f"{u} {v}" for u, v in g.edges.tolist()]
    return "\n".join(lines) + "\n"


def _manifest() -> list[dict]:
    return json.loads(resources.files("netaural.data").joinpath("manifest.json").read_text())


def bundled_names() -> list[str]:
    return [entry["name"] for entry in _manifest()]


def bundled_graph(name: str) -> Graph:
    """One of the bundled real networks: karate, florentine, davis, lesmis."""
    for entry in _manifest():
        if entry["name"] == name:
            text = resources.files("netaural.data").joinpath(entry["file"]).read_text(encoding="utf-8")
            return load_edge_list(text)
    raise GraphError(f"unknown bundled graph {name!r}; choose from {bundled_names()}")


def _components(g: Graph) -> list[list[int]]:
    seen = np.zeros(g.n, dtype=bool)
    comps = []
    nbrs = g.neighbors
    for s in range(g.n):
        if seen[s]:
            continue
        seen[s] = True
        stack, comp = [s], []
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in nbrs[v]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(int(w))
        comps.append(sorted(comp))
    return comps


def is_connected(g: Graph) -> bool:
    return len(_components(g)) == 1


def giant_component(g: Graph) -> Graph:
    """Largest connected component, relabelled densely in original id order.

    Ties go to the component holding the smallest node id.
    """
    comps = _components(g)
    # components are discovered in order of their smallest id, so max() keeps the first tie
    best = max(comps, key=len)
    if len(best) == g.n:
        return g
    remap = np.full(g.n, -1, dtype=np.int64)
    remap[best] = np.arange(len(best))
    e = remap[g.edges]
    e = e[(e >= 0).all(axis=1)]
    labels = tuple(g.labels[i] for i in best) if g.labels is not None else None
    return Graph(len(best), e, labels)


def permute(g: Graph, perm: Sequence[int]) -> Graph:
    """Relabel node ``v`` as ``perm[v]``."""
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (g.n,) or not np.array_equal(np.sort(perm), np.arange(g.n)):
        raise GraphError("perm must be a permutation of 0..n-1")
    labels = None
    if g.labels is not None:
        inv = np.argsort(perm)
        labels = [g.labels[i] for i in inv]
    return from_edges(g.n, perm[g.edges], labels=labels)

