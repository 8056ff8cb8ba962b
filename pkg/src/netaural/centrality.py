"""Ground-truth centrality measures.

Normalisations: degree is raw; closeness is scaled by component size
(Wasserman-Faust); betweenness counts each unordered pair once and divides
by (n-1)(n-2)/2; eigenvector is L2-normalised and non-negative.
"""
from __future__ import annotations

import io
import itertools
from collections import deque

import numpy as np

from .graphs import Graph

MEASURES = ("degree", "closeness", "betweenness", "eigenvector")
NAIVE_ORACLE_MAX_N = 12


class ConvergenceError(RuntimeError):
    pass


def degree_centrality(g: Graph) -> np.ndarray:
    return g.degree.astype(np.float64)


def _bfs_distances(g: Graph, source: int) -> np.ndarray:
    dist = np.full(g.n, -1, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    nbrs = g.neighbors
    while queue:
        v = queue.popleft()
        for w in nbrs[v]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def closeness_centrality(g: Graph) -> np.ndarray:
    out = np.zeros(g.n)
    if g.n < 2:
        return out
    for v in range(g.n):
        dist = _bfs_distances(g, v)
        reach = dist[dist > 0]
        if reach.size == 0:
            continue
        r1 = reach.size  # reachable nodes besides v
        out[v] = (r1 / reach.sum()) * (r1 / (g.n - 1))
    return out


def betweenness_centrality(g: Graph) -> np.ndarray:
    """Brandes' dependency accumulation, one BFS per source."""
    n = g.n
    bc = np.zeros(n)
    nbrs = g.neighbors
    for s in range(n):
        stack = []
        preds: list[list[int]] = [[] for _ in range(n)]
        sigma = np.zeros(n)
        sigma[s] = 1.0
        dist = np.full(n, -1, dtype=np.int64)
        dist[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            stack.append(v)
            for w in nbrs[v]:
                w = int(w)
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = np.zeros(n)
        while stack:
            w = stack.pop()
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                bc[w] += delta[w]
    # every unordered pair was visited from both ends
    bc /= 2.0
    if n > 2:
        bc /= (n - 1) * (n - 2) / 2.0
    else:
        bc[:] = 0.0
    return bc


def naive_betweenness_oracle(g: Graph) -> np.ndarray:
    """Betweenness by explicit enumeration of all shortest paths (tiny graphs only)."""
    n = g.n
    if n > NAIVE_ORACLE_MAX_N:
        raise ValueError(f"naive oracle limited to n <= {NAIVE_ORACLE_MAX_N}")
    nbrs = [set(map(int, x)) for x in g.neighbors]

    def shortest_paths(s, t):
        paths, frontier = [], [[s]]
        while frontier and not paths:
            nxt = []
            for path in frontier:
                for w in sorted(nbrs[path[-1]]):
                    if w in path:
                        continue
                    if w == t:
                        paths.append(path + [w])
                    else:
                        nxt.append(path + [w])
            frontier = nxt
        return paths

    bc = np.zeros(n)
    for s, t in itertools.combinations(range(n), 2):
        paths = shortest_paths(s, t)
        if not paths:
            continue
        for v in range(n):
            if v in (s, t):
                continue
            bc[v] += sum(v in p for p in paths) / len(paths)
    if n > 2:
        bc /= (n - 1) * (n - 2) / 2.0
    else:
        bc[:] = 0.0
    return bc


def eigenvector_centrality(g: Graph, tol: float = 1e-10, max_iter: int = 1000) -> np.ndarray:
    """Principal eigenvector of the adjacency matrix by power iteration.

    Iterates with ``A + I`` so bipartite graphs do not oscillate; the
    eigenvectors are those of ``A``.
    """
    if g.m == 0:
        raise ValueError("eigenvector centrality needs at least one edge")
    src, dst = g.directed_edges
    x = np.full(g.n, 1.0 / np.sqrt(g.n))
    for _ in range(max_iter):
        y = x + np.bincount(dst, weights=x[src], minlength=g.n)
        y /= np.linalg.norm(y)
        if np.linalg.norm(y - x) < tol:
            return y
        x = y
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")


_FUNCS = {
    "degree": degree_centrality,
    "closeness": closeness_centrality,
    "betweenness": betweenness_centrality,
    "eigenvector": eigenvector_centrality,
}


def compute(g: Graph, measure: str, **kwargs) -> np.ndarray:
    try:
        fn = _FUNCS[measure]
    except KeyError:
        raise ValueError(f"unknown measure {measure!r}; choose from {', '.join(MEASURES)}") from None
    return fn(g, **kwargs)


def to_csv(values: np.ndarray, measure: str) -> str:
    buf = io.StringIO()
    buf.write("node_id,measure,value\n")
    for v, x in enumerate(values):
        buf.write(f"{v},{measure},{float(x)!r}\n")
    return buf.getvalue()
