"""Directed graphs, weighted subgraphs and the shortest-path primitives.

Node sets are plain sorted tuples of ints (see :func:`node_set`); the
canonical form makes every set-valued function permutation invariant by
construction.
"""
from __future__ import annotations

import hashlib
import heapq
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .errors import EdgeListParseError, ValidationError

NodeSet = tuple  # sorted, duplicate-free tuple of node ids

HOP_DIRECTIONS = ("out", "in", "both")


def node_set(nodes: Iterable[int] = ()) -> tuple[int, ...]:
    return tuple(sorted({int(v) for v in nodes}))


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable directed graph on nodes ``0..n-1``.

    Edges are stored sorted by ``(src, dst)``; an edge is referred to by its
    position in that order.
    """

    n: int
    src: np.ndarray
    dst: np.ndarray

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]]) -> "Graph":
        pairs = {(int(u), int(v)) for u, v in edges}
        for u, v in pairs:
            if u == v:
                raise ValidationError(f"self-loop on node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValidationError(f"edge ({u}, {v}) out of range for n={n}")
        ordered = sorted(pairs)
        src = np.array([u for u, _ in ordered], dtype=np.int64)
        dst = np.array([v for _, v in ordered], dtype=np.int64)
        src.setflags(write=False)
        dst.setflags(write=False)
        return cls(int(n), src, dst)

    @property
    def m(self) -> int:
        return len(self.src)

    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.src.tolist(), self.dst.tolist()))

    @cached_property
    def _out_ptr(self) -> np.ndarray:
        return np.searchsorted(self.src, np.arange(self.n + 1))

    @cached_property
    def _in_order(self) -> np.ndarray:
        return np.lexsort((self.src, self.dst))

    @cached_property
    def _in_ptr(self) -> np.ndarray:
        return np.searchsorted(self.dst[self._in_order], np.arange(self.n + 1))

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {e: i for i, e in enumerate(self.edges())}

    def out_neighbors(self, u: int) -> np.ndarray:
        return self.dst[self._out_ptr[u]:self._out_ptr[u + 1]]

    def in_neighbors(self, u: int) -> np.ndarray:
        idx = self._in_order[self._in_ptr[u]:self._in_ptr[u + 1]]
        return self.src[idx]

    def in_edge_ids(self, u: int) -> np.ndarray:
        return self._in_order[self._in_ptr[u]:self._in_ptr[u + 1]]

    @cached_property
    def out_degree(self) -> np.ndarray:
        return np.diff(self._out_ptr)

    @cached_property
    def in_degree(self) -> np.ndarray:
        return np.diff(self._in_ptr)

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        data = np.ones(self.m, dtype=np.int8)
        return sparse.csr_matrix((data, (self.src, self.dst)), shape=(self.n, self.n))

    @cached_property
    def digest(self) -> str:
        h = hashlib.sha256(f"{self.n}:".encode())
        h.update(np.ascontiguousarray(self.src, dtype="<i8").tobytes())
        h.update(np.ascontiguousarray(self.dst, dtype="<i8").tobytes())
        return h.hexdigest()

    def to_edge_list(self) -> str:
        lines = [f"# n={self.n}"] + [f"{u} {v}" for u, v in self.edges()]
        return "\n".join(lines) + "\n"


def load_edge_list(text: str) -> Graph:
    """Parse ``src dst`` lines; ``#`` lines and blank lines are skipped.

    ``n`` is one more than the largest id seen. A ``# n=<count>`` header, as
    written by :meth:`Graph.to_edge_list`, preserves trailing isolated nodes.
    """
    edges = []
    n = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.replace(" ", "").startswith("#n="):
                try:
                    n = max(n, int(line.split("=", 1)[1]))
                except ValueError:
                    raise EdgeListParseError(lineno, raw, "bad node-count header") from None
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListParseError(lineno, raw)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise EdgeListParseError(lineno, raw) from None
        if u < 0 or v < 0:
            raise EdgeListParseError(lineno, raw, "negative node id")
        if u == v:
            raise ValidationError(f"line {lineno}: self-loop on node {u}")
        edges.append((u, v))
        n = max(n, u + 1, v + 1)
    return Graph.from_edges(n, edges)


def generate_er(n: int, m: int, seed: int) -> Graph:
    """Uniform random digraph with exactly ``m`` distinct non-loop edges."""
    if n < 0 or m < 0 or m > n * (n - 1):
        raise ValidationError(f"cannot place {m} directed edges on {n} nodes")
    rng = np.random.default_rng(seed)
    flat = rng.choice(n * (n - 1), size=m, replace=False) if m else np.empty(0, dtype=np.int64)
    src = flat // (n - 1) if m else flat
    dst = flat % (n - 1) if m else flat
    dst = dst + (dst >= src)  # skip the diagonal
    return Graph.from_edges(n, zip(src.tolist(), dst.tolist()))


def generate_powerlaw(n: int, attach: int, seed: int) -> Graph:
    """Preferential-attachment digraph.

    Node ``t`` links to ``min(attach, t)`` distinct earlier nodes chosen with
    probability proportional to in-degree + 1, giving a heavy-tailed
    in-degree sequence.
    """
    if not 1 <= attach < max(n, 2):
        raise ValidationError(f"attach must satisfy 1 <= attach < n (got attach={attach}, n={n})")
    rng = np.random.default_rng(seed)
    indeg = np.zeros(n, dtype=np.float64)
    edges = []
    for t in range(1, n):
        fitness = indeg[:t] + 1.0
        picks = rng.choice(t, size=min(attach, t), replace=False, p=fitness / fitness.sum())
        for v in picks.tolist():
            edges.append((t, v))
            indeg[v] += 1
    return Graph.from_edges(n, edges)


@dataclass(frozen=True, eq=False)
class WeightedSubgraph:
    """Subset of a parent graph's edges with strictly positive lengths.

    Used both for live-edge realizations of the diffusion model and for
    the random subgraphs that define features.
    """

    parent: Graph
    edge_ids: np.ndarray
    weight: np.ndarray
    _validated: bool = field(default=False, repr=False)

    def __post_init__(self):
        ids = np.asarray(self.edge_ids, dtype=np.int64)
        w = np.asarray(self.weight, dtype=np.float64)
        if ids.shape != w.shape:
            raise ValidationError("edge_ids and weight must have the same length")
        if len(ids):
            if ids.min() < 0 or ids.max() >= self.parent.m:
                raise ValidationError("live edge not present in the parent graph")
            if len(np.unique(ids)) != len(ids):
                raise ValidationError("duplicate live edge")
        if not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise ValidationError("subgraph weights must be finite and > 0")
        order = np.argsort(ids, kind="stable")
        ids, w = ids[order], w[order]
        ids.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "edge_ids", ids)
        object.__setattr__(self, "weight", w)

    @classmethod
    def full(cls, g: Graph, weight: float = 1.0) -> "WeightedSubgraph":
        return cls(g, np.arange(g.m), np.full(g.m, float(weight)))

    @property
    def n(self) -> int:
        return self.parent.n

    @property
    def src(self) -> np.ndarray:
        return self.parent.src[self.edge_ids]

    @property
    def dst(self) -> np.ndarray:
        return self.parent.dst[self.edge_ids]

    @cached_property
    def csr(self) -> sparse.csr_matrix:
        return sparse.csr_matrix((self.weight, (self.src, self.dst)), shape=(self.n, self.n))

    def to_json(self) -> dict:
        return {"edges": [[int(u), int(v), float(w)] for u, v, w in zip(self.src, self.dst, self.weight)]}

    @classmethod
    def from_json(cls, g: Graph, obj: dict) -> "WeightedSubgraph":
        index = g.edge_index
        ids, ws = [], []
        for u, v, w in obj["edges"]:
            key = (int(u), int(v))
            if key not in index:
                raise ValidationError(f"edge {key} not in parent graph")
            ids.append(index[key])
            ws.append(float(w))
        return cls(g, np.array(ids, dtype=np.int64), np.array(ws, dtype=np.float64))

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def multi_source_shortest_dist(g: WeightedSubgraph, sources: Iterable[int]) -> np.ndarray:
    """Distance from the nearest source to every node (``inf`` if unreachable).

    Plain label-setting Dijkstra; kept deliberately simple because it is the
    reference the vectorized paths are checked against.
    """
    n = g.n
    dist = np.full(n, np.inf)
    csr = g.csr
    indptr, indices, data = csr.indptr, csr.indices, csr.data
    heap = []
    for s in node_set(sources):
        if not 0 <= s < n:
            raise ValidationError(f"source {s} out of range")
        dist[s] = 0.0
        heap.append((0.0, s))
    heapq.heapify(heap)
    done = np.zeros(n, dtype=bool)
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            nd = d + data[k]
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def bfs_shortest_dist(g: WeightedSubgraph, sources: Iterable[int]) -> np.ndarray:
    """Hop-count specialization for subgraphs whose weights are all 1.0."""
    if g.weight.size and not np.all(g.weight == 1.0):
        raise ValidationError("bfs_shortest_dist requires unit weights")
    dist = np.full(g.n, np.inf)
    frontier = list(node_set(sources))
    dist[frontier] = 0.0
    csr = g.csr
    level = 0.0
    while frontier:
        level += 1.0
        nxt = []
        for u in frontier:
            for v in csr.indices[csr.indptr[u]:csr.indptr[u + 1]]:
                if dist[v] == np.inf:
                    dist[v] = level
                    nxt.append(v)
        frontier = nxt
    return dist


def _hop_matrix(G: Graph, direction: str) -> sparse.csr_matrix:
    if direction not in HOP_DIRECTIONS:
        raise ValidationError(f"direction must be one of {HOP_DIRECTIONS}")
    A = G.adjacency
    if direction == "in":
        return A.T.tocsr()
    if direction == "both":
        return ((A + A.T) > 0).astype(np.int8).tocsr()
    return A


def jhop_neighborhood(G: Graph, S: Iterable[int], j: int, direction: str = "out") -> tuple[int, ...]:
    """Nodes within ``j`` hops of ``S`` (``S`` included)."""
    if j < 0:
        raise ValidationError("hop count must be >= 0")
    A = _hop_matrix(G, direction)
    seen = np.zeros(G.n, dtype=bool)
    frontier = np.array(node_set(S), dtype=np.int64)
    seen[frontier] = True
    for _ in range(j):
        if not len(frontier):
            break
        reached = np.unique(A[frontier].indices)
        frontier = reached[~seen[reached]]
        seen[frontier] = True
    return tuple(np.flatnonzero(seen).tolist())


def jhop_table(G: Graph, j: int, direction: str = "out") -> np.ndarray:
    """Boolean ``(n, n)`` matrix whose row ``u`` marks ``H_{{u}}^j``."""
    if j < 0:
        raise ValidationError("hop count must be >= 0")
    A = _hop_matrix(G, direction).astype(bool)
    reach = sparse.identity(G.n, dtype=bool, format="csr")
    step = reach
    for _ in range(j):
        step = (step @ A).astype(bool)
        new = (reach + step).astype(bool)
        if new.nnz == reach.nnz:
            break
        reach = new
    return reach.toarray()
