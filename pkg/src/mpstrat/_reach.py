"""Sparse all-sources distance index over a stack of weighted subgraphs.

For one attacker ``M`` the distance feature of every subgraph becomes a
coverage function: candidate ``u`` covers cell ``(i, v)`` when
``dist_i(u, v)`` beats ``dist_i(M, v)`` under the tie rule and ``v`` is
reachable from ``M`` in subgraph ``i``.  ``dist_i(S, v)`` is a minimum over
``u in S``, so the feature of ``S`` is the number of cells covered by the
union of its members' rows.  :class:`Coverage` stores those rows as CSR.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import dijkstra

from .graph import WeightedSubgraph


def beats(tie_positive_wins: bool):
    return np.less_equal if tie_positive_wins else np.less


class ReachIndex:
    """Every finite ``dist_i(u, v)``, ``u != v``, as flat COO arrays."""

    def __init__(self, subgraphs: Sequence[WeightedSubgraph]):
        if not subgraphs:
            raise ValueError("need at least one subgraph")
        self.n = subgraphs[0].n
        self.K = len(subgraphs)
        owners, srcs, dsts, dists = [], [], [], []
        for i, g in enumerate(subgraphs):
            sources = np.unique(g.src)
            if not len(sources):
                continue
            D = dijkstra(g.csr, directed=True, indices=sources)
            r, c = np.nonzero(np.isfinite(D))
            keep = c != sources[r]
            r, c = r[keep], c[keep]
            owners.append(np.full(len(r), i, dtype=np.int64))
            srcs.append(sources[r])
            dsts.append(c)
            dists.append(D[r, c])
        cat = (lambda xs, dt: np.concatenate(xs).astype(dt) if xs else np.empty(0, dtype=dt))
        self.owner = cat(owners, np.int64)
        self.src = cat(srcs, np.int64)
        self.dst = cat(dsts, np.int64)
        self.dist = cat(dists, np.float64)
        self.cell = self.owner * self.n + self.dst
        # entries grouped by source node for quick "rows with source in M" selection
        order = np.argsort(self.src, kind="stable")
        self._by_src = order
        self._src_ptr = np.searchsorted(self.src[order], np.arange(self.n + 1))

    @property
    def nnz(self) -> int:
        return len(self.src)

    def _entries_from(self, nodes: np.ndarray) -> np.ndarray:
        if not len(nodes):
            return np.empty(0, dtype=np.int64)
        parts = [self._by_src[self._src_ptr[u]:self._src_ptr[u + 1]] for u in nodes]
        return np.concatenate(parts)

    def source_dist(self, M: Sequence[int]) -> np.ndarray:
        """``(K, n)`` matrix of ``dist_i(M, v)``."""
        dM = np.full(self.K * self.n, np.inf)
        M = np.asarray(M, dtype=np.int64)
        if len(M):
            dM.reshape(self.K, self.n)[:, M] = 0.0
            e = self._entries_from(M)
            np.minimum.at(dM, self.cell[e], self.dist[e])
        return dM.reshape(self.K, self.n)

    def coverage(self, M: Sequence[int], positive_wins: bool = False) -> "Coverage":
        dM = self.source_dist(M).ravel()
        cmp = beats(positive_wins)
        target = dM[self.cell]
        keep = np.isfinite(target) & cmp(self.dist, target)
        rows = self.src[keep]
        cols = self.cell[keep]
        # every node is at distance 0 from itself in every subgraph
        self_cells = np.arange(self.K * self.n)
        self_ok = np.isfinite(dM) & cmp(0.0, dM)
        rows = np.concatenate([rows, self_cells[self_ok] % self.n])
        cols = np.concatenate([cols, self_cells[self_ok]])
        csr = sparse.csr_matrix(
            (np.ones(len(rows), dtype=bool), (rows, cols)), shape=(self.n, self.K * self.n)
        )
        csr.sum_duplicates()
        csr.sort_indices()
        return Coverage(self.n, self.K, csr, dM.reshape(self.K, self.n))


class Coverage:
    """Per-attacker coverage rows; see the module docstring."""

    def __init__(self, n: int, K: int, csr: sparse.csr_matrix, dist_m: np.ndarray):
        self.n = n
        self.K = K
        self.indptr = csr.indptr
        self.indices = csr.indices.astype(np.int64)
        self.dist_m = dist_m
        self.reachable = np.isfinite(dist_m)

    def row(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def covered_mask(self, S: Sequence[int]) -> np.ndarray:
        mask = np.zeros(self.K * self.n, dtype=bool)
        for u in S:
            mask[self.row(u)] = True
        return mask

    def counts(self, S: Sequence[int]) -> np.ndarray:
        """Feature vector: number of covered cells per subgraph."""
        cells = np.flatnonzero(self.covered_mask(S))
        return np.bincount(cells // self.n, minlength=self.K)

    def gains(self, cand: np.ndarray, colw: np.ndarray, covered: np.ndarray) -> np.ndarray:
        """Weight of still-uncovered cells in each candidate's row.

        Each row is summed on its own, in the same order whatever other
        rows are requested, so per-candidate and batched calls agree bit
        for bit.
        """
        cand = np.asarray(cand, dtype=np.int64)
        starts = self.indptr[cand]
        ends = self.indptr[cand + 1]
        lens = ends - starts
        out = np.zeros(len(cand))
        if lens.sum() == 0:
            return out
        idx = np.concatenate([self.indices[s:e] for s, e in zip(starts, ends)])
        vals = np.where(covered[idx], 0.0, colw[idx])
        offs = np.concatenate([[0], np.cumsum(lens)[:-1]])
        nz = lens > 0
        out[nz] = np.add.reduceat(vals, offs[nz])
        return out
