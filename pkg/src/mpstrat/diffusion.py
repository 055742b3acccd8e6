"""Ground-truth triggering model with two competing cascades."""
from __future__ import annotations

import enum
import hashlib
import heapq
import json
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import dijkstra

from ._reach import Coverage, ReachIndex, beats
from .errors import ValidationError
from .graph import Graph, WeightedSubgraph, node_set

_EPS = np.finfo(np.float64).eps


class TiePolicy(enum.Enum):
    """Who takes a node reached by both cascades at the same instant."""

    MISINFO_WINS = "misinfo_wins"
    POSITIVE_WINS = "positive_wins"

    @property
    def positive_wins(self) -> bool:
        return self is TiePolicy.POSITIVE_WINS


@dataclass(frozen=True, eq=False)
class TriggeringModel:
    """Uniform single-in-neighbour trigger sets with Weibull edge delays.

    ``scale`` and ``shape`` are per-edge Weibull parameters aligned with
    ``graph`` edge ids.
    """

    graph: Graph
    scale: np.ndarray
    shape: np.ndarray
    trigger: str = "uniform_single"

    def __post_init__(self):
        if self.trigger != "uniform_single":
            raise ValidationError(f"unsupported trigger family {self.trigger!r}")
        scale = np.asarray(self.scale, dtype=np.float64)
        shape = np.asarray(self.shape, dtype=np.float64)
        if scale.shape != (self.graph.m,) or shape.shape != (self.graph.m,):
            raise ValidationError("need one (scale, shape) pair per edge")
        if np.any(scale < 1) or np.any(shape < 1):
            raise ValidationError("Weibull parameters must be >= 1")
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "shape", shape)

    @classmethod
    def random(cls, graph: Graph, seed: int, low: int = 1, high: int = 10) -> "TriggeringModel":
        rng = np.random.default_rng(seed)
        scale = rng.integers(low, high + 1, size=graph.m)
        shape = rng.integers(low, high + 1, size=graph.m)
        return cls(graph, scale, shape)

    def trigger_probability(self, edge_id: int) -> float:
        """Probability that edge ``(u, v)`` is live, i.e. ``1/|N_v^-|``."""
        return 1.0 / self.graph.in_degree[self.graph.dst[edge_id]]

    @cached_property
    def digest(self) -> str:
        h = hashlib.sha256(self.graph.digest.encode())
        h.update(self.scale.astype("<f8").tobytes())
        h.update(self.shape.astype("<f8").tobytes())
        return h.hexdigest()

    def to_json(self) -> dict:
        g = self.graph
        return {
            "n": g.n,
            "edges": [[int(u), int(v), float(a), float(b)]
                      for u, v, a, b in zip(g.src, g.dst, self.scale, self.shape)],
            "trigger": self.trigger,
        }

    @classmethod
    def from_json(cls, obj: dict, graph: Graph | None = None) -> "TriggeringModel":
        rows = obj["edges"]
        if graph is None:
            graph = Graph.from_edges(int(obj["n"]), [(u, v) for u, v, _, _ in rows])
        elif graph.n != int(obj["n"]):
            raise ValidationError("model node count does not match the graph")
        index = graph.edge_index
        scale = np.zeros(graph.m)
        shape = np.zeros(graph.m)
        for u, v, a, b in rows:
            e = index.get((int(u), int(v)))
            if e is None:
                raise ValidationError(f"model edge ({u}, {v}) not in graph")
            scale[e], shape[e] = a, b
        if len(rows) != graph.m:
            raise ValidationError("model must list every graph edge exactly once")
        return cls(graph, scale, shape, obj.get("trigger", "uniform_single"))


def weibull_inverse_cdf(u: np.ndarray, scale: np.ndarray, shape: np.ndarray) -> np.ndarray:
    u = np.clip(u, _EPS, 1.0 - _EPS)
    return scale * (-np.log(u)) ** (1.0 / shape)


def sample_realization(model: TriggeringModel, rng: np.random.Generator) -> WeightedSubgraph:
    """Draw every node's trigger set and every live edge's delay."""
    g = model.graph
    deg = g.in_degree
    has_in = np.flatnonzero(deg > 0)
    offset = np.floor(rng.random(len(has_in)) * deg[has_in]).astype(np.int64)
    offset = np.minimum(offset, deg[has_in] - 1)
    live = g._in_order[g._in_ptr[has_in] + offset]
    delay = weibull_inverse_cdf(rng.random(len(live)), model.scale[live], model.shape[live])
    return WeightedSubgraph(g, live, delay)


def sample_stream(seed: int, index: int) -> np.random.Generator:
    """Independent stream for Monte-Carlo sample ``index`` under ``seed``."""
    return np.random.default_rng([int(seed), int(index)])


@dataclass(frozen=True)
class DiffusionOutcome:
    m_active: tuple[int, ...]
    p_active: tuple[int, ...]
    inactive: tuple[int, ...]
    activation_time: tuple[float, ...] = ()


def simulate(realization: WeightedSubgraph, M: Iterable[int], P: Iterable[int],
             tie: TiePolicy = TiePolicy.MISINFO_WINS) -> DiffusionOutcome:
    """Discrete-event propagation of both cascades over a live-edge graph."""
    M, P = node_set(M), node_set(P)
    if set(M) & set(P):
        raise ValidationError("attacker and protector seeds overlap")
    n = realization.n
    MIS, POS = 0, 1
    # at equal times the winning cascade is popped first
    rank = {MIS: 1, POS: 0} if tie.positive_wins else {MIS: 0, POS: 1}
    state = np.full(n, -1, dtype=np.int64)
    when = np.full(n, np.inf)
    csr = realization.csr
    heap = [(0.0, rank[MIS], v, MIS) for v in M] + [(0.0, rank[POS], v, POS) for v in P]
    heapq.heapify(heap)
    last_t = 0.0
    while heap:
        t, _, v, c = heapq.heappop(heap)
        assert t >= last_t
        last_t = t
        if state[v] >= 0:
            continue
        state[v] = c
        when[v] = t
        for k in range(csr.indptr[v], csr.indptr[v + 1]):
            u = csr.indices[k]
            if state[u] < 0:
                heapq.heappush(heap, (t + csr.data[k], rank[c], u, c))
    return DiffusionOutcome(
        m_active=tuple(np.flatnonzero(state == MIS).tolist()),
        p_active=tuple(np.flatnonzero(state == POS).tolist()),
        inactive=tuple(np.flatnonzero(state < 0).tolist()),
        activation_time=tuple(when.tolist()),
    )


def saved_by_simulation(realization: WeightedSubgraph, M, P, tie=TiePolicy.MISINFO_WINS) -> int:
    """Nodes misinformed without ``P`` but not with it, for one realization."""
    without = set(simulate(realization, M, (), tie).m_active)
    with_p = set(simulate(realization, M, P, tie).m_active)
    return len(without - with_p)


class RealizationSet:
    """A fixed batch of live-edge realizations, reused for paired estimates.

    Sample ``i`` is drawn from ``sample_stream(seed, i)``, so the batch is
    independent of evaluation order and of how it is chunked.
    """

    def __init__(self, model: TriggeringModel, count: int, seed: int):
        if count < 1:
            raise ValidationError("need at least one realization")
        self.model = model
        self.count = int(count)
        self.seed = int(seed)
        self.realizations = [sample_realization(model, sample_stream(seed, i)) for i in range(count)]

    @property
    def n(self) -> int:
        return self.model.graph.n

    @cached_property
    def index(self) -> ReachIndex:
        return ReachIndex(self.realizations)

    @cached_property
    def _block(self) -> sparse.csr_matrix:
        n = self.n
        src = np.concatenate([r.src + i * n for i, r in enumerate(self.realizations)])
        dst = np.concatenate([r.dst + i * n for i, r in enumerate(self.realizations)])
        w = np.concatenate([r.weight for r in self.realizations])
        N = n * self.count
        return sparse.csr_matrix((w, (src, dst)), shape=(N, N))

    def block_dist(self, S: Sequence[int]) -> np.ndarray:
        """``(count, n)`` distances from ``S`` in every realization at once."""
        S = np.asarray(node_set(S), dtype=np.int64)
        if not len(S):
            return np.full((self.count, self.n), np.inf)
        idx = (S[None, :] + self.n * np.arange(self.count)[:, None]).ravel()
        d = dijkstra(self._block, directed=True, indices=idx, min_only=True)
        return d.reshape(self.count, self.n)

    def saved_counts(self, M, P, tie: TiePolicy = TiePolicy.MISINFO_WINS,
                     dist_m: np.ndarray | None = None) -> np.ndarray:
        """Per-realization number of nodes saved by ``P`` against ``M``."""
        M, P = node_set(M), node_set(P)
        if set(M) & set(P):
            raise ValidationError("attacker and protector seeds overlap")
        if not M or not P:
            return np.zeros(self.count, dtype=np.int64)
        dM = self.block_dist(M) if dist_m is None else dist_m
        dP = self.block_dist(P)
        saved = np.isfinite(dM) & beats(tie.positive_wins)(dP, dM)
        return saved.sum(axis=1)

    def coverage(self, M, tie: TiePolicy = TiePolicy.MISINFO_WINS) -> Coverage:
        return self.index.coverage(node_set(M), tie.positive_wins)


def _mean_stderr(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=np.float64)
    if len(x) < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(len(x)))


def prevention_value(model: TriggeringModel, M, P, n_sims: int = 10000, seed: int = 0,
                     tie: TiePolicy = TiePolicy.MISINFO_WINS, engine: str = "distance",
                     chunk: int = 2000) -> tuple[float, float]:
    """Monte-Carlo estimate of ``f(M, P | empty)`` and its standard error.

    The with-``P`` and without-``P`` runs of each sample share one
    realization. ``engine="simulate"`` runs the event simulator twice per
    sample; ``engine="distance"`` counts the same quantity from shortest
    paths over all realizations in a chunk at once.
    """
    M, P = node_set(M), node_set(P)
    if set(M) & set(P):
        raise ValidationError("attacker and protector seeds overlap")
    if n_sims < 1:
        raise ValidationError("n_sims must be >= 1")
    if not M or not P:
        return 0.0, 0.0
    if engine == "simulate":
        vals = [saved_by_simulation(sample_realization(model, sample_stream(seed, i)), M, P, tie)
                for i in range(n_sims)]
        return _mean_stderr(np.array(vals))
    if engine != "distance":
        raise ValidationError(f"unknown engine {engine!r}")
    vals = []
    for start in range(0, n_sims, chunk):
        batch = _Chunk(model, range(start, min(n_sims, start + chunk)), seed)
        vals.append(batch.saved_counts(M, P, tie))
    return _mean_stderr(np.concatenate(vals))


class _Chunk(RealizationSet):
    def __init__(self, model, indices, seed):
        self.model = model
        self.seed = int(seed)
        self.realizations = [sample_realization(model, sample_stream(seed, i)) for i in indices]
        self.count = len(self.realizations)


def model_from_file(path, graph: Graph | None = None) -> TriggeringModel:
    with open(path) as fh:
        return TriggeringModel.from_json(json.load(fh), graph)
