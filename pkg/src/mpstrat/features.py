"""Random-subgraph distance features and the nonnegative linear score."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence, Union

import numpy as np

from ._reach import Coverage, ReachIndex, beats
from .diffusion import TiePolicy, TriggeringModel, weibull_inverse_cdf
from .errors import ValidationError
from .graph import Graph, WeightedSubgraph, multi_source_shortest_dist, node_set


@dataclass(frozen=True)
class IidEdges:
    """Keep each edge independently with probability ``p``; constant length ``w``."""

    p: float
    w: float = 1.0

    def __post_init__(self):
        if not 0 < self.p <= 1:
            raise ValidationError("inclusion probability must be in (0, 1]")
        if not self.w > 0:
            raise ValidationError("edge length must be > 0")

    def label(self) -> str:
        return f"iid:{self.p:g}:{self.w:g}"

    def sample(self, G: Graph, rng: np.random.Generator) -> WeightedSubgraph:
        keep = np.flatnonzero(rng.random(G.m) < self.p)
        return WeightedSubgraph(G, keep, np.full(len(keep), float(self.w)))


@dataclass(frozen=True, eq=False)
class ModelMatched:
    """Subgraphs drawn like the hidden model: edge into ``v`` kept w.p. ``1/indeg(v)``,
    length drawn from that edge's Weibull delay. Only usable when the model is known."""

    model: TriggeringModel

    def label(self) -> str:
        return "matched"

    def sample(self, G: Graph, rng: np.random.Generator) -> WeightedSubgraph:
        if G is not self.model.graph and G.digest != self.model.graph.digest:
            raise ValidationError("model graph differs from the bank graph")
        prob = 1.0 / G.in_degree[G.dst]
        keep = np.flatnonzero(rng.random(G.m) < prob)
        lengths = weibull_inverse_cdf(rng.random(len(keep)), self.model.scale[keep], self.model.shape[keep])
        return WeightedSubgraph(G, keep, lengths)


FeatureDistribution = Union[IidEdges, ModelMatched]


def parse_distribution(text: str, model: TriggeringModel | None = None) -> FeatureDistribution:
    """``"iid:<p>:<w>"`` or ``"matched"`` (the latter needs the model)."""
    if text == "matched":
        if model is None:
            raise ValidationError("'matched' features need the triggering model")
        return ModelMatched(model)
    parts = text.split(":")
    if parts[0] != "iid" or len(parts) not in (2, 3):
        raise ValidationError(f"bad feature distribution {text!r}")
    try:
        return IidEdges(float(parts[1]), float(parts[2]) if len(parts) == 3 else 1.0)
    except ValueError:
        raise ValidationError(f"bad feature distribution {text!r}") from None


@dataclass(frozen=True, eq=False)
class FeatureBank:
    graph: Graph
    subgraphs: tuple
    distribution: FeatureDistribution
    seed: int
    tie: TiePolicy = TiePolicy.MISINFO_WINS

    @property
    def K(self) -> int:
        return len(self.subgraphs)

    @cached_property
    def index(self) -> ReachIndex:
        return ReachIndex(self.subgraphs)

    def coverage(self, M) -> Coverage:
        return self.index.coverage(node_set(M), self.tie.positive_wins)

    def prefix(self, K: int) -> "FeatureBank":
        """The first ``K`` subgraphs; equal to a fresh bank built with ``K``."""
        return FeatureBank(self.graph, self.subgraphs[:K], self.distribution, self.seed, self.tie)

    @cached_property
    def digest(self) -> str:
        h = hashlib.sha256(self.graph.digest.encode())
        h.update(self.tie.value.encode())
        for g in self.subgraphs:
            h.update(len(g.edge_ids).to_bytes(8, "little"))
            h.update(g.edge_ids.astype("<i8").tobytes())
            h.update(g.weight.astype("<f8").tobytes())
        return h.hexdigest()

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "distribution": self.distribution.label(),
            "tie": self.tie.value,
            "graph": self.graph.digest,
            "n": self.graph.n,
            "parent_edges": [[int(a), int(b)] for a, b in zip(self.graph.src, self.graph.dst)],
            "bank_hash": self.digest,
            "subgraphs": [g.to_json() for g in self.subgraphs],
        }

    @classmethod
    def from_json(cls, obj: dict, graph: Graph | None = None,
                  model: TriggeringModel | None = None) -> "FeatureBank":
        """Rebuild a bank; without ``graph`` the embedded parent edge list is used."""
        if graph is None:
            if "parent_edges" not in obj:
                raise ValidationError("bank file has no embedded graph; pass the graph explicitly")
            graph = Graph.from_edges(int(obj["n"]), obj["parent_edges"])
        if obj.get("graph") not in (None, graph.digest):
            raise ValidationError("feature bank was built on a different graph")
        label = obj["distribution"]
        dist = ModelMatched(model) if label == "matched" and model is not None else (
            parse_distribution(label) if label != "matched" else _OpaqueMatched())
        subs = tuple(WeightedSubgraph.from_json(graph, s) for s in obj["subgraphs"])
        bank = cls(graph, subs, dist, int(obj["seed"]), TiePolicy(obj.get("tie", "misinfo_wins")))
        if "bank_hash" in obj and obj["bank_hash"] != bank.digest:
            raise ValidationError("feature bank contents do not match its recorded hash")
        return bank


class _OpaqueMatched:
    """Placeholder for a loaded model-matched bank whose model is not at hand."""

    def label(self) -> str:
        return "matched"


def build_feature_bank(G: Graph, dist: FeatureDistribution, K: int, seed: int,
                       tie: TiePolicy = TiePolicy.MISINFO_WINS) -> FeatureBank:
    if K < 1:
        raise ValidationError("need K >= 1 features")
    subs = tuple(dist.sample(G, np.random.default_rng([int(seed), i])) for i in range(K))
    return FeatureBank(G, subs, dist, int(seed), tie)


def distance_feature(g: WeightedSubgraph, M, S, tie: TiePolicy = TiePolicy.MISINFO_WINS) -> int:
    """Nodes reached from ``M`` in ``g`` but reached no later (per ``tie``) from ``S``."""
    dM = multi_source_shortest_dist(g, M)
    dS = multi_source_shortest_dist(g, S)
    return int(np.count_nonzero(np.isfinite(dM) & beats(tie.positive_wins)(dS, dM)))


def feature_vector(bank: FeatureBank, M, S) -> np.ndarray:
    return bank.coverage(M).counts(node_set(S))


@dataclass(frozen=True, eq=False)
class ScoreModel:
    bank: FeatureBank
    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64)
        if w.shape != (self.bank.K,):
            raise ValidationError(f"expected {self.bank.K} weights, got shape {w.shape}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValidationError("weights must be finite and nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    def to_json(self) -> dict:
        return {"w": [float(x) for x in self.w], "bank_hash": self.bank.digest}

    @classmethod
    def from_json(cls, obj: dict, bank: FeatureBank) -> "ScoreModel":
        if obj.get("bank_hash") != bank.digest:
            raise ValidationError("weights were trained on a different feature bank")
        return cls(bank, np.array(obj["w"], dtype=np.float64))


def score(model: ScoreModel, M, S) -> float:
    return float(np.dot(model.w, feature_vector(model.bank, M, S)))


class AttackerContext:
    """Incremental protector state for one attacker over a whole bank.

    ``dist_m`` (K x n) is computed once; the protector frontier is kept as
    the mask of covered (subgraph, node) cells, which is exactly the set
    where ``dist_S`` beats ``dist_M``. Memory is O(K * n) plus the
    coverage rows.
    """

    def __init__(self, bank: FeatureBank, M: Iterable[int]):
        self.bank = bank
        self.M = node_set(M)
        self.cov = bank.coverage(self.M)
        self.covered = np.zeros(bank.K * bank.graph.n, dtype=bool)
        self.S: list[int] = []
        self._colw_key = None
        self._colw = None

    @property
    def dist_m(self) -> np.ndarray:
        return self.cov.dist_m

    def reset(self):
        self.covered[:] = False
        self.S = []

    def column_weights(self, w: np.ndarray) -> np.ndarray:
        key = w.tobytes()
        if key != self._colw_key:
            self._colw = np.repeat(np.asarray(w, dtype=np.float64), self.bank.graph.n)
            self._colw_key = key
        return self._colw

    def marginal_gain(self, model: ScoreModel, v: int) -> float:
        if v in self.S:
            raise ValidationError(f"node {v} already committed")
        return float(self.cov.gains(np.array([v]), self.column_weights(model.w), self.covered)[0])

    def gains(self, model: ScoreModel, cand: Sequence[int]) -> np.ndarray:
        return self.cov.gains(np.asarray(cand, dtype=np.int64), self.column_weights(model.w), self.covered)

    def commit(self, v: int):
        if v in self.S:
            raise ValidationError(f"node {v} already committed")
        self.covered[self.cov.row(v)] = True
        self.S.append(int(v))

    def counts(self, S=None) -> np.ndarray:
        if S is None:
            return np.bincount(np.flatnonzero(self.covered) // self.bank.graph.n, minlength=self.bank.K)
        return self.cov.counts(node_set(S))

    def score(self, model: ScoreModel, S=None) -> float:
        return float(np.dot(model.w, self.counts(S)))


def save_bank(bank: FeatureBank, path):
    with open(path, "w") as fh:
        json.dump(bank.to_json(), fh)


def load_bank(path, graph: Graph | None = None, model: TriggeringModel | None = None) -> FeatureBank:
    with open(path) as fh:
        return FeatureBank.from_json(json.load(fh), graph, model)
