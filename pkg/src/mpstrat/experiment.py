"""Pair generation, baselines and performance-ratio evaluation."""
from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .diffusion import RealizationSet, TiePolicy, TriggeringModel
from .errors import ValidationError
from .features import AttackerContext, FeatureBank, ScoreModel, build_feature_bank, parse_distribution
from .graph import Graph, load_edge_list, node_set
from .inference import greedy_max_score, greedy_select
from .losses import LossSpec
from .training import TrainerConfig, TrainingPair, one_slack_cutting_plane

log = logging.getLogger(__name__)

RATIO_FLOOR = 1e-9


def _rng(seed, *keys) -> np.random.Generator:
    return np.random.default_rng([int(seed), *[int(k) for k in keys]])


# ---------------------------------------------------------------- attackers

def attacker_size_pmf(size: int, exponent: float = 2.5) -> float:
    """P(size = s) before clamping: floor of a Pareto(exponent - 1) with minimum 1."""
    a = exponent - 1.0
    return size ** -a - (size + 1) ** -a


def sample_attacker(G: Graph, exponent: float = 2.5, max_size: int = 10,
                    rng: Optional[np.random.Generator] = None) -> tuple:
    if max_size < 1:
        raise ValidationError("max_size must be >= 1")
    if exponent <= 1:
        raise ValidationError("power-law exponent must be > 1")
    rng = rng or np.random.default_rng()
    raw = np.floor(1.0 + rng.pareto(exponent - 1.0))
    size = int(min(max(raw, 1), max_size, max(G.n - 1, 1)))
    return node_set(rng.choice(G.n, size=size, replace=False).tolist())


# ------------------------------------------------------------ ground truth

def realization_bank(rs: RealizationSet, tie: TiePolicy = TiePolicy.MISINFO_WINS) -> ScoreModel:
    """Realizations as a unit-weight feature bank: its score is the saved-node total."""
    bank = FeatureBank(rs.model.graph, tuple(rs.realizations), _RealizationLabel(), rs.seed, tie)
    bank.__dict__["index"] = rs.index
    return ScoreModel(bank, np.ones(bank.K))


class _RealizationLabel:
    def label(self) -> str:
        return "realizations"


@dataclass
class OracleResult:
    P: tuple
    order: list
    gains: list


def oracle_protector(model: TriggeringModel, M, k: int, n_sims: int = 2000, seed: int = 0,
                     realizations: Optional[RealizationSet] = None,
                     tie: TiePolicy = TiePolicy.MISINFO_WINS, trace: bool = False):
    """Greedy maximizer of the Monte-Carlo prevention estimate.

    All candidate evaluations share one realization set, so every
    comparison is paired and the per-realization objective is a coverage
    function.
    """
    if k < 1:
        raise ValidationError("budget k must be >= 1")
    M = node_set(M)
    rs = realizations or RealizationSet(model, n_sims, seed)
    sm = realization_bank(rs, tie)
    ctx = AttackerContext(sm.bank, M)
    Ms = set(M)
    ground = [v for v in range(model.graph.n) if v not in Ms]
    order, gains = [], []
    if ground:
        ctx.reset()
        order = greedy_select(ctx, sm, ground, k)
        ctx.reset()
        for v in order:
            gains.append(ctx.marginal_gain(sm, v) / rs.count)
            ctx.commit(v)
    res = OracleResult(node_set(order), order, gains)
    return res if trace else res.P


@dataclass
class PairPool:
    pairs: list
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.pairs)

    def split(self, train: int, test: int, seed: int) -> tuple[list, list]:
        if train + test > len(self.pairs):
            raise ValidationError(f"pool of {len(self.pairs)} cannot supply {train} + {test} pairs")
        perm = _rng(seed, 7).permutation(len(self.pairs))
        return [self.pairs[i] for i in perm[:train]], [self.pairs[i] for i in perm[train:train + test]]

    def to_jsonl(self) -> str:
        head = json.dumps({"provenance": self.provenance}) + "\n" if self.provenance else ""
        return head + "".join(json.dumps(p.to_json()) + "\n" for p in self.pairs)

    @classmethod
    def from_jsonl(cls, text: str) -> "PairPool":
        pairs, prov = [], {}
        for line in text.splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            if "provenance" in obj:
                prov = obj["provenance"]
                continue
            pairs.append(TrainingPair(obj["M"], obj["P"]))
        return cls(pairs, prov)


def generate_pool(model: TriggeringModel, pool_size: int, seed: int, exponent: float = 2.5,
                  max_size: int = 10, n_sims: int = 2000,
                  tie: TiePolicy = TiePolicy.MISINFO_WINS) -> PairPool:
    """``pool_size`` pairs: power-law sized random attackers, greedy oracle protectors (k = |M|)."""
    if pool_size < 1:
        raise ValidationError("pool_size must be >= 1")
    G = model.graph
    rs = RealizationSet(model, n_sims, int(np.random.SeedSequence([seed, 1]).generate_state(1)[0]))
    pairs = []
    for i in range(pool_size):
        M = sample_attacker(G, exponent, max_size, _rng(seed, 2, i))
        P = oracle_protector(model, M, len(M), realizations=rs, tie=tie)
        pairs.append(TrainingPair(M, P))
    prov = {"model": model.digest, "seed": int(seed), "n_sims": int(n_sims), "exponent": exponent,
            "max_size": int(max_size), "tie": tie.value, "oracle": "greedy-shared-realizations"}
    return PairPool(pairs, prov)


# --------------------------------------------------------------- baselines

def baseline_rand(G: Graph, M, k: int, rng: np.random.Generator) -> tuple:
    Ms = set(node_set(M))
    pool = np.array([v for v in range(G.n) if v not in Ms], dtype=np.int64)
    k = min(k, len(pool))
    return node_set(rng.choice(pool, size=k, replace=False).tolist())


def baseline_high_degree(G: Graph, M, k: int, degree: str = "out") -> tuple:
    deg = {"out": G.out_degree, "in": G.in_degree, "total": G.out_degree + G.in_degree}[degree]
    Ms = set(node_set(M))
    pool = [v for v in range(G.n) if v not in Ms]
    pool.sort(key=lambda v: (-deg[v], v))
    return node_set(pool[:k])


def baseline_proximity(G: Graph, M, k: int, rng: np.random.Generator) -> tuple:
    M = node_set(M)
    Ms = set(M)
    nbrs = sorted({int(v) for u in M for v in G.out_neighbors(u)} - Ms)
    if len(nbrs) >= k:
        return node_set(rng.choice(nbrs, size=k, replace=False).tolist())
    rest = [v for v in range(G.n) if v not in Ms and v not in set(nbrs)]
    fill = rng.choice(rest, size=min(k - len(nbrs), len(rest)), replace=False).tolist() if rest else []
    return node_set(nbrs + fill)


# -------------------------------------------------------------- evaluation

@dataclass
class Ratio:
    ratio: float
    raw: float
    valid: bool


class Evaluator:
    """Paired prevention estimates on one fixed realization set."""

    def __init__(self, model: TriggeringModel, n_sims: int, seed: int,
                 tie: TiePolicy = TiePolicy.MISINFO_WINS):
        self.rs = RealizationSet(model, n_sims, seed)
        self.tie = tie
        self._dm = {}

    def prevention(self, M, P) -> float:
        M = node_set(M)
        if M not in self._dm:
            self._dm[M] = self.rs.block_dist(M)
        return float(self.rs.saved_counts(M, P, self.tie, dist_m=self._dm[M]).mean())

    def ratio(self, M, P_pred, P_true, floor: float = RATIO_FLOOR) -> Ratio:
        return ratio_of(self.prevention(M, P_pred), self.prevention(M, P_true), floor)

    def forget(self, M):
        self._dm.pop(node_set(M), None)


def ratio_of(num: float, den: float, floor: float = RATIO_FLOOR) -> Ratio:
    if den < floor:
        if num < floor:
            return Ratio(1.0, 1.0, True)
        return Ratio(float("nan"), float("inf"), False)
    raw = num / den
    return Ratio(float(min(max(raw, 0.0), 1.0)), raw, True)


def performance_ratio(model: TriggeringModel, M, P_pred, P_true, n_sims: int = 10000, seed: int = 0,
                      tie: TiePolicy = TiePolicy.MISINFO_WINS) -> Ratio:
    """``f(M, P_pred) / f(M, P_true)`` on shared realizations, clamped to [0, 1]."""
    return Evaluator(model, n_sims, seed, tie).ratio(M, P_pred, P_true)


@dataclass
class EvalReport:
    method: str
    setting: str
    repetition: int
    ratios: list
    raw: list
    excluded: int

    @property
    def mean(self) -> float:
        return float(np.mean(self.ratios)) if self.ratios else float("nan")

    @property
    def std(self) -> float:
        return float(np.std(self.ratios)) if self.ratios else float("nan")


def evaluate_methods(model: TriggeringModel, test: Sequence[TrainingPair], predictors: dict,
                     n_sims: int, seed: int, repetition: int = 0,
                     tie: TiePolicy = TiePolicy.MISINFO_WINS, threads: int = 1) -> list[EvalReport]:
    """Score every predictor on the same test pairs and realizations.

    ``predictors`` maps ``(method, setting)`` to ``f(M, k) -> protector``.
    """
    ev = Evaluator(model, n_sims, seed, tie)

    def one(pair):
        out = {}
        den = ev.prevention(pair.M, pair.P)
        for key, fn in predictors.items():
            out[key] = ratio_of(ev.prevention(pair.M, fn(pair.M, len(pair.M))), den)
        ev.forget(pair.M)
        return out

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            per_pair = list(ex.map(one, test))
    else:
        per_pair = [one(p) for p in test]
    reports = []
    for key in predictors:
        rs = [pp[key] for pp in per_pair]
        ok = [r for r in rs if r.valid]
        reports.append(EvalReport(key[0], key[1], repetition, [r.ratio for r in ok], [r.raw for r in ok],
                                  len(rs) - len(ok)))
    return reports


# ------------------------------------------------------------- experiments

@dataclass
class ExperimentConfig:
    graph: Graph
    model: TriggeringModel
    pool: PairPool
    features: list  # [(distribution text, [K, ...]), ...]
    train_size: int
    test_size: int
    repetitions: int = 5
    seed: int = 0
    eval_sims: int = 10000
    loss: LossSpec = LossSpec()
    trainer: TrainerConfig = TrainerConfig()
    baselines: tuple = ("rand", "hd", "pro")
    tie: TiePolicy = TiePolicy.MISINFO_WINS
    hd_degree: str = "out"
    threads: int = 1

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        base = os.path.dirname(os.path.abspath(path))
        with open(path) as fh:
            obj = json.load(fh)

        def artifact(key):
            if key not in obj:
                raise ValidationError(f"experiment config is missing the {key!r} artifact")
            p = os.path.join(base, obj[key])
            if not os.path.exists(p):
                raise ValidationError(f"{key} artifact not found: {p}")
            with open(p) as fh:
                return fh.read()

        graph = load_edge_list(artifact("graph"))
        model = TriggeringModel.from_json(json.loads(artifact("model")), graph)
        pool = PairPool.from_jsonl(artifact("pool"))
        feats = [(f["dist"], [int(k) for k in f["K"]]) for f in obj.get("features", [])]
        trainer = dict(obj.get("trainer", {}))
        return cls(graph=graph, model=model, pool=pool, features=feats,
                   train_size=int(obj["train_size"]), test_size=int(obj["test_size"]),
                   repetitions=int(obj.get("repetitions", 5)), seed=int(obj.get("seed", 0)),
                   eval_sims=int(obj.get("eval_sims", 10000)),
                   loss=LossSpec.from_json(obj.get("loss", {})),
                   trainer=TrainerConfig.from_json(trainer),
                   baselines=tuple(obj.get("baselines", ("rand", "hd", "pro"))),
                   tie=TiePolicy(obj.get("tie", "misinfo_wins")),
                   hd_degree=obj.get("hd_degree", "out"), threads=int(obj.get("threads", 1)))


def _learned_predictor(model: ScoreModel):
    def predict(M, k):
        return greedy_max_score(model, M, k)
    return predict


def run_repetition(cfg: ExperimentConfig, rep: int) -> list[EvalReport]:
    rep_seed = int(np.random.SeedSequence([cfg.seed, rep]).generate_state(1)[0])
    train, test = cfg.pool.split(cfg.train_size, cfg.test_size, rep_seed)
    G = cfg.graph
    predictors = {}
    for dist_text, Ks in cfg.features:
        dist = parse_distribution(dist_text, cfg.model)
        full = build_feature_bank(G, dist, max(Ks), rep_seed, cfg.tie)
        for K in Ks:
            result = one_slack_cutting_plane(train, full.prefix(K), cfg.loss, cfg.trainer)
            log.info("rep %d %s K=%d: %d rounds, converged=%s", rep, dist_text, K, result.rounds,
                     result.converged)
            predictors[("learned", f"{dist_text}/K={K}")] = _learned_predictor(result.model)
    for b in cfg.baselines:
        if b == "rand":
            predictors[("rand", "-")] = lambda M, k, _s=rep_seed: baseline_rand(
                G, M, k, _rng(_s, 11, *node_set(M)))
        elif b == "hd":
            predictors[("hd", "-")] = lambda M, k: baseline_high_degree(G, M, k, cfg.hd_degree)
        elif b == "pro":
            predictors[("pro", "-")] = lambda M, k, _s=rep_seed: baseline_proximity(
                G, M, k, _rng(_s, 13, *node_set(M)))
        else:
            raise ValidationError(f"unknown baseline {b!r}")
    return evaluate_methods(cfg.model, test, predictors, cfg.eval_sims, rep_seed + 1, rep, cfg.tie,
                            cfg.threads)


def run_experiment(cfg) -> list[EvalReport]:
    """All repetitions of split / bank / train / predict / evaluate."""
    if not isinstance(cfg, ExperimentConfig):
        cfg = ExperimentConfig.load(cfg)
    reports = []
    for rep in range(cfg.repetitions):
        reports.extend(run_repetition(cfg, rep))
    return reports


def reports_to_csv(reports: Sequence[EvalReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "setting", "repetition", "mean", "std", "excluded_count"])
    for r in reports:
        w.writerow([r.method, r.setting, r.repetition, f"{r.mean:.6f}", f"{r.std:.6f}", r.excluded])
    return buf.getvalue()


def summarize(reports: Sequence[EvalReport]) -> dict:
    groups: dict = {}
    for r in reports:
        groups.setdefault((r.method, r.setting), []).append(r.mean)
    return {f"{m} {s}": {"mean": float(np.mean(v)), "std": float(np.std(v)), "repetitions": len(v)}
            for (m, s), v in groups.items()}
