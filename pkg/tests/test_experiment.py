import itertools
import math

import numpy as np
import pytest

from mpstrat.diffusion import RealizationSet, TriggeringModel
from mpstrat.errors import ValidationError
from mpstrat.experiment import (EvalReport, Evaluator, PairPool, attacker_size_pmf, baseline_high_degree,
                                baseline_proximity, baseline_rand, evaluate_methods, generate_pool,
                                oracle_protector, performance_ratio, ratio_of, reports_to_csv,
                                sample_attacker, summarize)
from mpstrat.graph import Graph, generate_er


@pytest.fixture(scope="module")
def model50():
    return TriggeringModel.random(generate_er(50, 300, 11), 12)


def test_attacker_size_distribution_matches_pmf():
    G = generate_er(200, 800, 0)
    rng = np.random.default_rng(0)
    N = 10_000
    sizes = np.array([len(sample_attacker(G, 2.5, 10, rng)) for _ in range(N)])
    for s in (1, 2, 3):
        p = attacker_size_pmf(s)
        assert abs(np.mean(sizes == s) - p) <= 3 * math.sqrt(p * (1 - p) / N)
    assert attacker_size_pmf(1) == pytest.approx(1 - 2 ** -1.5)
    assert sizes.max() <= 10


def test_attacker_clamp_and_determinism():
    G = generate_er(30, 90, 0)
    assert all(len(sample_attacker(G, max_size=1, rng=np.random.default_rng(i))) == 1 for i in range(50))
    assert sample_attacker(G, rng=np.random.default_rng(4)) == sample_attacker(G, rng=np.random.default_rng(4))
    with pytest.raises(ValidationError):
        sample_attacker(G, max_size=0)


def test_oracle_two_node_graph():
    model = TriggeringModel.random(Graph.from_edges(2, [(0, 1)]), 0)
    assert oracle_protector(model, [0], 1, n_sims=50) == (1,)
    assert oracle_protector(model, [0, 1], 1, n_sims=5) == ()


def test_oracle_gains_nonincreasing_and_near_exhaustive():
    for seed in range(4):
        model = TriggeringModel.random(generate_er(9, 30, seed), seed)
        rs = RealizationSet(model, 300, seed)
        M = (0,)
        for k in (1, 2):
            res = oracle_protector(model, M, k, realizations=rs, trace=True)
            assert all(b <= a + 1e-12 for a, b in zip(res.gains, res.gains[1:]))
            value = rs.saved_counts(M, res.P).mean()
            best = max(rs.saved_counts(M, S).mean() for S in itertools.combinations(range(1, 9), k))
            assert value >= (1 - 1 / math.e) * best
            assert sum(res.gains) == pytest.approx(value)


def test_pool_invariants_determinism_and_split(model50):
    a = generate_pool(model50, 10, seed=3, n_sims=200)
    b = generate_pool(model50, 10, seed=3, n_sims=200)
    assert [p.to_json() for p in a.pairs] == [p.to_json() for p in b.pairs]
    for p in a.pairs:
        assert not set(p.M) & set(p.P) and len(p.P) == min(len(p.M), 50 - len(p.M))
    train, test = a.split(6, 3, seed=1)
    assert len(train) == 6 and len(test) == 3
    assert not {id(p) for p in train} & {id(p) for p in test}
    back = PairPool.from_jsonl(a.to_jsonl())
    assert back.provenance == a.provenance and [p.M for p in back.pairs] == [p.M for p in a.pairs]
    with pytest.raises(ValidationError):
        a.split(8, 3, seed=1)


def test_baselines():
    star = Graph.from_edges(6, [(0, v) for v in range(1, 6)])
    assert baseline_high_degree(star, [3], 1) == (0,)
    G = generate_er(40, 160, 5)
    rng = np.random.default_rng(0)
    M = (0, 1)
    nbrs = {int(v) for u in M for v in G.out_neighbors(u)} - set(M)
    for _ in range(20):
        assert not set(baseline_rand(G, M, 3, rng)) & set(M)
        assert set(baseline_proximity(G, M, 2, rng)) <= nbrs
    # a sink attacker has no neighbors, so proximity falls back to random nodes
    sink = Graph.from_edges(4, [(1, 0), (2, 0)])
    assert len(baseline_proximity(sink, [0], 2, rng)) == 2


def test_ratio_edge_cases(model50):
    M, P = (0,), (5,)
    assert performance_ratio(model50, M, P, P, n_sims=200).ratio == 1.0
    assert performance_ratio(model50, M, (), P, n_sims=200).ratio == 0.0
    assert ratio_of(0.0, 0.0).ratio == 1.0
    bad = ratio_of(1.0, 0.0)
    assert not bad.valid
    r = ratio_of(3.0, 2.0)
    assert r.ratio == 1.0 and r.raw == 1.5


def test_evaluation_shares_pairs_and_flags_invalid(model50):
    pool = generate_pool(model50, 4, seed=1, n_sims=100)
    preds = {("truth", "-"): lambda M, k: next(p.P for p in pool.pairs if p.M == M),
             ("none", "-"): lambda M, k: ()}
    reports = evaluate_methods(model50, pool.pairs, preds, n_sims=100, seed=2)
    by = {r.method: r for r in reports}
    ev = Evaluator(model50, 100, 2)
    # a pair whose true protector saves nothing scores 1 for any prediction
    expect = [1.0 if ev.prevention(p.M, p.P) == 0 else 0.0 for p in pool.pairs]
    assert by["truth"].mean == 1.0 and by["none"].ratios == expect
    assert len(by["truth"].ratios) + by["truth"].excluded == 4
    csv = reports_to_csv(reports)
    assert csv.splitlines()[0] == "method,setting,repetition,mean,std,excluded_count"
    assert summarize(reports)["truth -"]["mean"] == 1.0


def test_evaluator_caches_are_transparent(model50):
    ev = Evaluator(model50, 150, 0)
    a = ev.prevention((0, 1), (7,))
    ev.forget((0, 1))
    assert ev.prevention((1, 0), (7,)) == a
