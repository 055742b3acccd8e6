import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpstrat.diffusion import TiePolicy, TriggeringModel
from mpstrat.errors import ValidationError
from mpstrat.features import (AttackerContext, FeatureBank, IidEdges, ModelMatched, ScoreModel,
                              build_feature_bank, distance_feature, feature_vector, parse_distribution,
                              score)
from mpstrat.graph import Graph, WeightedSubgraph, generate_er, node_set

from conftest import weighted


def _chain_bank(w=1.0, tie=TiePolicy.MISINFO_WINS):
    G = Graph.from_edges(3, [(0, 1), (1, 2)])
    return FeatureBank(G, (WeightedSubgraph.full(G, w),), IidEdges(1.0, w), 0, tie)


def test_full_inclusion_bank_repeats_the_graph():
    G = generate_er(20, 60, 1)
    bank = build_feature_bank(G, IidEdges(1.0, 1.0), 6, seed=3)
    for g in bank.subgraphs:
        assert g.edge_ids.tolist() == list(range(G.m)) and np.all(g.weight == 1.0)
    vec = feature_vector(bank, [0, 1], [5, 6])
    assert len(set(vec.tolist())) == 1


def test_iid_edge_count_concentrates_binomially():
    G = generate_er(1024, 2655, 0)
    bank = build_feature_bank(G, IidEdges(0.01, 1.0), 400, seed=1)
    total = sum(len(g.edge_ids) for g in bank.subgraphs)
    mean = total / 400
    sd = np.sqrt(G.m * 0.01 * 0.99 / 400)
    assert abs(mean - 0.01 * G.m) <= 3 * sd


def test_matched_bank_keeps_in_edges_at_one_over_indegree():
    G = Graph.from_edges(5, [(0, 4), (1, 4), (2, 4), (3, 4)])
    model = TriggeringModel.random(G, 0)
    bank = build_feature_bank(G, ModelMatched(model), 4000, seed=2)
    kept = np.mean([len(g.edge_ids) for g in bank.subgraphs])
    assert abs(kept - 1.0) < 0.06


def test_bank_determinism_and_prefix():
    G = generate_er(30, 90, 4)
    a = build_feature_bank(G, IidEdges(0.3, 2.0), 8, seed=5)
    b = build_feature_bank(G, IidEdges(0.3, 2.0), 8, seed=5)
    assert a.digest == b.digest
    assert a.prefix(3).digest == build_feature_bank(G, IidEdges(0.3, 2.0), 3, seed=5).digest
    with pytest.raises(ValidationError):
        build_feature_bank(G, IidEdges(0.3), 0, seed=5)


def test_bank_json_roundtrip_checks_hashes():
    G = generate_er(30, 90, 4)
    bank = build_feature_bank(G, IidEdges(0.3, 1.0), 5, seed=5)
    obj = json.loads(json.dumps(bank.to_json()))
    assert FeatureBank.from_json(obj).digest == bank.digest
    assert FeatureBank.from_json(obj, G).digest == bank.digest
    obj["subgraphs"][0]["edges"] = obj["subgraphs"][0]["edges"][1:]
    with pytest.raises(ValidationError):
        FeatureBank.from_json(obj, G)
    with pytest.raises(ValidationError):
        FeatureBank.from_json(bank.to_json(), generate_er(30, 91, 4))


def test_parse_distribution():
    assert parse_distribution("iid:0.05:1.0") == IidEdges(0.05, 1.0)
    for bad in ("iid", "iid:2:1", "foo:1:1", "matched"):
        with pytest.raises(ValidationError):
            parse_distribution(bad)


def test_distance_feature_examples():
    g = WeightedSubgraph.full(Graph.from_edges(3, [(0, 1), (1, 2)]))
    assert distance_feature(g, [0], []) == 0
    assert distance_feature(g, [], [2]) == 0
    assert distance_feature(g, [0], [2]) == 1
    # a tie at node 2 only counts under the positive-wins rule
    t = weighted(3, [(0, 2, 1.0), (1, 2, 1.0)])
    assert distance_feature(t, [0], [1], TiePolicy.MISINFO_WINS) == 0
    assert distance_feature(t, [0], [1], TiePolicy.POSITIVE_WINS) == 1


def test_score_examples():
    bank = _chain_bank()
    assert score(ScoreModel(bank, [2.0]), [0], [2]) == 2.0
    assert score(ScoreModel(bank, [0.0]), [0], [1]) == 0.0
    assert score(ScoreModel(bank, [3.0]), [0], []) == 0.0
    with pytest.raises(ValidationError):
        ScoreModel(bank, [-1.0])
    with pytest.raises(ValidationError):
        ScoreModel(bank, [1.0, 1.0])


def test_weights_refuse_a_different_bank():
    bank = _chain_bank()
    other = _chain_bank(w=2.0)
    with pytest.raises(ValidationError):
        ScoreModel.from_json(ScoreModel(bank, [1.0]).to_json(), other)


def _random_bank(seed, n=10, m=25, K=4, tie=TiePolicy.MISINFO_WINS):
    G = generate_er(n, m, seed)
    rng = np.random.default_rng(seed)
    subs = []
    for _ in range(K):
        keep = np.flatnonzero(rng.random(G.m) < 0.6)
        # integer lengths make ties common so both policies get exercised
        subs.append(WeightedSubgraph(G, keep, rng.integers(1, 4, len(keep)).astype(float)))
    return FeatureBank(G, tuple(subs), IidEdges(0.6), seed, tie)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 5000), tie=st.sampled_from(list(TiePolicy)), data=st.data())
def test_coverage_path_matches_reference_features(seed, tie, data):
    bank = _random_bank(seed, tie=tie)
    M = data.draw(st.lists(st.integers(0, 9), min_size=1, max_size=3))
    S = data.draw(st.lists(st.integers(0, 9), max_size=4).filter(lambda s: not set(s) & set(M)))
    ref = [distance_feature(g, M, S, tie) for g in bank.subgraphs]
    assert feature_vector(bank, M, S).tolist() == ref
    # input order does not matter
    assert feature_vector(bank, M[::-1], S[::-1]).tolist() == ref
    assert all(0 <= x <= bank.graph.n for x in ref)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 5000), data=st.data())
def test_incremental_gains_match_full_recompute(seed, data):
    bank = _random_bank(seed)
    w = np.random.default_rng(seed).uniform(0, 2, bank.K)
    model = ScoreModel(bank, w)
    M = node_set(data.draw(st.sets(st.integers(0, 9), min_size=1, max_size=2)))
    order = data.draw(st.permutations([v for v in range(10) if v not in M]))[:4]
    ctx = AttackerContext(bank, M)
    S = []
    for v in order:
        g = ctx.marginal_gain(model, v)
        assert g == pytest.approx(score(model, M, S + [v]) - score(model, M, S), abs=1e-9)
        ctx.commit(v)
        S.append(v)
        assert ctx.score(model) == pytest.approx(score(model, M, S), abs=1e-9)
    with pytest.raises(ValidationError):
        ctx.commit(order[0])


def test_gain_of_a_sink_is_its_own_cell():
    # 0 -> 1 -> 2, plus 0 -> 3; node 4 is isolated
    G = Graph.from_edges(5, [(0, 1), (1, 2), (0, 3)])
    bank = FeatureBank(G, (WeightedSubgraph.full(G),), IidEdges(1.0), 0)
    model = ScoreModel(bank, [1.0])
    ctx = AttackerContext(bank, [0])
    # brute force: the gain of v alone is the number of cells it saves
    expect = {v: distance_feature(bank.subgraphs[0], [0], [v]) for v in (1, 2, 3, 4)}
    assert expect == {1: 2, 2: 1, 3: 1, 4: 0}
    assert {v: ctx.marginal_gain(model, v) for v in expect} == expect


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 10_000), data=st.data())
def test_score_is_monotone_submodular(seed, data):
    bank = _random_bank(seed, tie=data.draw(st.sampled_from(list(TiePolicy))))
    model = ScoreModel(bank, np.random.default_rng(seed).uniform(0, 1, bank.K))
    M = data.draw(st.sets(st.integers(0, 9), min_size=1, max_size=2))
    rest = [v for v in range(10) if v not in M]
    B = data.draw(st.sets(st.sampled_from(rest), max_size=5))
    A = data.draw(st.sets(st.sampled_from(sorted(B)), max_size=len(B))) if B else set()
    v = data.draw(st.sampled_from([u for u in rest if u not in B] or [None]))
    if v is None:
        return
    gA = score(model, M, A | {v}) - score(model, M, A)
    gB = score(model, M, B | {v}) - score(model, M, B)
    assert gA >= gB - 1e-9 and gB >= -1e-9
