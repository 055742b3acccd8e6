import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpstrat.errors import EnumerationCapError, ValidationError
from mpstrat.features import AttackerContext, FeatureBank, IidEdges, ScoreModel
from mpstrat.graph import Graph, WeightedSubgraph
from mpstrat.inference import (LaiProblem, brute_force_lai, brute_force_max_score, default_permutation,
                               greedy_max_score, greedy_select, lai_hamming, lai_modular_modular,
                               modular_lower_bound_score, modular_upper_bound_sim)
from mpstrat.losses import LossSpec, similarity

from _fixtures import random_instance, random_model


def _chain_model(w=1.0):
    G = Graph.from_edges(3, [(0, 1), (1, 2)])
    bank = FeatureBank(G, (WeightedSubgraph.full(G),), IidEdges(1.0), 0)
    return ScoreModel(bank, [w])


def _subsets(ground):
    for r in range(len(ground) + 1):
        yield from itertools.combinations(ground, r)


def test_greedy_chain_example():
    assert greedy_max_score(_chain_model(), [0], 1) == (1,)


def test_greedy_zero_weights_returns_smallest_ids():
    model = random_model(3)
    model = ScoreModel(model.bank, np.zeros(model.bank.K))
    assert greedy_max_score(model, [0, 4], 3) == (1, 2, 3)


def test_greedy_budget_larger_than_pool():
    assert greedy_max_score(_chain_model(), [0], 5) == (1, 2)
    with pytest.raises(ValidationError):
        greedy_max_score(_chain_model(), [0], 0)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(1, 5))
def test_lazy_greedy_equals_naive(seed, k):
    model, M, _ = random_instance(seed)
    ground = [v for v in range(10) if v not in M]
    ctx = AttackerContext(model.bank, M)
    assert greedy_select(ctx, model, ground, k, lazy=True) == greedy_select(ctx, model, ground, k, lazy=False)


def test_greedy_within_guarantee_of_brute_force():
    for seed in range(20):
        model, M, _ = random_instance(seed)
        for k in (1, 2, 3):
            ctx = AttackerContext(model.bank, M)
            g = ctx.score(model, greedy_max_score(model, M, k))
            opt = ctx.score(model, brute_force_max_score(model, M, k))
            assert g >= (1 - 1 / math.e) * opt - 1e-9


def test_brute_force_cap_and_full_ground():
    model, M, _ = random_instance(1)
    with pytest.raises(EnumerationCapError):
        brute_force_max_score(model, M, 3, cap=10)
    ground = tuple(v for v in range(10) if v not in M)
    assert brute_force_max_score(model, M, len(ground)) == ground
    assert brute_force_max_score(model, M, 2) == brute_force_max_score(model, M, 2)


LOSSES = [LossSpec("jhop", 1, 3.0), LossSpec("jhop", 2, 3.0), LossSpec("hamming", alpha=3.0)]


@pytest.mark.parametrize("spec", LOSSES, ids=lambda s: f"{s.kind}{s.j}")
@pytest.mark.parametrize("seed", range(4))
def test_upper_bound_dominates_and_is_tight(spec, seed):
    model, M, P = random_instance(seed, n=8)
    G = model.bank.graph
    rng = np.random.default_rng(seed)
    ground = [v for v in range(8) if v not in M]
    for X in (P, tuple(sorted(rng.choice(ground, 2, replace=False).tolist())), ()):
        up = modular_upper_bound_sim(spec, G, P, X)
        assert up(X) == pytest.approx(similarity(spec, G, P, X))
        for S in _subsets(range(8)):
            assert up(S) >= similarity(spec, G, P, S) - 1e-9


@pytest.mark.parametrize("seed", range(6))
def test_lower_bound_is_dominated_and_tight(seed):
    model, M, P = random_instance(seed, n=8)
    ctx = AttackerContext(model.bank, M)
    ground = [v for v in range(8) if v not in M]
    for X in (P, tuple(ground[:2]), ()):
        low = modular_lower_bound_score(model, M, X, context=ctx)
        assert low(X) == pytest.approx(ctx.score(model, X))
        assert np.all(low.coeff >= 0)
        for S in _subsets(ground):
            assert low(S) <= ctx.score(model, S) + 1e-9


def test_lower_bound_coefficients_telescope_along_sigma():
    model, M, P = random_instance(2, n=8)
    ctx = AttackerContext(model.bank, M)
    ground = [v for v in range(8) if v not in M]
    sigma = default_permutation(P, ground)
    low = modular_lower_bound_score(model, M, P, sigma, ctx)
    for i, v in enumerate(sigma):
        step = ctx.score(model, sigma[:i + 1]) - ctx.score(model, sigma[:i])
        assert low.coeff[v] == pytest.approx(step)


def test_lower_bound_rejects_bad_permutations():
    model, M, P = random_instance(2, n=8)
    ground = [v for v in range(8) if v not in M]
    with pytest.raises(ValidationError):
        modular_lower_bound_score(model, M, P, ground[:-1])
    outside = [v for v in ground if v not in P]
    with pytest.raises(ValidationError):
        modular_lower_bound_score(model, M, P, outside + list(P))


def _problem(seed, spec=LossSpec("jhop", 1, 2.0), n=9):
    model, M, P = random_instance(seed, n=n)
    return LaiProblem(M, P, model, spec, len(M))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), iters=st.integers(1, 3))
def test_lai_descends_and_never_beats_the_optimum(seed, iters):
    prob = _problem(seed)
    res = lai_modular_modular(prob, iters)
    assert all(b < a for a, b in zip(res.trace, res.trace[1:]))
    assert prob.H(res.S) == res.trace[-1] <= res.trace[0]
    assert len(res.S) == prob.k and not set(res.S) & set(prob.M)
    assert prob.H(brute_force_lai(prob)) <= prob.H(res.S) + 1e-9


def test_lai_zero_iterations_returns_padded_start():
    model, M, P = random_instance(5, n=9)
    prob = LaiProblem(M, P[:1], model, LossSpec(), len(M) + 1)
    res = lai_modular_modular(prob, 0)
    ground = [v for v in range(9) if v not in M]
    padded = set(P[:1])
    for v in ground:
        if len(padded) == prob.k:
            break
        padded.add(v)
    assert res.S == tuple(sorted(padded)) and res.trace == [prob.H(res.S)]


def test_lai_rejects_infeasible_budget():
    model, M, P = random_instance(6, n=9)
    with pytest.raises(ValidationError):
        lai_modular_modular(LaiProblem(M, P, model, LossSpec(), 9))
    with pytest.raises(ValidationError):
        LaiProblem(M, P, model, LossSpec(), 0)


@pytest.mark.parametrize("seed", range(10))
def test_hamming_shortcut_is_at_least_as_good_as_greedy_and_truth(seed):
    prob = _problem(seed, LossSpec("hamming", alpha=2.0))
    res = lai_hamming(prob)
    greedy = greedy_max_score(prob.model, prob.M, prob.k)
    assert prob.H(res.S) <= min(prob.H(greedy), prob.H(prob.P_true)) + 1e-12
