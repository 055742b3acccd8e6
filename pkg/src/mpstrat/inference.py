"""Greedy prediction and loss-augmented inference.

Loss-augmented inference minimizes ``H(S) = alpha * SIM(P, S) - score(M, S)``
over ``|S| = k``.  ``H`` is a difference of two submodular functions, so each
modular-modular step replaces ``SIM`` by a modular upper bound and the score
by a modular lower bound, both tight at the current set, and takes the
``k`` smallest coefficients.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import EnumerationCapError, ValidationError
from .features import AttackerContext, ScoreModel
from .graph import node_set
from .losses import LossSpec, hood_mask, hop_table, similarity

ENUMERATION_CAP = 10**6


@dataclass(frozen=True)
class ModularFunction:
    """``offset + sum(coeff[v] for v in S)``; ``coeff`` is indexed by node id."""

    coeff: np.ndarray
    offset: float = 0.0

    def __call__(self, S) -> float:
        S = list(node_set(S))
        return float(self.offset + self.coeff[S].sum()) if S else float(self.offset)


@dataclass
class LaiProblem:
    M: tuple
    P_true: tuple
    model: ScoreModel
    loss: LossSpec
    k: int
    ground: tuple = ()
    context: Optional[AttackerContext] = field(default=None, repr=False)

    def __post_init__(self):
        self.M = node_set(self.M)
        self.P_true = node_set(self.P_true)
        n = self.model.bank.graph.n
        if not self.ground:
            Mset = set(self.M)
            self.ground = tuple(v for v in range(n) if v not in Mset)
        self.ground = node_set(self.ground)
        if set(self.ground) & set(self.M):
            raise ValidationError("ground set must exclude the attacker")
        if self.k < 1:
            raise ValidationError("budget k must be >= 1")
        if self.context is None:
            self.context = AttackerContext(self.model.bank, self.M)
        elif self.context.M != self.M:
            raise ValidationError("context was built for a different attacker")

    @property
    def graph(self):
        return self.model.bank.graph

    def score(self, S) -> float:
        return self.context.score(self.model, S)

    def sim(self, S) -> float:
        return similarity(self.loss, self.graph, self.P_true, S)

    def H(self, S) -> float:
        return self.loss.alpha * self.sim(S) - self.score(S)


def greedy_select(ctx: AttackerContext, model: ScoreModel, ground: Sequence[int], k: int,
                  lazy: bool = True) -> list[int]:
    """Cardinality-constrained greedy on ``ctx``; returns nodes in pick order.

    Ties go to the smallest node id; ``lazy`` changes only the cost, not the
    result.
    """
    ctx.reset()
    pool = np.array(node_set(ground), dtype=np.int64)
    k = min(k, len(pool))
    picked: list[int] = []
    if k <= 0:
        return picked
    if not lazy:
        alive = np.ones(len(pool), dtype=bool)
        for _ in range(k):
            cand = pool[alive]
            best = int(np.argmax(ctx.gains(model, cand)))
            v = int(cand[best])
            ctx.commit(v)
            picked.append(v)
            alive[np.searchsorted(pool, v)] = False
        return picked
    heap = [(-g, int(v)) for g, v in zip(ctx.gains(model, pool), pool)]
    heapq.heapify(heap)
    while len(picked) < k:
        _, v = heapq.heappop(heap)
        fresh = float(ctx.gains(model, [v])[0])
        if not heap or (-fresh, v) <= heap[0]:
            ctx.commit(v)
            picked.append(v)
        else:
            heapq.heappush(heap, (-fresh, v))
    return picked


def greedy_max_score(model: ScoreModel, M, k: int, lazy: bool = True,
                     context: Optional[AttackerContext] = None) -> tuple:
    """Greedy protector for attacker ``M`` under the learned score."""
    if k < 1:
        raise ValidationError("budget k must be >= 1")
    M = node_set(M)
    ctx = context if context is not None else AttackerContext(model.bank, M)
    Mset = set(M)
    ground = [v for v in range(model.bank.graph.n) if v not in Mset]
    return node_set(greedy_select(ctx, model, ground, k, lazy))


def modular_upper_bound_sim(loss: LossSpec, G, P, X) -> ModularFunction:
    """Modular upper bound of ``S -> SIM(P, S)``, tight at ``X``.

    j-hop similarity is a coverage function, so the Nemhauser form with
    singleton gains outside ``X`` applies.  The Hamming indicator
    ``[S == P]`` is not submodular; it gets its own bound:
    constant 1 when ``X == P``, otherwise the count of ``P`` members added
    beyond ``X`` plus ``X``-only members dropped.
    """
    P, X = node_set(P), node_set(X)
    n = G.n
    coeff = np.zeros(n)
    if loss.kind == "hamming":
        if X == P:
            return ModularFunction(coeff, 1.0)
        only_p = [v for v in P if v not in set(X)]
        only_x = [v for v in X if v not in set(P)]
        coeff[only_p] = 1.0
        coeff[only_x] = -1.0
        return ModularFunction(coeff, float(len(only_x)))
    hp = hood_mask(loss, G, P)
    table = hop_table(loss, G)
    h_x = float(np.count_nonzero(hp & hood_mask(loss, G, X)))
    # singleton gains h({v}) - h(empty)
    coeff[:] = (table & hp).sum(axis=1)
    Xl = list(X)
    for v in Xl:
        rest = [u for u in Xl if u != v]
        coeff[v] = h_x - np.count_nonzero(hp & hood_mask(loss, G, rest))
    offset = h_x - coeff[Xl].sum() if Xl else h_x
    return ModularFunction(coeff, float(offset))


def default_permutation(X, ground) -> list[int]:
    Xs = set(node_set(X))
    return list(node_set(X)) + [v for v in node_set(ground) if v not in Xs]


def modular_lower_bound_score(model: ScoreModel, M, X, sigma: Optional[Sequence[int]] = None,
                              context: Optional[AttackerContext] = None,
                              ground: Optional[Sequence[int]] = None) -> ModularFunction:
    """Chain lower bound: ``coeff[sigma[i]] = h(S_i) - h(S_{i-1})`` along ``sigma``.

    Each covered cell is credited to the first node along ``sigma`` that
    covers it, which equals the telescoping chain without evaluating ``h``
    ``n`` times.
    """
    M, X = node_set(M), node_set(X)
    ctx = context if context is not None else AttackerContext(model.bank, M)
    n = model.bank.graph.n
    if ground is None:
        Ms = set(M)
        ground = [v for v in range(n) if v not in Ms]
    if sigma is None:
        sigma = default_permutation(X, ground)
    sigma = [int(v) for v in sigma]
    if sorted(sigma) != sorted(node_set(ground)) or len(set(sigma)) != len(sigma):
        raise ValidationError("sigma must be a permutation of the ground set")
    if set(sigma[:len(X)]) != set(X):
        raise ValidationError("X must be a prefix of sigma")
    cov = ctx.cov
    rank = np.full(n, np.iinfo(np.int64).max)
    rank[sigma] = np.arange(len(sigma))
    rows = np.repeat(np.arange(n), np.diff(cov.indptr))
    cols = cov.indices
    inground = rank[rows] < len(sigma)
    rows, cols = rows[inground], cols[inground]
    coeff = np.zeros(n)
    if len(rows):
        order = np.lexsort((rank[rows], cols))
        rows, cols = rows[order], cols[order]
        first = np.ones(len(cols), dtype=bool)
        first[1:] = cols[1:] != cols[:-1]
        K = model.bank.K
        owner = cols[first] // n
        counts = np.zeros((n, K))
        np.add.at(counts, (rows[first], owner), 1.0)
        coeff = counts @ model.w
    return ModularFunction(coeff, 0.0)


def _pad(P, ground, k) -> tuple:
    P = list(node_set(P))
    if len(P) > k:
        raise ValidationError("|P| exceeds the budget k")
    taken = set(P)
    for v in ground:
        if len(P) >= k:
            break
        if v not in taken:
            P.append(v)
    return node_set(P)


@dataclass
class LaiResult:
    S: tuple
    trace: list
    iterations: int


def lai_modular_modular(prob: LaiProblem, max_iters: int = 1) -> LaiResult:
    """Modular-modular descent from ``X0 = P`` (padded to size ``k``).

    A step is kept only if it strictly lowers ``H``; the first non-improving
    step ends the loop.  ``trace`` holds ``H`` of every accepted set.
    """
    ground = list(prob.ground)
    if not set(prob.P_true) <= set(ground):
        raise ValidationError("P must lie in the ground set")
    if not len(prob.P_true) <= prob.k <= len(ground):
        raise ValidationError("need |P| <= k <= |ground|")
    alpha = prob.loss.alpha
    G = prob.graph
    X = _pad(prob.P_true, ground, prob.k)
    hx = prob.H(X)
    trace = [hx]
    garr = np.array(ground, dtype=np.int64)
    it = 0
    for it in range(1, max_iters + 1):
        up = modular_upper_bound_sim(prob.loss, G, prob.P_true, X)
        low = modular_lower_bound_score(prob.model, prob.M, X, default_permutation(X, ground),
                                        prob.context, ground)
        c = alpha * up.coeff[garr] - low.coeff[garr]
        pick = np.argsort(c, kind="stable")[:prob.k]
        Xn = node_set(garr[pick].tolist())
        hn = prob.H(Xn)
        if not hn < hx:
            break
        X, hx = Xn, hn
        trace.append(hx)
    return LaiResult(X, trace, it)


def lai_hamming(prob: LaiProblem) -> LaiResult:
    """Hamming shortcut: the greedy score maximizer, or ``P`` itself if better."""
    S = node_set(greedy_select(prob.context, prob.model, prob.ground, prob.k))
    cands = [(prob.H(S), S)]
    if prob.P_true != S:
        cands.append((prob.H(prob.P_true), prob.P_true))
    h, best = min(cands, key=lambda t: t[0])
    return LaiResult(best, [h], 1)


def _check_cap(n_items: int, k: int, cap: int):
    total = math.comb(n_items, k)
    if total > cap:
        raise EnumerationCapError(f"C({n_items}, {k}) = {total} exceeds cap {cap}")


def brute_force_lai(prob: LaiProblem, cap: int = ENUMERATION_CAP) -> tuple:
    """Exact argmin of ``H`` over ``|S| = k``; ties to the lexicographically first set."""
    _check_cap(len(prob.ground), prob.k, cap)
    best, best_h = None, math.inf
    for S in itertools.combinations(prob.ground, prob.k):
        h = prob.H(S)
        if h < best_h:
            best, best_h = S, h
    return node_set(best)


def brute_force_max_score(model: ScoreModel, M, k: int, cap: int = ENUMERATION_CAP,
                          context: Optional[AttackerContext] = None) -> tuple:
    """Exact argmax of the score over ``|S| = min(k, |ground|)``."""
    M = node_set(M)
    ctx = context if context is not None else AttackerContext(model.bank, M)
    Ms = set(M)
    ground = [v for v in range(model.bank.graph.n) if v not in Ms]
    k = min(k, len(ground))
    _check_cap(len(ground), k, cap)
    best, best_v = (), -math.inf
    for S in itertools.combinations(ground, k):
        v = ctx.score(model, S)
        if v > best_v:
            best, best_v = S, v
    return node_set(best)
