"""Learn a protector strategy from examples and compare it with baselines.

Pairs come from the bundled 100-node fixture.  Each pair is an attacker
set and the protector a Monte-Carlo greedy oracle picked for it.
"""
import json
import os

import numpy as np

from mpstrat.diffusion import TriggeringModel
from mpstrat.experiment import Evaluator, PairPool, baseline_high_degree, baseline_rand
from mpstrat.features import IidEdges, build_feature_bank
from mpstrat.graph import load_edge_list
from mpstrat.inference import greedy_max_score
from mpstrat.losses import LossSpec
from mpstrat.training import TrainerConfig, one_slack_cutting_plane

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, "..", "tests", "data", "er100")


def read(name):
    with open(os.path.join(DATA, name)) as fh:
        return fh.read()


G = load_edge_list(read("graph.txt"))
model = TriggeringModel.from_json(json.loads(read("model.json")), G)
pool = PairPool.from_jsonl(read("pairs.jsonl"))
train, test = pool.split(60, 30, seed=0)
print(f"{len(train)} training pairs, {len(test)} test pairs")

# Features: random subgraphs keeping each edge with probability 0.05.
bank = build_feature_bank(G, IidEdges(0.05, 1.0), K=200, seed=0)
result = one_slack_cutting_plane(train, bank, LossSpec("jhop", 1, 1000.0), TrainerConfig())
print(f"training stopped after {result.rounds} rounds (converged={result.converged})")
print(f"nonzero weights: {np.count_nonzero(result.model.w)} of {bank.K}")

ev = Evaluator(model, n_sims=2000, seed=1)
rng = np.random.default_rng(2)
methods = {
    "learned": lambda M, k: greedy_max_score(result.model, M, k),
    "rand": lambda M, k: baseline_rand(G, M, k, rng),
    "hd": lambda M, k: baseline_high_degree(G, M, k),
}
for name, fn in methods.items():
    ratios = [ev.ratio(p.M, fn(p.M, len(p.M)), p.P).ratio for p in test]
    print(f"{name:>8}: mean performance ratio {np.mean(ratios):.3f}")
