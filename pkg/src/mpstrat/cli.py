"""Command-line pipeline: generate artifacts, train, predict, evaluate.

Every output file ``X`` gets a sibling ``X.manifest.json`` recording the
command, seeds and the SHA-256 of every input file.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys

from . import __version__
from .diffusion import TiePolicy, TriggeringModel
from .errors import ValidationError
from .experiment import (ExperimentConfig, PairPool, generate_pool, reports_to_csv, run_experiment,
                         summarize)
from .features import FeatureBank, ScoreModel, build_feature_bank, parse_distribution
from .graph import generate_er, generate_powerlaw, load_edge_list, node_set
from .inference import greedy_max_score
from .losses import LossSpec
from .training import TrainerConfig, one_slack_cutting_plane


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _sha(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _read(path) -> str:
    if not os.path.exists(path):
        raise ValidationError(f"file not found: {path}")
    with open(path) as fh:
        return fh.read()


def _write(path, text: str, args, inputs=(), seeds=None):
    with open(path, "w") as fh:
        fh.write(text)
    manifest = {
        "command": args.command,
        "config": getattr(args, "config", None),
        "seeds": seeds or {},
        "inputs": {p: _sha(p) for p in inputs},
        "output": {path: _sha(path)},
        "version": __version__,
    }
    with open(path + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def _graph(path):
    return load_edge_list(_read(path))


def _model(path, graph):
    return TriggeringModel.from_json(json.loads(_read(path)), graph)


def cmd_gen_graph(args):
    if args.type == "er":
        if args.m is None:
            raise ValidationError("--m is required for er graphs")
        g = generate_er(args.n, args.m, args.seed)
    else:
        g = generate_powerlaw(args.n, args.attach, args.seed)
    _write(args.out, g.to_edge_list(), args, seeds={"seed": args.seed})


def cmd_gen_model(args):
    g = _graph(args.graph)
    model = TriggeringModel.random(g, args.seed)
    obj = model.to_json()
    obj["graph"] = g.digest
    _write(args.out, json.dumps(obj), args, [args.graph], {"seed": args.seed})


def cmd_gen_pairs(args):
    g = _graph(args.graph)
    model = _model(args.model, g)
    pool = generate_pool(model, args.count, args.seed, args.exponent, args.max_size, args.sims,
                         TiePolicy(args.tie))
    pool.provenance["graph"] = g.digest
    _write(args.out, pool.to_jsonl(), args, [args.graph, args.model], {"seed": args.seed})


def cmd_gen_features(args):
    g = _graph(args.graph)
    model = _model(args.model, g) if args.model else None
    dist = parse_distribution(args.dist, model)
    bank = build_feature_bank(g, dist, args.k, args.seed, TiePolicy(args.tie))
    inputs = [args.graph] + ([args.model] if args.model else [])
    _write(args.out, json.dumps(bank.to_json()), args, inputs, {"seed": args.seed})


def _load_bank(path, graph_path=None):
    g = _graph(graph_path) if graph_path else None
    return FeatureBank.from_json(json.loads(_read(path)), g)


def cmd_train(args):
    pool = PairPool.from_jsonl(_read(args.pairs))
    bank = _load_bank(args.bank, args.graph)
    if pool.provenance.get("graph") not in (None, bank.graph.digest):
        raise ValidationError("bank and pairs were built on different graphs")
    settings = {}
    if args.config:
        settings = json.loads(_read(args.config))
    loss = LossSpec.parse(args.loss, args.alpha) if args.loss else LossSpec.from_json(settings)
    if args.loss is None and args.alpha is not None:
        loss = LossSpec(loss.kind, loss.j, args.alpha, loss.direction)
    tc = dict(settings)
    if "lai_iters" not in tc and "lai-iters" in tc:
        tc["lai_iters"] = tc["lai-iters"]
    for key in ("C", "epsilon", "lai_iters", "max_cp_iters"):
        val = getattr(args, key)
        if val is not None:
            tc[key] = val
    tc["threads"] = args.threads
    cfg = TrainerConfig.from_json(tc)
    result = one_slack_cutting_plane(pool.pairs, bank, loss, cfg)
    inputs = [p for p in (args.graph, args.pairs, args.bank, args.config) if p]
    _write(args.out, json.dumps(result.model.to_json()), args, inputs)
    if args.log:
        with open(args.log, "w") as fh:
            fh.write(result.log_lines())


def cmd_predict(args):
    bank = _load_bank(args.bank, args.graph)
    g = bank.graph
    model = ScoreModel.from_json(json.loads(_read(args.weights)), bank)
    try:
        M = node_set(int(x) for x in args.attacker.split(",") if x.strip())
    except ValueError:
        raise ValidationError(f"bad attacker list {args.attacker!r}") from None
    if not M or max(M) >= g.n:
        raise ValidationError("attacker must be a nonempty list of graph nodes")
    k = len(M) if args.k == "auto" else int(args.k)
    print(json.dumps(list(greedy_max_score(model, M, k))))


def cmd_evaluate(args):
    cfg = ExperimentConfig.load(args.config)
    if args.threads:
        cfg.threads = args.threads
    reports = run_experiment(cfg)
    base = os.path.dirname(os.path.abspath(args.config))
    obj = json.loads(_read(args.config))
    inputs = [args.config] + [os.path.join(base, obj[k]) for k in ("graph", "model", "pool")]
    _write(args.out, reports_to_csv(reports), args, inputs, {"seed": cfg.seed})
    summary_path = os.path.splitext(args.out)[0] + ".summary.json"
    with open(summary_path, "w") as fh:
        json.dump(summarize(reports), fh, indent=2, sort_keys=True)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mpstrat", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="worker cap; results do not depend on it")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    # --threads is accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)

    s = sub.add_parser("gen-graph", parents=[common])
    s.add_argument("--type", choices=["er", "powerlaw"], required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--m", type=int)
    s.add_argument("--attach", type=int, default=2)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_gen_graph)

    s = sub.add_parser("gen-model", parents=[common])
    s.add_argument("--graph", required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_gen_model)

    s = sub.add_parser("gen-pairs", parents=[common])
    s.add_argument("--graph", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--sims", type=int, default=2000)
    s.add_argument("--exponent", type=float, default=2.5)
    s.add_argument("--max-size", type=int, default=10)
    s.add_argument("--tie", choices=[t.value for t in TiePolicy], default="misinfo_wins")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_gen_pairs)

    s = sub.add_parser("gen-features", parents=[common])
    s.add_argument("--graph", required=True)
    s.add_argument("--dist", required=True, help="iid:<p>:<w> or matched")
    s.add_argument("--model", help="required for --dist matched")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--tie", choices=[t.value for t in TiePolicy], default="misinfo_wins")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_gen_features)

    s = sub.add_parser("train", parents=[common])
    s.add_argument("--graph", help="optional; the bank embeds its graph")
    s.add_argument("--pairs", required=True)
    s.add_argument("--bank", required=True)
    s.add_argument("--config", help="training config JSON; flags override it")
    s.add_argument("--loss", help="jhop:<j> or hamming")
    s.add_argument("--alpha", type=float)
    s.add_argument("--C", dest="C", type=float)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--lai-iters", dest="lai_iters", type=int)
    s.add_argument("--max-cp-iters", dest="max_cp_iters", type=int)
    s.add_argument("--log", help="write the per-round training log (JSON lines)")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_train)

    s = sub.add_parser("predict", parents=[common])
    s.add_argument("--graph", help="optional; the bank embeds its graph")
    s.add_argument("--weights", required=True)
    s.add_argument("--bank", required=True)
    s.add_argument("--attacker", required=True, help='comma-separated node ids, e.g. "3,17,42"')
    s.add_argument("--k", default="auto")
    s.set_defaults(fn=cmd_predict)

    s = sub.add_parser("evaluate", parents=[common])
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_evaluate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.fn(args)
    except (ValidationError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
