"""Command-line front end.

Subcommands: ``simulate`` (engine only), ``learn`` (full online run),
``influence`` (map for a target), ``path`` (most influential route),
``compare`` (known-state vs majority-vote learner). Each takes a JSON
config file plus ``--seed`` / ``--out-dir`` overrides; exit code 0 on
success, 1 with a one-line diagnostic otherwise.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import experiments, graphs, influence, ogl


def _load_config(args) -> experiments.ExperimentConfig:
    config = experiments.ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    return config


def _analysis_matrix(args, config):
    """Weighted digraph for influence queries: a saved graph file, or the
    learned matrix from a fresh scenario run."""
    if args.graph_file is not None:
        record = graphs.load_graph(args.graph_file)
        if record.learned:
            return ogl.postprocess_learned(record.weights, config.tau_edge)
        return record.weights
    artifacts = experiments.run_scenario(config, args.out_dir)
    record = graphs.load_graph(artifacts.graph_learned)
    return ogl.postprocess_learned(record.weights, config.tau_edge)


def cmd_simulate(args) -> int:
    config = _load_config(args)
    artifacts = experiments.run_simulation(config, args.out_dir)
    print(artifacts.belief_trace)
    return 0


def cmd_learn(args) -> int:
    config = _load_config(args)
    artifacts = experiments.run_scenario(config, args.out_dir)
    for path in artifacts.all_paths():
        print(path)
    return 0


def cmd_influence(args) -> int:
    config = _load_config(args)
    matrix = _analysis_matrix(args, config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = args.target if args.target is not None else config.influence_target
    horizon = args.horizon if args.horizon is not None else config.d
    report = out / f"influence_target{target}.json"
    experiments.write_influence_report(
        report, matrix, target, horizon, config.delta, config.theta_count, config.top_paths
    )
    print(report)
    return 0


def cmd_path(args) -> int:
    config = _load_config(args)
    matrix = _analysis_matrix(args, config)
    horizon = args.horizon if args.horizon is not None else config.d
    best = influence.most_influential_path(
        matrix, args.source, args.target, horizon, config.delta, config.theta_count
    )
    print("->".join(str(node) for node in best.nodes), best.score)
    return 0


def cmd_compare(args) -> int:
    config = _load_config(args)
    result = experiments.compare_modes(config, args.out_dir)
    print(result.path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beliefgraph",
        description="Simulate social learning, recover the hidden graph, "
        "and explain agent influence.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out-dir", default="runs/latest", help="artifact directory")

    p = sub.add_parser("simulate", help="run the belief engine only")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("learn", help="full online graph-learning run")
    common(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("influence", help="influence map for a target agent")
    common(p)
    p.add_argument("--target", type=int, default=None)
    p.add_argument("--horizon", type=int, default=None, help="max path length")
    p.add_argument("--graph-file", default=None, help="analyze a saved graph")
    p.set_defaults(func=cmd_influence)

    p = sub.add_parser("path", help="most influential path between two agents")
    common(p)
    p.add_argument("--source", type=int, required=True)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--graph-file", default=None)
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("compare", help="known-state vs majority-vote learner")
    common(p)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
