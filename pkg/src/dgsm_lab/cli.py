"""Command-line front end.

Subcommands: ``run`` (replicated active-learning experiment), ``truth``
(ground-truth DGSMs for a benchmark problem), ``list-problems``, and
``list-acqs``.  Acquisition names are matched ignoring case and ``-``/``_``
separators, so ``dsq-ig``, ``DSqIG``, and ``dsq_ig`` are the same thing.
"""

import argparse
import json
import sys

from ._accel import BACKEND_NAME
from ._version import __version__
from .acquisitions import GLOBAL_TAGS, TAGS, AcquisitionKind
from .dgsm import ground_truth_dgsm
from .driver import ExperimentConfig, OptimizerSettings, run_experiment
from .problems import list_problems, make_problem

_ACQ_BLURBS = {
    "QR": "scrambled-Sobol quasirandom baseline (no model in the loop)",
    "Var": "function-variance baseline",
    "fIG": "function information-gain baseline",
    "DV": "total derivative variance",
    "DVr": "look-ahead derivative-variance reduction",
    "DIG": "derivative information gain",
    "DAbV": "absolute-derivative (folded-normal) variance",
    "DAbVr": "absolute-derivative variance reduction",
    "DSqV": "squared-derivative variance",
    "DSqVr": "squared-derivative variance reduction",
    "DSqIG": "squared-derivative entropy-index reduction",
    "GDVr": "node-averaged global variant of DVr",
    "GDIG": "node-averaged global variant of DIG",
    "GDAbVr": "node-averaged global variant of DAbVr",
    "GDSqVr": "node-averaged global variant of DSqVr",
    "GDSqIG": "node-averaged global variant of DSqIG",
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="dgsm-lab",
        description="Active learning of derivative-based global sensitivity "
                    "measures with Gaussian-process surrogates.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__} (backend: {BACKEND_NAME})")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a replicated active-learning experiment")
    run_p.add_argument("--problem", required=True, help="benchmark problem name")
    run_p.add_argument("--acq", required=True, help="acquisition name (see list-acqs)")
    run_p.add_argument("--budget", type=int, default=35,
                       help="total function evaluations per replicate (default 35)")
    run_p.add_argument("--init", type=int, default=5,
                       help="random initial design size (default 5)")
    run_p.add_argument("--replicates", type=int, default=50)
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--out", default=None, metavar="DIR",
                       help="write config.json/records.csv/summary.json/groundtruth.json here")
    run_p.add_argument("--dgsm-nodes", type=int, default=4096,
                       help="QMC nodes for the surrogate DGSM estimate (default 4096)")
    run_p.add_argument("--global-nodes", type=int, default=128,
                       help="node count M for global acquisitions (default 128)")
    run_p.add_argument("--truth-nodes", type=int, default=65536,
                       help="QMC nodes for ground truth (default 65536)")
    run_p.add_argument("--noise-sd", type=float, default=0.0,
                       help="observation noise standard deviation (default 0)")
    run_p.add_argument("--candidates", type=int, default=512,
                       help="acquisition-optimizer candidate count (default 512)")
    run_p.add_argument("--refine", type=int, default=8,
                       help="candidates refined by local ascent (default 8)")
    run_p.add_argument("--cache-dir", default=None,
                       help="ground-truth cache directory (default: user cache)")
    run_p.add_argument("--quiet", action="store_true",
                       help="suppress progress output on stderr")

    truth_p = sub.add_parser("truth", help="print ground-truth DGSMs as JSON")
    truth_p.add_argument("--problem", required=True)
    truth_p.add_argument("--nodes", type=int, default=65536)
    truth_p.add_argument("--cache-dir", default=None)
    truth_p.add_argument("--no-cache", action="store_true",
                         help="recompute even if a cached value exists")

    sub.add_parser("list-problems", help="list benchmark problems")
    sub.add_parser("list-acqs", help="list acquisition functions")
    return parser


def _resolve_acq(parser, name, global_nodes):
    try:
        return AcquisitionKind.from_name(name, global_nodes=global_nodes)
    except ValueError as exc:
        parser.error(str(exc))


def _cmd_run(parser, args):
    kind = _resolve_acq(parser, args.acq, args.global_nodes)
    try:
        config = ExperimentConfig(
            problem=args.problem, acquisition=kind, init_points=args.init,
            budget=args.budget, replicates=args.replicates, seed=args.seed,
            dgsm_nodes=args.dgsm_nodes, truth_nodes=args.truth_nodes,
            noise_sd=args.noise_sd,
            optimizer=OptimizerSettings(candidates=args.candidates,
                                        refine=args.refine),
            out_dir=args.out, cache_dir=args.cache_dir)
        make_problem(config.problem)
    except ValueError as exc:
        parser.error(str(exc))
    if not args.quiet:
        print(f"dgsm-lab {__version__} [{BACKEND_NAME} backend] — "
              f"{config.problem}, {kind.tag}, budget {config.budget}, "
              f"{config.replicates} replicate(s)", file=sys.stderr)
    try:
        summary = run_experiment(config)
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    failed = summary["failed_replicates"]
    if not args.quiet:
        for f in failed:
            print(f"replicate {f['replicate']} failed: {f['error']}", file=sys.stderr)
        final = summary["final"]
        line = ", ".join(f"{k}={final[k]['mean']:.4g}"
                         for k in ("rmse_sq", "rmse_abs", "ndcg_sq"))
        print(f"done: {summary['replicates_completed']}/"
              f"{summary['replicates_requested']} replicates; final {line}",
              file=sys.stderr)
        if config.out_dir:
            print(f"outputs in {config.out_dir}", file=sys.stderr)
    if not config.out_dir:
        json.dump(summary, sys.stdout, indent=2, sort_keys=True)
        print()
    return 0


def _cmd_truth(parser, args):
    try:
        problem = make_problem(args.problem)
    except ValueError as exc:
        parser.error(str(exc))
    est = ground_truth_dgsm(problem, args.nodes, cache_dir=args.cache_dir,
                            use_cache=not args.no_cache)
    doc = est.to_dict()
    doc["problem"] = problem.name
    json.dump(doc, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


def _cmd_list_problems():
    for name in list_problems():
        p = make_problem(name)
        lo = ", ".join(f"{v:g}" for v in p.box[:, 0])
        hi = ", ".join(f"{v:g}" for v in p.box[:, 1])
        print(f"{name:12s} d={p.dim}  box=[{lo}] .. [{hi}]")
    return 0


def _cmd_list_acqs():
    for tag in TAGS:
        marker = ("stream" if tag == "QR"
                  else "global" if tag in GLOBAL_TAGS else "local")
        print(f"{tag:8s} [{marker:6s}] {_ACQ_BLURBS[tag]}")
    return 0


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        return _cmd_run(parser, args)
    if args.command == "truth":
        return _cmd_truth(parser, args)
    if args.command == "list-problems":
        return _cmd_list_problems()
    return _cmd_list_acqs()


if __name__ == "__main__":
    sys.exit(main())
