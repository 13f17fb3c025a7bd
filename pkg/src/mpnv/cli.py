"""Command-line interface: solve, estimate, build ambiguity sets, run studies."""

import argparse
import json
import sys

import numpy as np

from .ambiguity import AmbiguitySet, build_confidence_set, extreme_set, mle, prune_dominated
from .dro import CsConfig, cs_solve, full_minimax
from .errors import MpnvError
from .experiments import ExperimentConfig, run_matrix
from .fd import LineSearchConfig, fd_solve
from .report import write_report
from .types import DemandModel, SampleSet, load_problem


def _load_samples(path) -> np.ndarray:
    try:
        draws = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError:
        draws = np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1)
    return draws


def _emit(doc, path=None):
    text = json.dumps(doc, indent=2)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cmd_solve_fixed(args):
    instance, model = load_problem(args.instance)
    if args.model:
        with open(args.model) as fh:
            model = DemandModel.from_dict(json.load(fh))
    if model is None:
        raise MpnvError("no demand model: embed one in the instance or pass --model")
    cfg = LineSearchConfig(tau=args.tau, delta0=args.delta0,
                           eps_W=args.eps_w)
    report = fd_solve(instance, model, cfg)
    doc = report.to_dict()
    doc["spend"] = report.plan.spend(instance)
    _emit(doc, args.out)


def _cmd_solve_dro(args):
    instance, _ = load_problem(args.instance)
    amb = AmbiguitySet.from_jsonl(args.ambiguity)
    cfg = CsConfig(eps=args.eps, k_max=args.k_max, timeout_s=args.timeout_s)
    solver = full_minimax if args.full else cs_solve
    report = solver(instance, amb, cfg)
    if args.trace:
        report.write_trace_csv(args.trace)
    doc = report.to_dict()
    doc["spend"] = report.plan.spend(instance)
    _emit(doc, args.out)


def _cmd_estimate(args):
    samples = SampleSet(draws=_load_samples(args.samples))
    est = mle(samples, args.family)
    doc = {"family": est.family, "N": est.N}
    if est.family == "normal":
        doc["mu"] = [float(v) for v in est.mu_hat]
        doc["sigma"] = [float(v) for v in est.sigma_hat]
    else:
        doc["lambda"] = [float(v) for v in est.lambda_hat]
    _emit(doc, args.out)


def _cmd_build_ambiguity(args):
    samples = SampleSet(draws=_load_samples(args.samples))
    est = mle(samples, args.family)
    amb = build_confidence_set(est, args.alpha, args.grid_points)
    if args.prune_dominated:
        amb = prune_dominated(amb)
    if args.extreme:
        amb = extreme_set(amb)
    amb.to_jsonl(args.out)
    print(f"wrote {len(amb)} members ({amb.provenance}) to {args.out}")


def _cmd_experiment(args):
    if args.write_default_config:
        ExperimentConfig().to_json(args.write_default_config)
        print(f"wrote default config to {args.write_default_config}")
        return
    config = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.out:
        overrides["output_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.timeout_s is not None:
        overrides["timeout_s"] = args.timeout_s
    if overrides:
        from dataclasses import replace
        config = replace(config, **overrides)
    paths = run_matrix(config)
    for name, path in paths.items():
        print(f"{name}: {path}")


def _cmd_report(args):
    paths = write_report(args.results, args.out)
    for name, path in paths.items():
        print(f"{name}: {path}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpnv",
        description="Budget-constrained multi-period newsvendor solvers "
                    "(fixed-distribution heuristic and cutting-surface DRO).")
    sub = parser.add_subparsers(dest="command", required=True)

    sf = sub.add_parser("solve-fixed", help="FD heuristic under a known demand model")
    sf.add_argument("--instance", required=True)
    sf.add_argument("--model", help="JSON demand model (overrides any embedded model)")
    sf.add_argument("--tau", type=float, default=0.5)
    sf.add_argument("--delta0", type=float, default=1.0)
    sf.add_argument("--eps-w", type=float, default=None, dest="eps_w")
    sf.add_argument("--out")
    sf.set_defaults(func=_cmd_solve_fixed)

    sd = sub.add_parser("solve-dro", help="cutting-surface (or full) DRO solve")
    sd.add_argument("--instance", required=True)
    sd.add_argument("--ambiguity", required=True, help="ambiguity JSONL file")
    sd.add_argument("--eps", type=float, default=1e-6)
    sd.add_argument("--k-max", type=int, default=10, dest="k_max")
    sd.add_argument("--timeout-s", type=float, default=None, dest="timeout_s")
    sd.add_argument("--full", action="store_true", help="solve over the full set")
    sd.add_argument("--trace", help="write the iteration trace CSV here")
    sd.add_argument("--out")
    sd.set_defaults(func=_cmd_solve_dro)

    es = sub.add_parser("estimate", help="maximum-likelihood parameter estimates")
    es.add_argument("--samples", required=True, help="CSV, one sample row per line")
    es.add_argument("--family", required=True, choices=["normal", "poisson"])
    es.add_argument("--out")
    es.set_defaults(func=_cmd_estimate)

    ba = sub.add_parser("build-ambiguity", help="confidence-set ambiguity from samples")
    ba.add_argument("--samples", required=True)
    ba.add_argument("--family", required=True, choices=["normal", "poisson"])
    ba.add_argument("--alpha", type=float, default=0.05)
    ba.add_argument("--grid-points", type=int, default=5, dest="grid_points")
    ba.add_argument("--prune-dominated", action="store_true", dest="prune_dominated")
    ba.add_argument("--extreme", action="store_true")
    ba.add_argument("--out", required=True)
    ba.set_defaults(func=_cmd_build_ambiguity)

    ex = sub.add_parser("experiment", help="run the desk-scale experiment matrix")
    ex.add_argument("--config", help="JSON config; defaults to the desk matrix")
    ex.add_argument("--out", help="output directory override")
    ex.add_argument("--seed", type=int)
    ex.add_argument("--workers", type=int)
    ex.add_argument("--timeout-s", type=float, dest="timeout_s")
    ex.add_argument("--write-default-config", dest="write_default_config",
                    help="write the default config JSON here and exit")
    ex.set_defaults(func=_cmd_experiment)

    rp = sub.add_parser("report", help="summaries and SVG figures from result CSVs")
    rp.add_argument("--results", required=True, help="run_matrix output directory")
    rp.add_argument("--out", help="report directory (defaults to --results)")
    rp.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except MpnvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
