"""Command-line entry point: presets, oracle queries, learning, evaluation,
volume, accuracy sweeps, and RUL simulation, each writing a run manifest.

Every command derives all randomness from one master seed, writes outputs
with LF endings and 9-significant-digit floats, and records a manifest
(command, parameters, seed, input/output hashes, version, duration) next to
its primary output so a rerun can be checked byte for byte.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .forest import forest_from_json, forest_to_json, predict_proba
from .learner import (active_learn, baseline_build, baseline_from_json,
                      baseline_to_json, classification_report, estimate_volume,
                      forest_classifier, generate_test_set, oracle_classifier,
                      samples_to_csv)
from .line import line_from_json, line_to_json, preset, PRESETS
from .oracle import BudgetExhausted, OracleBudget, OriginInfeasible, check_feasibility
from .phm import DegradationParams, NotEnoughData, rul_over_time
from .util import dump_csv, dump_json, fmt9, load_json, sha256_file

EXIT_OK = 0
EXIT_INFEASIBLE = 1      # oracle query label (not an error)
EXIT_USAGE = 2
EXIT_SCHEMA = 3
EXIT_BUDGET = 4
EXIT_NO_DATA = 5

_EXIT_CODE_DOC = """\
exit codes:
  0  success (oracle query: degradation is feasible)
  1  oracle query: degradation is infeasible (mirrors the label)
  2  usage error (bad arguments or unknown subcommand)
  3  invalid input: missing file, schema violation, or inconsistent data
  4  oracle budget exhausted before the command could finish
  5  not enough usable observations for the forecast fit
"""


def _threads_default() -> int:
    env = os.environ.get("RESCAP_THREADS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def _load_line(path: str):
    return line_from_json(path)


def _load_capacity_model(path: str):
    """Return (membership_probability, hard_classifier) for a model file."""
    doc = load_json(path)
    if isinstance(doc, dict) and doc.get("kind") == "boundary_dominance":
        model = baseline_from_json(path)
        def proba(x):
            return model.classify(x).astype(np.float64)
        return proba, model.classify
    model = forest_from_json(path)
    def proba(x):
        return np.atleast_1d(predict_proba(model, x))
    return proba, forest_classifier(model)


def _manifest(args, started: float, inputs: list[str], outputs: list[str]) -> None:
    """Write <primary output>.manifest.json describing this run."""
    params = {k: v for k, v in vars(args).items() if k != "func"}
    doc = {
        "command": args.command,
        "parameters": params,
        "master_seed": params.get("seed"),
        "inputs": {p: sha256_file(p) for p in inputs},
        "outputs": {p: sha256_file(p) for p in outputs},
        "version": __version__,
        "duration_seconds": time.time() - started,
    }
    dump_json(doc, outputs[0] + ".manifest.json")


def _parse_floats(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v.strip() != ""])
    except ValueError as exc:
        raise ValueError(f"expected comma-separated numbers, got {text!r}") from exc


def _parse_ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ValueError(f"expected comma-separated integers, got {text!r}") from exc


# ------------------------------------------------------------- subcommands

def cmd_line_generate(args) -> int:
    started = time.time()
    inputs = []
    if args.preset:
        line = preset(args.preset)
    else:
        line = _load_line(args.custom)
        inputs.append(args.custom)
    line_to_json(line, args.out)
    _manifest(args, started, inputs, [args.out])
    print(f"wrote {args.out} ({line.n_machines} machines, "
          f"{len(line.parts)} parts)")
    return EXIT_OK


def cmd_oracle_query(args) -> int:
    line = _load_line(args.line)
    d = _parse_floats(args.d)
    budget = OracleBudget(args.budget) if args.budget else None
    label = check_feasibility(line, d, budget)
    print(f"{label.label} {label.solver_status}")
    return EXIT_OK if label.feasible else EXIT_INFEASIBLE


def cmd_capacity_learn(args) -> int:
    started = time.time()
    line = _load_line(args.line)
    budget = OracleBudget(args.budget)
    outputs = [args.out]
    if args.method == "active":
        model, samples = active_learn(line, budget, retrain_every=args.retrain_every,
                                      seed=args.seed, n_threads=args.threads)
        forest_to_json(model, args.out)
        if args.samples_out:
            samples_to_csv(samples, args.samples_out)
            outputs.append(args.samples_out)
    else:
        model = baseline_build(line, budget, seed=args.seed)
        baseline_to_json(model, args.out)
        if args.samples_out:
            samples_to_csv(model.samples, args.samples_out)
            outputs.append(args.samples_out)
    _manifest(args, started, [args.line], outputs)
    print(f"wrote {args.out} ({args.method}, budget {args.budget}, "
          f"{budget.used_calls} oracle calls)")
    return EXIT_OK


def cmd_capacity_eval(args) -> int:
    started = time.time()
    line = _load_line(args.line)
    _, classify = _load_capacity_model(args.model)
    test = generate_test_set(line, args.test_size, seed=args.seed,
                             balanced=args.balanced)
    report = classification_report(classify, test)
    doc = report.to_dict()
    doc["meta"] = {
        "line": args.line,
        "model": args.model,
        "test_size": args.test_size,
        "balanced": args.balanced,
        "seed": args.seed,
    }
    dump_json(doc, args.report)
    _manifest(args, started, [args.line, args.model], [args.report])
    print(f"accuracy {fmt9(report.accuracy)} on {args.test_size} points "
          f"-> {args.report}")
    return EXIT_OK


def cmd_capacity_volume(args) -> int:
    started = time.time()
    line = _load_line(args.line)
    inputs = [args.line]
    if args.model:
        _, classify = _load_capacity_model(args.model)
        predicate, source = classify, "model"
        inputs.append(args.model)
    else:
        predicate, source = oracle_classifier(line), "oracle"
    est = estimate_volume(predicate, line.n_machines, args.samples, seed=args.seed)
    doc = {
        "volume": est.mean,
        "half_width_95": est.half_width_95,
        "n_samples": est.n_samples,
        "seed": est.seed,
        "predicate": source,
    }
    dump_json(doc, args.out)
    _manifest(args, started, inputs, [args.out])
    print(f"volume {fmt9(est.mean)} +- {fmt9(est.half_width_95)} -> {args.out}")
    return EXIT_OK


def cmd_capacity_sweep(args) -> int:
    started = time.time()
    line = _load_line(args.line)
    budgets = _parse_ints(args.budgets)
    seeds = _parse_ints(args.seeds)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not budgets or not seeds or not methods:
        raise ValueError("budgets, seeds, and methods must be nonempty")
    unknown = [m for m in methods if m not in ("active", "baseline")]
    if unknown:
        raise ValueError(f"unknown methods: {unknown}")
    test = generate_test_set(line, args.test_size, seed=args.test_seed,
                             balanced=args.balanced)
    rows = []
    for budget in budgets:
        for method in methods:
            for seed in seeds:
                if method == "active":
                    model, _ = active_learn(line, OracleBudget(budget),
                                            seed=seed, n_threads=args.threads)
                    classify = forest_classifier(model)
                else:
                    classify = baseline_build(line, OracleBudget(budget),
                                              seed=seed).classify
                accuracy = classification_report(classify, test).accuracy
                rows.append([budget, method, seed, accuracy])
    dump_csv(args.out, ["budget", "method", "seed", "accuracy"], rows)
    _manifest(args, started, [args.line], [args.out])
    print(f"wrote {args.out} ({len(rows)} rows)")
    return EXIT_OK


def _load_truth(path: str, n_machines: int) -> list[DegradationParams]:
    doc = load_json(path)
    try:
        rows = doc["machines"]
        params = [DegradationParams(theta=float(r["theta"]), beta=float(r["beta"]),
                                    phi=float(r.get("phi", 0.0))) for r in rows]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"bad truth document: {exc}") from exc
    if len(params) != n_machines:
        raise ValueError(f"truth lists {len(params)} machines, line has {n_machines}")
    return params


def cmd_phm_simulate(args) -> int:
    started = time.time()
    line = _load_line(args.line)
    truth = _load_truth(args.truth, line.n_machines)
    inputs = [args.line, args.truth]

    def is_feasible(d):
        return check_feasibility(line, np.clip(d, 0.0, 1.0)).feasible

    if args.model:
        membership, _ = _load_capacity_model(args.model)
        inputs.append(args.model)
    else:
        def membership(x):
            return np.array([1.0 if is_feasible(d) else 0.0
                             for d in np.atleast_2d(x)])

    now_times = _parse_floats(args.now_times)
    rows = rul_over_time(truth, membership, is_feasible, now_times,
                         sigma_obs=args.obs_noise, n_traj=args.trajectories,
                         horizon=args.horizon, seed=args.seed)
    table = [[r.now, r.summary.mean, r.summary.ml, r.summary.q05, r.summary.q95,
              r.ground_truth, r.summary.survival_mass] for r in rows]
    dump_csv(args.out, ["now", "mean", "ml", "q05", "q95", "ground_truth",
                        "survival_mass"], table)
    _manifest(args, started, inputs, [args.out])
    print(f"wrote {args.out} ({len(rows)} decision times)")
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rescap",
        description="Learn a manufacturing line's resilience capacity and "
                    "use it for remaining-useful-life prognostics.",
        epilog=_EXIT_CODE_DOC,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_threads(p):
        p.add_argument("--threads", type=int, default=_threads_default(),
                       help="worker threads for forest training (default: "
                            "RESCAP_THREADS or 1); results do not depend on it")

    p = sub.add_parser("line", help="line configuration files")
    line_sub = p.add_subparsers(dest="line_command", required=True)
    g = line_sub.add_parser("generate", help="write a line configuration")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(PRESETS),
                     help="embedded example line")
    src.add_argument("--custom", help="validate and normalize a line JSON file")
    g.add_argument("--out", required=True, help="output line JSON")
    g.set_defaults(func=cmd_line_generate, command="line generate")

    p = sub.add_parser("oracle", help="feasibility oracle")
    oracle_sub = p.add_subparsers(dest="oracle_command", required=True)
    q = oracle_sub.add_parser(
        "query", help="is demand satisfiable under this degradation?")
    q.add_argument("--line", required=True)
    q.add_argument("--d", required=True,
                   help='degradation vector, e.g. "0.1,0.2"')
    q.add_argument("--budget", type=int, default=0,
                   help="optional oracle-call budget to charge")
    q.set_defaults(func=cmd_oracle_query, command="oracle query")

    p = sub.add_parser("capacity", help="learn and evaluate capacity models")
    cap_sub = p.add_subparsers(dest="capacity_command", required=True)

    c = cap_sub.add_parser("learn", help="train a capacity classifier")
    c.add_argument("--line", required=True)
    c.add_argument("--method", choices=("active", "baseline"), default="active")
    c.add_argument("--budget", type=int, required=True,
                   help="oracle feasibility-call budget")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--retrain-every", type=int, default=1)
    c.add_argument("--samples-out", default="",
                   help="optional CSV of the labeled samples")
    c.add_argument("--out", required=True, help="model JSON")
    add_threads(c)
    c.set_defaults(func=cmd_capacity_learn, command="capacity learn")

    c = cap_sub.add_parser("eval", help="score a model on an oracle-labeled set")
    c.add_argument("--line", required=True)
    c.add_argument("--model", required=True)
    c.add_argument("--test-size", type=int, default=1000)
    c.add_argument("--balanced", action="store_true")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--report", required=True, help="report JSON")
    c.set_defaults(func=cmd_capacity_eval, command="capacity eval")

    c = cap_sub.add_parser("volume", help="Monte-Carlo capacity volume")
    c.add_argument("--line", required=True)
    c.add_argument("--model", default="",
                   help="score this model instead of the exact oracle")
    c.add_argument("--samples", type=int, default=10000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True, help="volume JSON")
    c.set_defaults(func=cmd_capacity_volume, command="capacity volume")

    c = cap_sub.add_parser(
        "sweep", help="accuracy vs budget for both methods (plot data)")
    c.add_argument("--line", required=True)
    c.add_argument("--budgets", required=True, help='e.g. "41,81,161,321"')
    c.add_argument("--methods", default="active,baseline")
    c.add_argument("--seeds", default="0,1,2")
    c.add_argument("--test-size", type=int, default=2000)
    c.add_argument("--test-seed", type=int, default=1234)
    c.add_argument("--balanced", action="store_true")
    c.add_argument("--out", required=True, help="tidy CSV for plotting")
    add_threads(c)
    c.set_defaults(func=cmd_capacity_sweep, command="capacity sweep")

    p = sub.add_parser("phm", help="prognostics against a capacity model")
    phm_sub = p.add_subparsers(dest="phm_command", required=True)
    s = phm_sub.add_parser("simulate", help="RUL over accumulating observations")
    s.add_argument("--line", required=True)
    s.add_argument("--truth", required=True,
                   help='degradation truth JSON: {"machines": [{"theta": ..., '
                        '"beta": ..., "phi": ...}, ...]}')
    s.add_argument("--model", default="",
                   help="capacity model JSON (default: exact oracle)")
    s.add_argument("--now-times", required=True,
                   help='decision times in intervals, e.g. "3,4,5,6"')
    s.add_argument("--obs-noise", type=float, default=0.0)
    s.add_argument("--trajectories", type=int, default=200)
    s.add_argument("--horizon", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="RUL CSV")
    s.set_defaults(func=cmd_phm_simulate, command="phm simulate")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BudgetExhausted as exc:
        print(f"error: oracle budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except NotEnoughData as exc:
        print(f"error: not enough data: {exc}", file=sys.stderr)
        return EXIT_NO_DATA
    except (ValueError, KeyError, OSError, OriginInfeasible) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
