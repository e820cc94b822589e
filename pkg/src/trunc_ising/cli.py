"""Command line interface.

Subcommands: check, sample, estimate, oracle, diagnose, experiment.
Exit codes: 0 success, 1 usage or file errors, 2 domain errors (unsatisfiable
instance, parameter out of range, degenerate objective, ...).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from typing import Optional

import numpy as np

from .cnf import empty_formula, load_cnf
from .diagnostics import (
    check_conditional_magnetization,
    check_curvature_floor,
    check_flippable_fraction,
    check_gradient_concentration,
    check_regime,
    check_shielding_probability,
    results_to_csv,
)
from .errors import TruncIsingError
from .graph import greedy_2hop_disjoint, load_graph, search_covering_independent_set
from .harness import (
    RunConfig,
    consistency_sweep,
    run_trials,
    sweep_to_csv,
    trials_to_csv,
    write_outputs,
)
from .model import (
    TruncatedIsingModel,
    default_burn_in,
    find_satisfying_config,
    load_samples,
    run_glauber,
    sample_exact,
    serialize_samples,
)
from .mple import estimate_mple, mle_oracle

_ALL_CHECKS = (
    "grad_concentration",
    "curvature_floor",
    "shielding",
    "conditional_moment",
    "flippable_fraction",
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; remap to 1 via exception
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _load_model(args, beta_bound: float) -> TruncatedIsingModel:
    graph = load_graph(args.graph)
    if args.cnf is None:
        formula = empty_formula(graph.num_vertices)
    else:
        formula = load_cnf(args.cnf)
    return TruncatedIsingModel(graph, formula, beta_bound=beta_bound)


def _add_instance_args(p, cnf_required: bool = False):
    p.add_argument("--graph", required=True, help="interaction graph file")
    p.add_argument(
        "--cnf",
        required=cnf_required,
        default=None,
        help="DIMACS formula file (omit for the unconstrained cube)",
    )


def _cmd_check(args) -> int:
    graph = load_graph(args.graph)
    formula = load_cnf(args.cnf) if args.cnf else empty_formula(graph.num_vertices)
    if formula.num_vars != graph.num_vertices:
        raise ValueError("formula and graph disagree on variable count")
    report = check_regime(formula, graph, args.B)
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def _resolve_sampler(choice: Optional[str], n: int) -> str:
    if choice is not None:
        return choice
    return "exact" if n <= 20 else "glauber"


def _cmd_sample(args) -> int:
    model = _load_model(args, beta_bound=max(args.B, abs(args.beta)))
    beta = args.beta
    rng = np.random.default_rng(args.seed)
    sampler = _resolve_sampler(args.sampler, model.n)
    draws = np.empty((args.trials, model.n), dtype=np.int8)
    if sampler == "exact":
        draws = np.atleast_2d(sample_exact(model, beta, rng, size=args.trials))
    else:
        burn = args.burn_in if args.burn_in is not None else default_burn_in(model.n)
        for t in range(args.trials):
            start = find_satisfying_config(model, rng)
            draws[t] = run_glauber(model, beta, start, burn + args.steps, rng)
    text = serialize_samples(draws)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_estimate(args) -> int:
    model = _load_model(args, beta_bound=args.B)
    sample = load_samples(args.sample, num_vars=model.n)[0]
    report = estimate_mple(
        model,
        sample,
        B=args.B,
        max_iters=args.max_iters,
        grad_tol=args.grad_tol,
    )
    print(report.to_json())
    return 0


def _cmd_oracle(args) -> int:
    model = _load_model(args, beta_bound=args.B)
    sample = load_samples(args.sample, num_vars=model.n)[0]
    mple = estimate_mple(model, sample, B=args.B, grad_tol=args.grad_tol)
    mle = mle_oracle(model, sample, B=args.B)
    out = {
        "beta_mple": mple.beta_hat,
        "beta_mle": mle,
        "abs_diff": abs(mple.beta_hat - mle),
    }
    print(json.dumps(out, indent=2))
    return 0


def _cmd_diagnose(args) -> int:
    model = _load_model(args, beta_bound=max(args.B, abs(args.beta)))
    rng = np.random.default_rng(args.seed)
    names = [c.strip() for c in args.checks.split(",") if c.strip()]
    unknown = [c for c in names if c not in _ALL_CHECKS]
    if unknown:
        raise _UsageError(
            f"unknown checks {unknown}; available: {', '.join(_ALL_CHECKS)}"
        )
    iset = None
    subset = None
    if "shielding" in names or "flippable_fraction" in names:
        found = search_covering_independent_set(
            model.graph, model.formula, args.target_lambda, args.max_tries, rng
        )
        iset = found.independent_set
    if "flippable_fraction" in names:
        closed = set(iset)
        for v in iset:
            closed.update(model.graph.neighbors(v))
        candidates = [v for v in range(model.n) if v not in closed]
        subset = greedy_2hop_disjoint(model.graph, model.formula, candidates)
    results = []
    for name in names:
        if name == "grad_concentration":
            results.append(
                check_gradient_concentration(
                    model, args.beta, args.delta, args.trials, rng
                )
            )
        elif name == "curvature_floor":
            results.append(check_curvature_floor(model, args.beta, args.trials, rng))
        elif name == "shielding":
            results.append(
                check_shielding_probability(model, args.beta, iset, args.trials, rng)
            )
        elif name == "conditional_moment":
            results.append(check_conditional_magnetization(model, args.beta))
        elif name == "flippable_fraction":
            results.append(
                check_flippable_fraction(model, args.beta, subset, args.trials, rng)
            )
    text = results_to_csv(results)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _parse_sizes(raw: str) -> list:
    try:
        sizes = [int(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError:
        raise _UsageError(f"bad --sizes value {raw!r}; expected e.g. 64,128,256")
    if not sizes or any(s < 1 for s in sizes):
        raise _UsageError("sizes must be positive integers")
    return sizes


def _cmd_experiment(args) -> int:
    data = {}
    if args.config:
        with open(args.config) as fh:
            raw = fh.read()
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise _UsageError(f"config {args.config}: {exc}")
        if not isinstance(data, dict):
            raise _UsageError("config must be a JSON object")

    if args.graph is not None and args.n is not None:
        raise _UsageError("give either --graph or --n/--delta, not both")
    if args.graph is not None:
        data["graph_source"] = args.graph
    elif args.n is not None or args.delta is not None or args.sign_bias is not None:
        gs = data.get("graph_source")
        gs = dict(gs) if isinstance(gs, dict) else {}
        if args.n is not None:
            gs["n"] = args.n
        if args.delta is not None:
            gs["delta"] = args.delta
        if args.sign_bias is not None:
            gs["sign_bias"] = args.sign_bias
        data["graph_source"] = gs

    if args.cnf is not None and args.k is not None:
        raise _UsageError("give either --cnf or --k/--d, not both")
    if args.cnf is not None:
        data["formula_source"] = args.cnf
    elif args.k is not None or args.d is not None:
        fs = data.get("formula_source")
        fs = dict(fs) if isinstance(fs, dict) else {}
        if args.k is not None:
            fs["k"] = args.k
        if args.d is not None:
            fs["d"] = args.d
        data["formula_source"] = fs

    overrides = [
        ("beta_star", args.beta),
        ("B", args.B),
        ("seed", args.seed),
        ("trials", args.trials),
        ("sampler", args.sampler),
        ("steps", args.steps),
        ("burn_in", args.burn_in),
        ("grad_tol", args.grad_tol),
        ("outputs", args.out),
    ]
    for name, val in overrides:
        if val is not None:
            data[name] = val

    if "graph_source" not in data:
        raise _UsageError("an experiment needs --graph or --n/--delta (or a config)")
    if "beta_star" not in data:
        raise _UsageError("an experiment needs --beta (or beta_star in the config)")
    data.setdefault("B", 1.0)
    data.setdefault("trials", 10)
    data.setdefault("seed", 0)

    sizes = _parse_sizes(args.sizes) if args.sizes else None
    if "sampler" not in data:
        if sizes:
            n_max = max(sizes)
        elif isinstance(data["graph_source"], dict):
            n_max = int(data["graph_source"].get("n", 0))
        else:
            n_max = load_graph(data["graph_source"]).num_vertices
        data["sampler"] = "exact" if n_max <= 20 else "glauber"

    try:
        config = RunConfig.from_json(json.dumps(data))
    except (ValueError, TypeError) as exc:
        raise _UsageError(str(exc))

    t0 = time.perf_counter()
    if sizes:
        sweep = consistency_sweep(config, sizes, config.trials)
        records = sweep.records
    else:
        sweep = None
        records = run_trials(config)
    wall = time.perf_counter() - t0

    if config.outputs:
        summary = write_outputs(config.outputs, config, records, sweep, wall)
        print(json.dumps(summary, indent=2))
    else:
        sys.stdout.write(trials_to_csv(records))
        if sweep is not None:
            sys.stdout.write(sweep_to_csv(sweep.rows))
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="trunc-ising", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="report regime thresholds for an instance")
    _add_instance_args(p, cnf_required=True)
    p.add_argument("--B", type=float, default=1.0)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("sample", help="draw satisfying configurations")
    _add_instance_args(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--B", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--sampler", choices=("exact", "glauber"), default=None)
    p.add_argument("--steps", type=int, default=0)
    p.add_argument("--burn-in", type=int, default=None, dest="burn_in")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("estimate", help="estimate beta from one sample")
    _add_instance_args(p)
    p.add_argument("--sample", required=True, help="sample file; first row is used")
    p.add_argument("--B", type=float, default=1.0)
    p.add_argument("--grad-tol", type=float, default=None, dest="grad_tol")
    p.add_argument("--max-iters", type=int, default=None, dest="max_iters")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("oracle", help="compare the estimate to exact likelihood")
    _add_instance_args(p)
    p.add_argument("--sample", required=True)
    p.add_argument("--B", type=float, default=1.0)
    p.add_argument("--grad-tol", type=float, default=1e-8, dest="grad_tol")
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("diagnose", help="run the empirical guarantee checkers")
    _add_instance_args(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--B", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--delta", type=float, default=0.1, help="failure budget")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checks", default=",".join(_ALL_CHECKS))
    p.add_argument("--target-lambda", type=float, default=0.5, dest="target_lambda")
    p.add_argument("--max-tries", type=int, default=200, dest="max_tries")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("experiment", help="run repeated estimation trials")
    p.add_argument("--config", default=None, help="JSON run configuration")
    p.add_argument("--graph", default=None)
    p.add_argument("--cnf", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--delta", type=int, default=None)
    p.add_argument("--sign-bias", type=float, default=None, dest="sign_bias")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--B", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--sampler", choices=("exact", "glauber"), default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--burn-in", type=int, default=None, dest="burn_in")
    p.add_argument("--grad-tol", type=float, default=None, dest="grad_tol")
    p.add_argument("--sizes", default=None, help="comma-separated n ladder")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TruncIsingError, ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
