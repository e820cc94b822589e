"""Repeated-trial experiment runner.

A RunConfig describes one experiment: an instance (loaded from files or drawn
from generators), a true inverse temperature, a sampler, and a trial count.
run_trials executes the trials in a thread pool; every trial re-derives its
random generator as default_rng(seed ^ trial_id), so results are independent
of scheduling order and worker count, and CSV outputs are byte-identical
across runs. consistency_sweep repeats an experiment over a ladder of sizes
and fits a log-log slope of median error against n.

Thread count comes from TRUNC_ISING_THREADS when set, else min(4, cpu_count).
"""

from __future__ import annotations

import dataclasses
import io
import json
import math
import os
import time
import csv as _csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .backend import BACKEND
from .cnf import CnfFormula, Literal, empty_formula, flippable_mask, formula_stats, load_cnf
from .errors import DegenerateObjectiveError, EmptySupportError, InfeasibleInstanceError
from .graph import generate_regular_signed_graph, load_graph
from .model import (
    TruncatedIsingModel,
    default_burn_in,
    enumerate_exact,
    find_satisfying_config,
    run_glauber,
    sample_exact,
)
from .mple import estimate_mple

TRIALS_CSV_HEADER = (
    "trial_id", "n", "delta", "k", "d", "beta_star", "beta_hat",
    "abs_error", "flippable_count", "iterations", "converged", "sampler_kind",
)

SWEEP_CSV_HEADER = ("n", "trials", "median_abs_error", "p90_abs_error")

_GENERATE_ATTEMPTS = 50


def generate_regime_formula(
    n: int,
    k: int,
    d: int,
    rng: np.random.Generator,
    num_clauses: Optional[int] = None,
) -> CnfFormula:
    """Draw a width-k formula on n variables with per-variable occurrence <= d.

    Clause count defaults to floor(n*d/(2k)), half the occurrence budget, so
    the greedy variable pool rarely runs dry. Polarities are uniform. Raises
    InfeasibleInstanceError when the requested counts cannot fit.
    """
    if n < 1 or k < 1 or d < 1:
        raise ValueError("n, k, d must all be >= 1")
    if k > n:
        raise InfeasibleInstanceError(f"clause width {k} exceeds variable count {n}")
    m = int(n * d // (2 * k)) if num_clauses is None else int(num_clauses)
    if m < 0:
        raise ValueError("num_clauses must be nonnegative")
    if m * k > n * d:
        raise InfeasibleInstanceError(
            f"{m} clauses of width {k} exceed the occurrence budget n*d = {n * d}"
        )
    counts = np.zeros(n, dtype=np.int64)
    clauses = []
    for _ in range(m):
        avail = np.flatnonzero(counts < d)
        if avail.size < k:
            raise InfeasibleInstanceError(
                "variable pool exhausted; lower num_clauses or raise d"
            )
        chosen = rng.choice(avail, size=k, replace=False)
        negs = rng.random(k) < 0.5
        clauses.append(
            [Literal(int(v), bool(neg)) for v, neg in zip(chosen, negs)]
        )
        counts[chosen] += 1
    return CnfFormula(n, clauses)


@dataclass
class RunConfig:
    """Experiment description; JSON keys match the field names exactly."""

    graph_source: Union[str, dict]
    beta_star: float
    B: float
    trials: int
    seed: int
    formula_source: Union[str, dict, None] = None
    sampler: str = "exact"
    steps: int = 0
    burn_in: Optional[int] = None
    outputs: Optional[str] = None
    grad_tol: Optional[float] = None

    def __post_init__(self):
        if self.sampler not in ("exact", "glauber"):
            raise ValueError("sampler must be 'exact' or 'glauber'")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.B > 0:
            raise ValueError("B must be positive")
        if not abs(self.beta_star) < self.B:
            raise ValueError("beta_star must lie strictly inside [-B, B]")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")
        if self.burn_in is not None and self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        if isinstance(self.graph_source, dict):
            missing = {"n", "delta"} - set(self.graph_source)
            if missing:
                raise ValueError(f"graph_source dict missing keys: {sorted(missing)}")
        if isinstance(self.formula_source, dict):
            missing = {"k", "d"} - set(self.formula_source)
            if missing:
                raise ValueError(f"formula_source dict missing keys: {sorted(missing)}")

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ValueError("config must be a JSON object")
        allowed = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class TrialRecord:
    trial_id: int
    n: int
    delta: int
    k: int
    d: int
    beta_star: float
    beta_hat: float
    abs_error: float
    flippable_count: int
    iterations: int
    converged: bool
    sampler_kind: str
    wall_time: float = 0.0  # not serialized; timings vary run to run

    def to_csv_row(self) -> list:
        return [
            self.trial_id, self.n, self.delta, self.k, self.d,
            self.beta_star, self.beta_hat, self.abs_error,
            self.flippable_count, self.iterations,
            "true" if self.converged else "false", self.sampler_kind,
        ]


def trials_to_csv(records: Sequence[TrialRecord]) -> str:
    buf = io.StringIO()
    writer = _csv.writer(buf, lineterminator="\n")
    writer.writerow(TRIALS_CSV_HEADER)
    for r in records:
        writer.writerow(r.to_csv_row())
    return buf.getvalue()


def _worker_count() -> int:
    raw = os.environ.get("TRUNC_ISING_THREADS", "")
    if raw:
        count = int(raw)
        if count < 1:
            raise ValueError("TRUNC_ISING_THREADS must be a positive integer")
        return count
    return min(4, os.cpu_count() or 1)


def _generate_instance(config: RunConfig, n: int, rng: np.random.Generator):
    gs = config.graph_source
    graph = generate_regular_signed_graph(
        n, int(gs["delta"]), float(gs.get("sign_bias", 0.5)), rng
    )
    fs = config.formula_source
    if fs is None:
        formula = empty_formula(n)
    else:
        formula = generate_regime_formula(
            n, int(fs["k"]), int(fs["d"]), rng, fs.get("num_clauses")
        )
    return graph, formula


def _draw_sample(model: TruncatedIsingModel, config: RunConfig, rng) -> np.ndarray:
    if config.sampler == "exact":
        return sample_exact(model, config.beta_star, rng)
    start = find_satisfying_config(model, rng)
    burn = config.burn_in if config.burn_in is not None else default_burn_in(model.n)
    return run_glauber(model, config.beta_star, start, burn + config.steps, rng)


def _single_trial(
    config: RunConfig,
    trial_id: int,
    shared_model: Optional[TruncatedIsingModel],
    n: int,
) -> TrialRecord:
    rng = np.random.default_rng(config.seed ^ trial_id)
    t0 = time.perf_counter()
    if shared_model is not None:
        model = shared_model
        sample = _draw_sample(model, config, rng)
    else:
        # a generated instance may be unsatisfiable; redraw a bounded number of times
        for _ in range(_GENERATE_ATTEMPTS):
            try:
                graph, formula = _generate_instance(config, n, rng)
                model = TruncatedIsingModel(graph, formula, beta_bound=config.B)
                sample = _draw_sample(model, config, rng)
                break
            except EmptySupportError:
                continue
        else:
            raise EmptySupportError(
                f"no satisfiable instance in {_GENERATE_ATTEMPTS} attempts"
            )
    _, k_max, d = formula_stats(model.formula)
    try:
        report = estimate_mple(
            model, sample, B=config.B, grad_tol=config.grad_tol
        )
        beta_hat = report.beta_hat
        abs_error = abs(beta_hat - config.beta_star)
        flippable_count = report.flippable_count
        iterations = report.iterations
        converged = report.converged
    except DegenerateObjectiveError:
        beta_hat = math.nan
        abs_error = math.nan
        flippable_count = int(flippable_mask(model.formula, sample).sum())
        iterations = 0
        converged = False
    return TrialRecord(
        trial_id=trial_id,
        n=model.n,
        delta=model.graph.max_degree,
        k=k_max,
        d=d,
        beta_star=config.beta_star,
        beta_hat=beta_hat,
        abs_error=abs_error,
        flippable_count=flippable_count,
        iterations=iterations,
        converged=converged,
        sampler_kind=config.sampler,
        wall_time=time.perf_counter() - t0,
    )


def run_trials(
    config: RunConfig,
    trial_id_offset: int = 0,
    n_override: Optional[int] = None,
) -> list:
    """Run config.trials independent trials; records come back sorted by id."""
    shared_model = None
    if isinstance(config.graph_source, str):
        if n_override is not None:
            raise ValueError("cannot override n for a file-based instance")
        graph = load_graph(config.graph_source)
        if config.formula_source is None:
            formula = empty_formula(graph.num_vertices)
        elif isinstance(config.formula_source, str):
            formula = load_cnf(config.formula_source)
        else:
            raise ValueError(
                "a file-based graph needs a file-based (or absent) formula"
            )
        shared_model = TruncatedIsingModel(graph, formula, beta_bound=config.B)
        n = shared_model.n
        if config.sampler == "exact":
            # warm the enumeration cache so worker threads only read it
            enumerate_exact(shared_model, config.beta_star).probabilities
    else:
        if isinstance(config.formula_source, str):
            raise ValueError("a generated graph needs a generated (or absent) formula")
        n = int(n_override if n_override is not None else config.graph_source["n"])

    ids = [trial_id_offset + i for i in range(config.trials)]
    workers = _worker_count()
    if workers == 1 or config.trials == 1:
        records = [_single_trial(config, t, shared_model, n) for t in ids]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(
                pool.map(lambda t: _single_trial(config, t, shared_model, n), ids)
            )
    records.sort(key=lambda r: r.trial_id)
    return records


@dataclass
class SweepRow:
    n: int
    trials: int
    median_abs_error: float
    p90_abs_error: float


@dataclass
class SweepResult:
    records: list
    rows: list
    slope: Optional[float]


def consistency_sweep(
    base: RunConfig, sizes: Sequence[int], trials_per_size: int
) -> SweepResult:
    """Repeat the experiment at each size and fit slope of log median error vs log n."""
    if not isinstance(base.graph_source, dict):
        raise ValueError("a sweep needs a generated graph_source to vary n")
    if trials_per_size < 1:
        raise ValueError("trials_per_size must be >= 1")
    if not sizes:
        raise ValueError("sizes must be nonempty")
    all_records = []
    rows = []
    for idx, n in enumerate(sizes):
        cfg = dataclasses.replace(base, trials=trials_per_size)
        records = run_trials(
            cfg, trial_id_offset=idx * trials_per_size, n_override=int(n)
        )
        errors = np.array([r.abs_error for r in records], dtype=np.float64)
        rows.append(
            SweepRow(
                n=int(n),
                trials=trials_per_size,
                median_abs_error=float(np.nanmedian(errors)),
                p90_abs_error=float(np.nanpercentile(errors, 90)),
            )
        )
        all_records.extend(records)
    slope = None
    if len(rows) >= 2 and all(
        math.isfinite(r.median_abs_error) and r.median_abs_error > 0 for r in rows
    ):
        xs = np.log([r.n for r in rows])
        ys = np.log([r.median_abs_error for r in rows])
        slope = float(np.polyfit(xs, ys, 1)[0])
    return SweepResult(records=all_records, rows=rows, slope=slope)


def sweep_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = _csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_CSV_HEADER)
    for r in rows:
        writer.writerow([r.n, r.trials, r.median_abs_error, r.p90_abs_error])
    return buf.getvalue()


def write_outputs(
    outdir: str,
    config: RunConfig,
    records: Sequence[TrialRecord],
    sweep: Optional[SweepResult] = None,
    wall_time: float = 0.0,
) -> dict:
    """Write trials.csv, sweep.csv (when present), and summary.json under outdir."""
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "trials.csv"), "w") as fh:
        fh.write(trials_to_csv(records))
    if sweep is not None:
        with open(os.path.join(outdir, "sweep.csv"), "w") as fh:
            fh.write(sweep_to_csv(sweep.rows))
    errors = np.array([r.abs_error for r in records], dtype=np.float64)
    summary = {
        "config": config.to_dict(),
        "backend": BACKEND,
        "num_trials": len(records),
        "median_abs_error": float(np.nanmedian(errors)) if len(records) else None,
        "slope": sweep.slope if sweep is not None else None,
        "wall_time": wall_time,
    }
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary
