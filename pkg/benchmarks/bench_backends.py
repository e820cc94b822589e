"""Compare the compiled and pure-numpy kernel backends on the hot paths.

Run from the repository root:

    python3 benchmarks/bench_backends.py [--steps N] [--enum-n N]

The parent process launches one child per backend (TRUNC_ISING_BACKEND set in
the child's environment, since the backend is fixed at import time) and
prints a small table. Workloads are identical across backends; compiled
timings exclude the one-off JIT cost by warming each kernel first.
"""

import argparse
import json
import os
import subprocess
import sys
import time


def child(steps: int, enum_n: int) -> None:
    import numpy as np

    import trunc_ising as ti

    rng = np.random.default_rng(42)
    graph = ti.generate_regular_signed_graph(256, 3, 0.5, rng)
    formula = ti.generate_regime_formula(256, 7, 2, rng)
    model = ti.TruncatedIsingModel(graph, formula, beta_bound=1.0)
    spins = ti.find_satisfying_config(model, rng)

    # chain throughput
    chain_rng = np.random.default_rng(7)
    ti.run_glauber(model, 0.3, spins, 1000, chain_rng)  # warm the kernels
    t0 = time.perf_counter()
    ti.run_glauber(model, 0.3, spins, steps, chain_rng)
    chain_seconds = time.perf_counter() - t0

    # support enumeration
    erng = np.random.default_rng(42)
    egraph = ti.generate_regular_signed_graph(enum_n, 3, 0.5, erng)
    eformula = ti.generate_regime_formula(enum_n, 3, 2, erng)
    emodel = ti.TruncatedIsingModel(
        egraph, eformula, beta_bound=1.0, enumeration_cap=enum_n
    )
    t0 = time.perf_counter()
    dist = ti.enumerate_exact(emodel, 0.4)
    enum_seconds = time.perf_counter() - t0

    print(json.dumps({
        "backend": ti.BACKEND,
        "steps": steps,
        "chain_seconds": chain_seconds,
        "steps_per_second": steps / chain_seconds,
        "enum_n": enum_n,
        "support_size": dist.size,
        "enum_seconds": enum_seconds,
    }))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=1_000_000,
                        help="chain updates to time (default 1e6)")
    parser.add_argument("--enum-n", type=int, default=18, dest="enum_n",
                        help="instance size for the enumeration timing")
    parser.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()
    if args.child:
        child(args.steps, args.enum_n)
        return 0

    rows = []
    for backend in ("numba", "numpy"):
        env = dict(os.environ, TRUNC_ISING_BACKEND=backend)
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--child",
             "--steps", str(args.steps), "--enum-n", str(args.enum_n)],
            env=env, capture_output=True, text=True,
        )
        if proc.returncode != 0:
            sys.stderr.write(proc.stderr)
            return 1
        rows.append(json.loads(proc.stdout))

    print(f"{'backend':<8} {'chain steps/s':>14} {'chain wall':>11} "
          f"{'enum |S|':>9} {'enum wall':>10}")
    for r in rows:
        print(f"{r['backend']:<8} {r['steps_per_second']:>14,.0f} "
              f"{r['chain_seconds']:>10.3f}s {r['support_size']:>9,} "
              f"{r['enum_seconds']:>9.3f}s")
    if len(rows) == 2 and rows[1]["chain_seconds"] > 0:
        ratio = rows[1]["chain_seconds"] / rows[0]["chain_seconds"]
        print(f"compiled chain speedup: {ratio:,.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
