"""Compiled kernels against the plain-Python fallback.

Runs the same workload twice in child processes, once as compiled and once
with FILTANN_DISABLE_JIT=1. It prints wall times per stage and the speedup.
The fallback is slow, so the default workload is small:

    python benchmarks/bench_kernels.py [--n 1500] [--dim 32] [--queries 20]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def workload(n: int, dim: int, queries: int) -> dict:
    from filtann import BuildParams, RandomSample, SearchParams, build, evaluate, gen_synthetic, knn_search
    from filtann._jit import JIT_ENABLED
    from filtann.oracle import all_distances

    ds = gen_synthetic(n, dim, 8, 0.5, seed=0)
    mask = evaluate(RandomSample(0.2, 1), ds)
    qs = ds.data[:queries] + 0.01

    if JIT_ENABLED:
        # Compile (or load cached) kernels on a throwaway index so that the
        # timings below measure steady-state execution only.
        warm = gen_synthetic(64, dim, 2, 0.5, seed=1)
        wg = build(warm, BuildParams(m_upper=4, ef_construction=16, seed=0))
        wm = evaluate(RandomSample(0.5, 1), warm)
        for h in ("onehop-a", "onehop-s", "blind", "directed", "adaptive-g", "adaptive-l"):
            knn_search(wg, warm, warm.data[0], SearchParams(5, 10, h), wm)

    times = {}
    t0 = time.perf_counter()
    for q in qs:
        all_distances(ds, q)
    times["scan"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    g = build(ds, BuildParams(m_upper=8, ef_construction=40, seed=0))
    times["build"] = time.perf_counter() - t0

    for h in ("onehop-s", "directed", "adaptive-l"):
        t0 = time.perf_counter()
        for q in qs:
            knn_search(g, ds, q, SearchParams(10, 50, h), mask)
        times[f"search {h}"] = time.perf_counter() - t0
    return {"jit": JIT_ENABLED, "times": times}


def run_child(args, disable_jit: bool) -> dict:
    env = dict(os.environ)
    env.pop("FILTANN_DISABLE_JIT", None)
    if disable_jit:
        env["FILTANN_DISABLE_JIT"] = "1"
    cmd = [sys.executable, __file__, "--child", "--n", str(args.n), "--dim", str(args.dim),
           "--queries", str(args.queries)]
    out = subprocess.run(cmd, env=env, check=True, capture_output=True, text=True).stdout
    return json.loads(out.strip().splitlines()[-1])


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=1500)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--queries", type=int, default=20)
    p.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = p.parse_args(argv)
    if args.child:
        print(json.dumps(workload(args.n, args.dim, args.queries)))
        return 0

    jit = run_child(args, disable_jit=False)
    py = run_child(args, disable_jit=True)
    if not jit["jit"] or py["jit"]:
        print("warning: the compiled run did not use numba", file=sys.stderr)
    print(f"n={args.n} dim={args.dim} queries={args.queries}")
    print(f"{'stage':<22}{'jit s':>10}{'python s':>12}{'speedup':>10}")
    for stage, tj in jit["times"].items():
        tp = py["times"][stage]
        print(f"{stage:<22}{tj:>10.4f}{tp:>12.4f}{tp / max(tj, 1e-9):>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
