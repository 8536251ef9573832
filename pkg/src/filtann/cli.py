"""Command-line front end: ``python -m filtann <command> ...``.

Exit status is 0 on success, 2 for usage errors and 1 for runtime failures.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .bench import index_fingerprint, run_sweep, write_csv
from .build import BuildParams, build
from .core import DistanceKind
from .errors import FiltannError, UsageError
from .oracle import brute_force_knn, write_ground_truth
from .prefilter import All, evaluate, parse_predicate, read_mask, write_mask
from .search import FIXED, Heuristic, SearchParams
from .storage import load, load_graph, persist, save_graph
from .workload import Correlation, WorkloadSpec, gen_queries, gen_synthetic, load_dataset, save_dataset

ALL_HEURISTICS = [h.value for h in Heuristic]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _fraction_list(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of fractions: {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty selectivity list")
    return vals


def _budget(text: str) -> int | None:
    if text.lower() in ("all", "inf", "none"):
        return None
    units = {"k": 1 << 10, "m": 1 << 20, "g": 1 << 30}
    mult = units.get(text[-1:].lower(), 1)
    try:
        return int(float(text[:-1] if mult > 1 else text) * mult)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad page budget {text!r}") from None


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="filtann", description="Filtered approximate kNN over a two-level proximity graph.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a synthetic Gaussian-mixture dataset (fvecs + labels)")
    g.add_argument("--n", type=int, default=20000)
    g.add_argument("--dim", type=int, default=64)
    g.add_argument("--clusters", type=int, default=16)
    g.add_argument("--spread", type=float, default=0.5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    b = sub.add_parser("build", help="build an index; persist it with --index-dir or snapshot it with --out")
    b.add_argument("--dataset", required=True)
    b.add_argument("--index-dir")
    b.add_argument("--out", help="graph snapshot (.npz) for a later `persist`")
    b.add_argument("--m", type=int, default=16, help="upper-layer degree cap (lower is twice this)")
    b.add_argument("--ef-construction", type=int, default=100)
    b.add_argument("--sample-rate", type=float, default=0.05)
    b.add_argument("--kind", default="l2", choices=["l2", "cosine"])
    b.add_argument("--threads", type=int, default=1)
    b.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("persist", help="write a graph snapshot and its dataset as an index directory")
    s.add_argument("--dataset", required=True)
    s.add_argument("--graph", required=True)
    s.add_argument("--index-dir", required=True)

    t = sub.add_parser("gt", help="exact ground truth for generated queries")
    _query_source(t)
    _selection(t)
    t.add_argument("--k", type=int, default=10)
    t.add_argument("--out", required=True)

    m = sub.add_parser("mask", help="evaluate a predicate into a mask file")
    m.add_argument("--dataset")
    m.add_argument("--index-dir")
    m.add_argument("--pred", required=True)
    m.add_argument("--out", required=True)

    q = sub.add_parser("query", help="run one search and print ids, distances and counters")
    q.add_argument("--index-dir", required=True)
    _selection(q)
    q.add_argument("--heuristic", default="adaptive-l", choices=ALL_HEURISTICS)
    q.add_argument("--k", type=int, default=10)
    q.add_argument("--efs", type=int, default=100)
    q.add_argument("--row", type=int, help="use stored row ROW as the query")
    q.add_argument("--vector", help="comma-separated query coordinates")
    q.add_argument("--correlation", default="un", choices=[c.value for c in Correlation])
    q.add_argument("--seed", type=int, default=0, help="seed of the generated query when no vector is given")
    q.add_argument("--page-budget", type=_budget, default=None)

    r = sub.add_parser("bench", help="selectivity sweep; CSV on stdout or --out")
    r.add_argument("--index-dir", required=True)
    r.add_argument("--dataset", help="name written to the dataset column (default: index directory name)")
    r.add_argument("--heuristic", default="all",
                   help="comma-separated heuristics or 'all' (" + ",".join(ALL_HEURISTICS) + ")")
    r.add_argument("--k", type=int, default=10)
    r.add_argument("--efs", type=int, help="fixed efs; default tunes each row to --target-recall")
    r.add_argument("--target-recall", type=float, default=0.95)
    r.add_argument("--tol", type=float, default=0.01)
    r.add_argument("--selectivities", type=_fraction_list, default=[0.01, 0.05, 0.1, 0.3, 0.5, 0.9, 1.0])
    r.add_argument("--correlation", default="un", choices=[c.value for c in Correlation])
    r.add_argument("--queries", type=int, default=50)
    r.add_argument("--repeats", type=int, default=5)
    r.add_argument("--page-budget", type=_budget, default=None)
    r.add_argument("--cold", action="store_true", help="flush the page cache before every timed run")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out")
    return p


def _query_source(p):
    p.add_argument("--dataset")
    p.add_argument("--index-dir")
    p.add_argument("--queries", type=int, default=50)
    p.add_argument("--correlation", default="un", choices=[c.value for c in Correlation])
    p.add_argument("--seed", type=int, default=0)


def _selection(p):
    p.add_argument("--pred", help='predicate, e.g. "id<0.25", "label=7", "rand:0.1:seed"')
    p.add_argument("--mask", help="mask file (overrides --pred)")


def _dataset_from(args):
    if getattr(args, "dataset", None):
        return load_dataset(args.dataset)
    if getattr(args, "index_dir", None):
        return load(args.index_dir).to_dataset()
    raise UsageError("give --dataset or --index-dir")


def _mask_for(args, target):
    if getattr(args, "mask", None):
        mask = read_mask(args.mask)
        if mask.n != target.n:
            raise UsageError(f"mask covers {mask.n} nodes, index has {target.n}")
        return mask
    pred = parse_predicate(args.pred, target.n) if getattr(args, "pred", None) else All()
    return evaluate(pred, target)


def _heuristics(text: str) -> list[Heuristic]:
    if text.strip().lower() == "all":
        return list(Heuristic)
    return [Heuristic.parse(h) for h in text.split(",") if h.strip()]


def cmd_gen(args) -> int:
    ds = gen_synthetic(args.n, args.dim, args.clusters, args.spread, args.seed)
    save_dataset(ds, args.out)
    print(f"wrote {ds.n} x {ds.dim} vectors in {args.clusters} clusters to {args.out}")
    return 0


def cmd_build(args) -> int:
    if not args.index_dir and not args.out:
        raise UsageError("build needs --index-dir and/or --out")
    ds = load_dataset(args.dataset)
    params = BuildParams(m_upper=args.m, ef_construction=args.ef_construction, sample_rate=args.sample_rate,
                         threads=args.threads, seed=args.seed, kind=DistanceKind.parse(args.kind))
    t0 = time.perf_counter()
    graph = build(ds, params)
    print(f"built {ds.n} nodes in {time.perf_counter() - t0:.1f}s", file=sys.stderr)
    if args.out:
        save_graph(graph, args.out)
    if args.index_dir:
        manifest = persist(graph, ds, args.index_dir)
        print(f"index {manifest.digest()} written to {args.index_dir}")
    return 0


def cmd_persist(args) -> int:
    ds = load_dataset(args.dataset)
    graph = load_graph(args.graph)
    manifest = persist(graph, ds, args.index_dir)
    print(f"index {manifest.digest()} written to {args.index_dir}")
    return 0


def cmd_gt(args) -> int:
    ds = _dataset_from(args)
    mask = _mask_for(args, ds)
    kind = load(args.index_dir).kind if args.index_dir else DistanceKind.L2_SQUARED
    queries = gen_queries(ds, args.queries, args.correlation, seed=args.seed)
    truths = [brute_force_knn(ds, mask, q, args.k, kind) for q in queries]
    write_ground_truth(truths, args.k, args.out)
    print(f"wrote ground truth for {len(truths)} queries (k={args.k}) to {args.out}")
    return 0


def cmd_mask(args) -> int:
    target = load(args.index_dir) if args.index_dir else _dataset_from(args)
    mask = evaluate(parse_predicate(args.pred, target.n), target)
    write_mask(mask, args.out)
    print(f"selected {mask.selected_count} of {mask.n} nodes; wrote {args.out}")
    return 0


def cmd_query(args) -> int:
    index = load(args.index_dir, page_budget=args.page_budget)
    mask = _mask_for(args, index)
    if args.vector:
        q = np.array([float(x) for x in args.vector.split(",")], dtype=np.float32)
    elif args.row is not None:
        q = index.vector(args.row)
    else:
        q = gen_queries(index.to_dataset(), 1, args.correlation, seed=args.seed)[0]
    if args.k > args.efs:
        args.efs = args.k
    res = index.search(q, SearchParams(k=args.k, efs=args.efs, heuristic=args.heuristic), mask)
    if len(res) < args.k:
        print(f"warning: only {len(res)} of k={args.k} results (selected nodes: {mask.selected_count})",
              file=sys.stderr)
    print("rank,id,distance")
    for i, (v, d) in enumerate(zip(res.ids.tolist(), res.distances.tolist())):
        print(f"{i},{v},{d:.6g}")
    c = res.counters
    hist = " ".join(f"{h.value}={c.hist[h]}" for h in FIXED)
    print(f"# t_dc={c.t_dc} s_dc={c.s_dc} popped={c.popped} entry_dc={c.entry_dc} "
          f"pins={c.pins} misses={c.misses} {hist}")
    return 0


def cmd_bench(args) -> int:
    index = load(args.index_dir, page_budget=args.page_budget)
    ds = index.to_dataset()
    spec = WorkloadSpec(selectivities=args.selectivities, correlation=args.correlation,
                        query_count=args.queries, k=args.k, target_recall=args.target_recall, seed=args.seed)
    if args.efs is not None and args.efs < args.k:
        raise UsageError("--efs must be >= --k")
    name = args.dataset or Path(args.index_dir).name
    rows = run_sweep(spec, index, _heuristics(args.heuristic), ds, name=name, efs=args.efs, tol=args.tol,
                     repeats=args.repeats, cold=args.cold)
    provenance = (f"index={index_fingerprint(index)} budget={args.page_budget or 'all'} "
                  f"mode={'cold' if args.cold else 'warm'} seed={args.seed}")
    if args.out:
        with open(args.out, "w", newline="") as f:
            write_csv(rows, f, provenance)
    else:
        write_csv(rows, sys.stdout, provenance)
    return 0


COMMANDS = {"gen": cmd_gen, "build": cmd_build, "persist": cmd_persist, "gt": cmd_gt, "mask": cmd_mask,
            "query": cmd_query, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:  # --help and friends
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"filtann: error: {exc}", file=sys.stderr)
        return 2
    except (FiltannError, OSError) as exc:
        print(f"filtann: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
