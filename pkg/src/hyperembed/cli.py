"""Command-line interface: ``hyperembed {embed,eval,synth,sweep,bench}``.

Exit codes: 0 success, 2 usage or validation error, 3 algorithmic failure,
4 I/O error. Failures print a one-line JSON object on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .embed import EmbeddingError, EmbeddingResult, NonNegativeTrailingEigenvalue
from .evaluation import (ErrorReport, evaluate, run_method, sweep_dimensions, write_long_csv,
                         write_plot_data)
from .geometry import read_points_csv, write_points_csv
from .graph import counters, write_blocks
from .pipeline import (SIDECAR_SCHEMA, RunConfig, parse_int_list, prepare_input, write_artifacts)

log = logging.getLogger("hyperembed")

EXIT_OK, EXIT_USAGE, EXIT_ALGORITHM, EXIT_IO = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _say(args, text: str) -> None:
    if not args.quiet:
        print(text)


def _add_run_args(p, method=True):
    p.add_argument("--input", required=True, help="edge list (plain or gzip) or LHYD distance-block file")
    if method:
        p.add_argument("--method", choices=["lhydra", "lhydra-plus"], default="lhydra")
        p.add_argument("--dim", type=int, default=2)
    p.add_argument("--landmarks", type=int, default=100)
    p.add_argument("--kappa-grid", default=None, help="min:max:count (log-spaced) or comma list")
    p.add_argument("--seed-landmarks", type=int, default=0)
    p.add_argument("--seed-validation", type=int, default=1)
    p.add_argument("--validation-pairs", type=int, default=100_000)
    p.add_argument("--output", default="out", help="output directory")
    p.add_argument("--cache", action="store_true", help="reuse distance blocks cached under OUTPUT/.cache")
    p.add_argument("--force-landmarks", action="store_true", help="allow fewer than d+2 landmarks")
    p.add_argument("--gtol", type=float, default=1e-6)
    p.add_argument("--maxiter", type=int, default=500)


def _config(args, dim=None, method=None) -> RunConfig:
    return RunConfig(
        input=args.input, method=method or getattr(args, "method", "lhydra"),
        dim=dim if dim is not None else args.dim, landmarks=args.landmarks,
        kappa_grid=args.kappa_grid, seed_landmarks=args.seed_landmarks,
        seed_validation=args.seed_validation, validation_count=args.validation_pairs,
        output=args.output, cache=args.cache, force_landmarks=args.force_landmarks,
        gtol=args.gtol, maxiter=args.maxiter).validate()


def _check_dim(cfg: RunConfig, prep) -> None:
    D = prep.blocks
    if cfg.dim > D.l + D.m - 1:
        raise CliError(f"dimension {cfg.dim} exceeds l+m-1 = {D.l + D.m - 1}")
    if cfg.dim > D.l - 1:
        raise CliError(f"dimension {cfg.dim} needs at least {cfg.dim + 1} landmarks, have {D.l}")


def cmd_embed(args) -> int:
    counters.clear()
    cfg = _config(args)
    prep = prepare_input(cfg)
    _check_dim(cfg, prep)
    t0 = time.perf_counter()
    result = run_method(prep.blocks, cfg.dim, cfg.method, cfg.grid(), cfg.gtol, cfg.maxiter)
    result.wall_times["embedding"] = time.perf_counter() - t0
    result.wall_times["distances"] = prep.wall_times["distances"]
    report = evaluate(result, prep.blocks, prep.validation)
    paths = write_artifacts(cfg, prep, result, report)
    log.info("distance calculation %.3f s, embedding calculation %.3f s",
             prep.wall_times["distances"], result.wall_times["embedding"])
    if args.quiet:
        print(paths["report"])
    else:
        print(f"kappa={result.kappa:.6g} dim={result.dim} l={result.l} m={result.m}")
        for name in ("landmark", "landmark_nonlandmark", "validation"):
            ce = getattr(report, name)
            if ce is not None:
                print(f"REE[{name}]={ce.ree:.6g} ({ce.pairs} pairs)")
        print(f"report: {paths['report']}")
    return EXIT_OK


def cmd_eval(args) -> int:
    side_path = os.path.join(args.embedding, "embedding.json")
    with open(side_path) as fh:
        side = json.load(fh)
    if side.get("schema") != SIDECAR_SCHEMA:
        raise CliError(f"{side_path}: unsupported sidecar schema {side.get('schema')!r}")
    conf = dict(side["config"])
    if args.input:
        conf["input"] = args.input
    if args.validation_pairs is not None:
        conf["validation_count"] = args.validation_pairs
    if args.seed_validation is not None:
        conf["seed_validation"] = args.seed_validation
    cfg = RunConfig(**conf).validate()
    prep = prepare_input(cfg)
    with open(os.path.join(args.embedding, "coordinates.csv"), newline="") as fh:
        ids, X = read_points_csv(fh)
    order = prep.blocks.node_order
    expected = [str(v) for v in prep.node_ids[order]]
    if ids != expected:
        raise CliError("coordinates do not match the input's node order (different input or landmarks?)")
    res = EmbeddingResult(X=X, kappa=float(side["kappa"]), dim=int(side["dim"]), l=prep.blocks.l,
                          m=prep.blocks.m, eigenvalues_used=np.asarray(side["eigenvalues_used"]),
                          strain_residual=float(side["strain_residual"]), projected=True,
                          method=side["method"])
    report = evaluate(res, prep.blocks, prep.validation)
    out = args.output or os.path.join(args.embedding, "report.json")
    with open(out, "w") as fh:
        fh.write(report.to_json() + "\n")
    _say(args, f"REE landmark={report.ree_landmark} landmark_nonlandmark="
               f"{report.ree_landmark_nonlandmark} validation={report.ree_validation}")
    print(out)
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synth import synthetic_blocks

    l = args.landmarks if args.landmarks is not None else args.dim + 2
    if l < args.dim + 2 and not args.force_landmarks:
        raise CliError(f"need at least d+2 = {args.dim + 2} landmarks (or --force-landmarks)")
    P, D = synthetic_blocks(args.n, args.dim, l, args.radius, args.noise, args.seed_synth, args.kappa)
    os.makedirs(args.output, exist_ok=True)
    blocks = os.path.join(args.output, "blocks.lhyd")
    with open(blocks, "wb") as fh:
        write_blocks(D, fh)
    with open(os.path.join(args.output, "points.csv"), "w", newline="") as fh:
        write_points_csv(fh, P.X)
    meta = {"schema": "hyperembed.synth/1", "n": args.n, "dim": args.dim, "landmarks": l,
            "radius": args.radius, "noise": args.noise, "kappa": args.kappa, "seed": args.seed_synth}
    with open(os.path.join(args.output, "synth.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(blocks)
    return EXIT_OK


def cmd_sweep(args) -> int:
    counters.clear()
    dims = parse_int_list(args.dims)
    if not dims or min(dims) < 1:
        raise CliError("--dims must list dimensions >= 1")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    cfg = _config(args, dim=max(dims), method=methods[0] if methods else "lhydra")
    for m in methods:
        RunConfig(cfg.input, method=m).validate()
    prep = prepare_input(cfg)
    rows, reports = sweep_dimensions(prep.blocks, dims, methods, cfg.grid(), prep.validation,
                                     cfg.gtol, cfg.maxiter)
    os.makedirs(cfg.output, exist_ok=True)
    csv_path = os.path.join(cfg.output, "sweep.csv")
    with open(csv_path, "w", newline="") as fh:
        write_long_csv(rows, fh)
    summary = {"schema": "hyperembed.sweep/1", "config": cfg.to_dict(), "dims": dims, "methods": methods,
               "input_sha256": prep.input_sha256, "bfs_runs": int(counters["bfs"]),
               "distance_s": round(prep.wall_times["distances"], 3),
               "reports": [r.to_dict() for r in reports]}
    json_path = os.path.join(cfg.output, "sweep.json")
    with open(json_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if args.plot_data:
        with open(args.plot_data, "w") as fh:
            write_plot_data(rows, fh)
    failed = sum(1 for r in rows if r["status"] != "ok")
    _say(args, f"{len(reports)} embeddings, {failed} failed; BFS runs: {counters['bfs']}")
    print(csv_path if args.quiet else f"table: {csv_path}")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import bench_backends, bench_scaling

    sizes = parse_int_list(args.sizes)
    if len(sizes) < 3 or sizes != sorted(sizes):
        raise CliError("--sizes needs at least three ascending values")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    from .pipeline import parse_kappa_grid

    report = bench_scaling(sizes, args.landmarks, args.dim, methods, parse_kappa_grid(args.kappa_grid),
                           args.input, args.avg_degree, args.seed_synth, args.plus_max_n)
    if args.compare_backends:
        report["backends"] = bench_backends(min(sizes[0], 20000), args.landmarks, args.dim, args.seed_synth)
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    if args.quiet:
        print(args.output or text)
    else:
        for r in report["rows"]:
            print(f"n={r['n']:>9} distance={r['distance_s']:.3f}s embedding={r['embedding_s']:.3f}s"
                  + (f" lhydra+={r['lhydra_plus_s']:.3f}s" if "lhydra_plus_s" in r else ""))
        for k, v in report["slopes"].items():
            print(f"slope[{k}]={v:.3f}")
        if args.output:
            print(f"report: {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hyperembed", description="Landmark-based hyperbolic embedding.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--quiet", action="store_true", help="print only the final report path")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("embed", help="embed a graph or distance-block file")
    _add_run_args(e)
    e.set_defaults(func=cmd_embed)

    v = sub.add_parser("eval", help="re-evaluate an embedding directory")
    v.add_argument("--embedding", required=True, help="directory written by 'embed'")
    v.add_argument("--input", default=None, help="override the input recorded in the sidecar")
    v.add_argument("--validation-pairs", type=int, default=None)
    v.add_argument("--seed-validation", type=int, default=None)
    v.add_argument("--output", default=None, help="report path (default EMBEDDING/report.json)")
    v.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", help="write synthetic hyperbolic distance blocks")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--landmarks", type=int, default=None, help="default d+2")
    s.add_argument("--radius", type=float, default=2.0)
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--kappa", type=float, default=1.0)
    s.add_argument("--seed-synth", type=int, default=0)
    s.add_argument("--force-landmarks", action="store_true")
    s.add_argument("--output", default="synth")
    s.set_defaults(func=cmd_synth)

    w = sub.add_parser("sweep", help="embed and evaluate over several dimensions")
    _add_run_args(w, method=False)
    w.add_argument("--dims", default="2:10", help="lo:hi or comma list")
    w.add_argument("--methods", default="lhydra,lhydra-plus")
    w.add_argument("--plot-data", default=None, help="also write gnuplot columns to this path")
    w.set_defaults(func=cmd_sweep)

    b = sub.add_parser("bench", help="scaling benchmark with log-log slope fits")
    b.add_argument("--sizes", default="10000,30000,100000")
    b.add_argument("--input", default=None, help="subsample BFS balls of this edge list instead of synthesizing")
    b.add_argument("--landmarks", type=int, default=100)
    b.add_argument("--dim", type=int, default=2)
    b.add_argument("--kappa-grid", default=None)
    b.add_argument("--methods", default="lhydra")
    b.add_argument("--avg-degree", type=float, default=6.0)
    b.add_argument("--seed-synth", type=int, default=0)
    b.add_argument("--plus-max-n", type=int, default=None, help="skip L-hydra+ above this size")
    b.add_argument("--compare-backends", action="store_true")
    b.add_argument("--output", default=None, help="write the JSON report here")
    b.set_defaults(func=cmd_bench)
    return p


def _fail(code: int, exc: BaseException, **extra) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code, **extra}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    # allow --quiet after the subcommand as well
    argv = list(sys.argv[1:] if argv is None else argv)
    quiet = "--quiet" in argv
    argv = [a for a in argv if a != "--quiet"]
    args = parser.parse_args(argv)
    args.quiet = quiet
    logging.basicConfig(level=logging.WARNING if quiet else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        return _fail(exc.code, exc)
    except NonNegativeTrailingEigenvalue as exc:
        return _fail(EXIT_ALGORITHM, exc, max_dim=exc.max_dim)
    except EmbeddingError as exc:
        extra = {"max_dim": exc.max_dim} if getattr(exc, "max_dim", None) is not None else {}
        return _fail(EXIT_ALGORITHM, exc, **extra)
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    except ValueError as exc:
        return _fail(EXIT_USAGE, exc)


if __name__ == "__main__":
    sys.exit(main())
