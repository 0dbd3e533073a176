"""Compiled vs numpy kernels, plus a small scaling run.

Usage: python3 benchmarks/bench_kernels.py [--n 20000] [--sizes 10000,30000,100000]
"""
import argparse
import json

from hyperembed import kernels
from hyperembed.bench import bench_backends, bench_scaling


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--n", type=int, default=20000, help="graph size for the backend comparison")
    p.add_argument("--landmarks", type=int, default=100)
    p.add_argument("--sizes", default="10000,30000,100000")
    args = p.parse_args()
    print(f"active backend: {kernels.BACKEND}, threads: {kernels.num_threads()}")
    rep = bench_backends(args.n, args.landmarks)
    if not rep["compiled"]:
        print("compiled core not built; nothing to compare")
    else:
        print(f"{'kernel':<15}{'compiled s':>12}{'python s':>12}{'speedup':>9}{'max diff':>11}")
        for name, k in rep["kernels"].items():
            print(f"{name:<15}{k['compiled_s']:>12.4f}{k['python_s']:>12.4f}{k['speedup']:>9.2f}"
                  f"{k['max_abs_diff']:>11.1e}")
    sizes = [int(s) for s in args.sizes.split(",")]
    scale = bench_scaling(sizes, args.landmarks, 2, ("lhydra", "lhydra-plus"))
    for r in scale["rows"]:
        print(f"n={r['n']:>8} distance {r['distance_s']:.3f}s  embedding {r['embedding_s']:.3f}s  "
              f"L-hydra+ {r['lhydra_plus_s']:.3f}s")
    print(json.dumps(scale["slopes"]))


if __name__ == "__main__":
    main()
