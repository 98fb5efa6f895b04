"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--points N] [--repeat R]

Both backends are checked to agree before timing.
"""

import argparse
import time

import numpy as np

from asymflat import _kernels
from asymflat.idata import GraphSlice, GraphSliceSpec
from asymflat.sphere import quad_sphere
from asymflat.surfaces import SphereGraph, embedding


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if _kernels.backend() != "numba":
        print("numba is disabled (ASYMFLAT_NUMBA); nothing to compare")
        return

    rng = np.random.default_rng(1)
    fam = GraphSlice(GraphSliceSpec(1.0))
    v = rng.standard_normal((args.points, 3))
    x = v / np.linalg.norm(v, axis=1)[:, None] * rng.uniform(20, 2000, args.points)[:, None]
    s = fam.sample(x, order=2)

    quad = quad_sphere(24)
    reps = int(np.ceil(args.points / quad.size))
    _, xs, xa, xab = embedding(SphereGraph.round(200.0, 24), quad)
    ss = fam.sample(np.tile(xs, (reps, 1)), order=1)
    xa, xab = np.tile(xa, (reps, 1, 1)), np.tile(xab, (reps, 1, 1))
    outward = np.tile(quad.directions, (reps, 1))

    def surf():
        ginv, gam = _kernels.christoffel_batch(ss.g, ss.dg)
        return _kernels.surface_nodes(xa, xab, outward, ss.g, ginv, gam, ss.K)[0]

    cases = {
        "christoffel": lambda: _kernels.christoffel_batch(s.g, s.dg)[1],
        "ricci": lambda: _kernels.ricci_batch(s.g, s.dg, s.ddg)[0],
        "surface_nodes": surf,
    }
    print(f"{'kernel':<15}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}{'max diff':>12}")
    for name, fn in cases.items():
        _kernels.set_backend("numba")
        ref_nb = fn()  # includes compilation
        t_nb = best_of(fn, args.repeat)
        _kernels.set_backend("numpy")
        ref_np = fn()
        t_np = best_of(fn, args.repeat)
        _kernels.set_backend("numba")
        diff = float(np.nanmax(np.abs(ref_nb - ref_np)))
        print(f"{name:<15}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>10.1f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
