"""Time the compiled and numpy kernel backends on a refinement-sized batch.

Usage: python3 benchmarks/bench_kernels.py [--cameras 20] [--points 500] [--repeat 20]
"""

import argparse
import timeit

import numpy as np

from camprecond import _kernels
from camprecond.config import PerturbSpec
from camprecond.harness import _flatten, make_scene, perturb
from camprecond.parameterizations import BatchRealizer


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cameras", type=int, default=20)
    ap.add_argument("--points", type=int, default=500)
    ap.add_argument("--kind", default="focal_pose_intrinsics")
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    scene = make_scene(args.cameras, args.points, seed=0)
    init = perturb(scene, PerturbSpec.preset("psynth_scaled", seed=0))
    realizer = BatchRealizer(args.kind, init)
    states, dstates = realizer.realize(np.zeros((len(init), realizer.kind.k)), jac=True)
    points, observed, offsets = _flatten(scene)
    print(f"{len(init)} cameras, {len(points)} observations, kind {realizer.kind.name}")

    timings = {}
    for name in _kernels.available_backends():
        _kernels.use_backend(name)
        calls = {
            "project": lambda: _kernels.project(states, points, offsets),
            "project_jacobian": lambda: _kernels.project_jacobian(states, dstates, points, offsets),
            "residual_gradient": lambda: _kernels.residual_gradient(states, dstates, points, offsets, observed),
        }
        for fn, call in calls.items():
            best = min(timeit.repeat(call, number=1, repeat=args.repeat))
            timings[(name, fn)] = best
    print(f"{'kernel':<20} {'backend':<9} {'best ms':>9}")
    for (name, fn), t in sorted(timings.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        print(f"{fn:<20} {name:<9} {1e3 * t:>9.3f}")
    if "compiled" in _kernels.available_backends():
        for fn in ("project", "project_jacobian", "residual_gradient"):
            print(f"speedup {fn}: {timings[('pure', fn)] / timings[('compiled', fn)]:.1f}x")


if __name__ == "__main__":
    main()
