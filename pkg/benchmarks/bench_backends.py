"""Time field construction and detection on each available rasterizer backend.

    python benchmarks/bench_backends.py [--reps N] [--res 64 128 256 512]

Prints one row per (backend, resolution, stage) with the median time.
"""

import argparse
import statistics
import time

import numpy as np

from zcollide.detector import (
    DetectionVolume,
    build_environment_field,
    build_object_field,
    detect,
)
from zcollide.kernels import BACKENDS
from zcollide.shapes import centered_box, icosphere


def scene():
    obj = icosphere(4, 1.0)
    rng = np.random.default_rng(3)
    env = [centered_box(rng.uniform(-1.2, 1.2, 3), rng.uniform(0.1, 0.4, 3), object_id=k + 2)
           for k in range(20)]
    return obj, env


def timed(fn, reps):
    samples = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--res", type=int, nargs="+", default=[64, 128, 256, 512])
    args = ap.parse_args(argv)

    obj, env = scene()
    print(f"object: {len(obj.triangles)} triangles, environment: {len(env)} boxes")
    print(f"{'backend':<8} {'res':>5} {'stage':<12} {'median_ms':>10}")
    for name in sorted(BACKENDS):
        for res in args.res:
            vol = DetectionVolume.from_center((0, 0, 0), (0, 0, 1), (0, 1, 0), 1.1, 1.1, 2.2, res, res)
            stages = {
                "object": lambda: build_object_field(obj, vol, backend=name),
                "environment": lambda: build_environment_field(env, vol, backend=name),
                "detect": lambda: detect(obj, env, vol, backend=name),
            }
            for stage, fn in stages.items():
                fn()  # warm up
                print(f"{name:<8} {res:>5} {stage:<12} {1e3 * timed(fn, args.reps):>10.3f}")


if __name__ == "__main__":
    main()
