"""Compare the numba and numpy kernel backends.

Times each hot kernel on realistic inputs (after a warm-up call so JIT
compilation is excluded), checks the two backends agree, then times a
full synthetic-grid run per backend in a fresh interpreter.

    python benchmarks/bench_kernels.py [--repeat 20] [--scenes 40]
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from vineprune import _kernels_numba as nb
from vineprune import _kernels_numpy as npk


def cases():
    rng = np.random.default_rng(0)
    # a 40-gon roughly the size of a cane instance at 640x480
    t = np.sort(rng.uniform(0, 2 * np.pi, 40))
    xs = 320 + 12 * np.cos(t) + rng.normal(0, 1, 40)
    ys = 240 + 90 * np.sin(t) + rng.normal(0, 1, 40)
    cane = np.zeros((480, 640), dtype=bool)
    cane[100:260, 300:312] = True
    crop = cane[70:290, 270:342].copy()
    return {
        "rasterize_polygon 640x480": lambda k: k.rasterize_polygon(xs, ys, 480, 640),
        "dilate_disc r=3 full frame": lambda k: k.dilate_disc(cane, 3),
        "dilate_disc r=3 cropped": lambda k: k.dilate_disc(crop, 3),
        "row_extents cane crop": lambda k: k.row_extents(crop),
    }


def check_agreement(fn):
    a, b = fn(npk), fn(nb)
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def grid_run(backend, scenes):
    code = (
        "import time\n"
        "from vineprune.config import PipelineConfig\n"
        "from vineprune.pipeline import run_pipeline\n"
        "from vineprune.synthetic import default_grid, generate_scene\n"
        "specs = default_grid(%d)\n"
        "b = generate_scene(specs[0]); run_pipeline(b.records, b.depth, b.intrinsics, PipelineConfig())\n"
        "t = time.perf_counter()\n"
        "for s in specs:\n"
        "    b = generate_scene(s); run_pipeline(b.records, b.depth, b.intrinsics, PipelineConfig())\n"
        "print(time.perf_counter() - t)\n" % scenes
    )
    env = dict(os.environ, VINEPRUNE_KERNELS=backend)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--scenes", type=int, default=40)
    args = ap.parse_args()

    print(f"{'kernel':32s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}  agree")
    for name, fn in cases().items():
        fn(nb)  # compile
        t_np = min(timeit.repeat(lambda: fn(npk), number=1, repeat=args.repeat)) * 1e3
        t_nb = min(timeit.repeat(lambda: fn(nb), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:32s} {t_np:10.3f} {t_nb:10.3f} {t_np / t_nb:8.1f}x  {check_agreement(fn)}")

    print()
    for backend in ("numpy", "numba"):
        secs = grid_run(backend, args.scenes)
        print(f"pipeline, {args.scenes} grid scenes, {backend:5s}: {secs:6.2f} s")


if __name__ == "__main__":
    main()
