"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Times the path-count dynamic program on the largest input lattice (three
activators, three thresholds), the sink classification on random bit masks,
and a whole-network score run under each backend.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from switchscreen import _kernels_py as pure
from switchscreen.hysteresis import _lattice_for, endpoint_tests, Direction

try:
    from switchscreen import _kernels as compiled
except ImportError:
    compiled = None

SCORE_SNIPPET = (
    "import time; from switchscreen.net import network_from_id; "
    "from switchscreen.hysteresis import NetworkScorer; from switchscreen import kernels; "
    "t=time.perf_counter(); NetworkScorer(network_from_id(19597)).score(); "
    "print(kernels.BACKEND, time.perf_counter()-t)"
)


def bench(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if compiled is None:
        print("compiled extension not built; only the fallback is available")
    backends = [("python", pure)] + ([("cython", compiled)] if compiled else [])

    rng = np.random.default_rng(0)
    lat = _lattice_for((3, 0, 3), 64)
    classes = rng.integers(0, 4, size=lat.n_vertices, dtype=np.uint8)
    start, mid, end = endpoint_tests(classes, Direction.ASCENDING)
    s0 = rng.integers(0, 2**63, size=(707, 2), dtype=np.uint64)
    masks = rng.integers(0, 2**63, size=(512, 2), dtype=np.uint64)
    j0 = rng.integers(0, 2**63, size=2, dtype=np.uint64)

    rows = []
    for name, mod in backends:
        t_path = bench(lambda: mod.path_counts(lat.topo, lat.offsets, lat.targets,
                                               start, mid, end, lat.vmin, lat.vmax), args.repeat)
        t_cls = bench(lambda: mod.batch_classes(s0, masks, j0), args.repeat)
        rows.append((name, t_path, t_cls))
    print(f"{'backend':8} {'path_counts':>14} {'batch_classes':>14}")
    for name, a, b in rows:
        print(f"{name:8} {a * 1e3:12.3f}ms {b * 1e3:12.3f}ms")
    if len(rows) == 2:
        print(f"speedup  {rows[0][1] / rows[1][1]:13.1f}x {rows[0][2] / rows[1][2]:13.1f}x")

    # end to end: one network score per backend, each in a fresh interpreter
    for pure_flag in ("1", ""):
        env = dict(os.environ, SWITCHSCREEN_PURE=pure_flag)
        out = subprocess.run([sys.executable, "-c", SCORE_SNIPPET], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"network 19597 score, {out[0]} backend: {float(out[1]):.2f}s")


if __name__ == "__main__":
    main()
