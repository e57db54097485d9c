"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--end-to-end]

Kernel timings call each backend directly; the end-to-end timing runs one SMC
sweep in a subprocess per backend, since the backend is chosen at import.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from pgibbs.kernels import implementations

E2E = """
import time
from pgibbs.kernels import BACKEND
from pgibbs.models import StochVolModel
from pgibbs.smc import run_smc
from pgibbs.ssm import make_bootstrap, simulate
m = StochVolModel(0.9, 0.3, 0.7)
_, y = simulate(m, 200, 0)
run_smc(m, make_bootstrap(m), y, 100, 0)
t = time.perf_counter()
run_smc(m, make_bootstrap(m), y, 2000, 1)
print(BACKEND, time.perf_counter() - t)
"""


def cases(rng):
    n = 200_000
    c = rng.integers(0, 2**63, size=(4, n), dtype=np.uint64)
    k = rng.integers(0, 2**63, size=(2, n), dtype=np.uint64)
    w = rng.random((64, 1000))
    w /= w.sum(axis=1, keepdims=True)
    u = rng.random((64, 1000))  # unsorted, as in multinomial resampling
    anc = rng.integers(0, 1000, size=(200, 64, 1000), dtype=np.int64)
    final = rng.integers(0, 1000, size=64, dtype=np.int64)
    return {
        f"philox4x64 ({n} blocks)": lambda mod: mod.philox4x64(*c, *k),
        "resample_search (64 x 1000)": lambda mod: mod.resample_search(w, u),
        "trace_ancestry (T=200, 64 x 1000)": lambda mod: mod.trace_ancestry(anc, final),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args()

    impls = implementations()
    print(f"backends: {', '.join(impls)}")
    for name, fn in cases(np.random.default_rng(0)).items():
        times = {b: min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)) for b, mod in impls.items()}
        line = "  ".join(f"{b} {t * 1e3:9.2f} ms" for b, t in times.items())
        speedup = f"  speedup x{times['python'] / times['cython']:.1f}" if "cython" in times else ""
        print(f"{name:<36} {line}{speedup}")

    if args.end_to_end:
        for pure in ("0", "1"):
            env = dict(os.environ, PGIBBS_PURE_PYTHON=pure)
            out = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True, text=True, check=True)
            backend, secs = out.stdout.split()
            print(f"SMC T=200 N=2000 (SV, bootstrap)       {backend:<7} {float(secs) * 1e3:9.2f} ms")


if __name__ == "__main__":
    main()
