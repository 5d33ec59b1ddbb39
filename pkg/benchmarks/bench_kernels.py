"""Compare the compiled and pure-Python kernels, then time end-to-end checks.

    python3 benchmarks/bench_kernels.py [--sizes 64 128 256] [--repeat 5]
"""
import argparse
import time
import timeit

import numpy as np

from picore import _kernels_py
from picore.arinc import build_arinc_model
from picore.event_ucs import certify
from picore.ifs import oracle_noninfluence
from picore.machine import build_machine

try:
    from picore import _kernels as _cy
except ImportError:
    _cy = None


def kernel_rows(sizes, repeat, seed=0):
    rng = np.random.default_rng(seed)
    backends = [("python", _kernels_py)] + ([("cython", _cy)] if _cy is not None else [])
    for n in sizes:
        a = (rng.random((n, n)) < 0.05).astype(np.uint8)
        b = (rng.random((n, n)) < 0.05).astype(np.uint8)
        # no mismatch anywhere, so the scan covers every row
        ob = np.zeros(n, dtype=np.int64)
        group = rng.integers(0, 8, n).astype(np.int64)
        for name, impl in backends:
            tc = min(timeit.repeat(lambda: impl.compose(a, b), number=1, repeat=repeat))
            tg = min(timeit.repeat(lambda: impl.grouped_mismatch(a, b, ob, group), number=1, repeat=repeat))
            yield n, name, tc, tg


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256, 512])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()

    print(f"{'n':>5} {'backend':>8} {'compose ms':>11} {'mismatch ms':>12}")
    for n, name, tc, tg in kernel_rows(args.sizes, args.repeat):
        print(f"{n:>5} {name:>8} {tc * 1e3:>11.3f} {tg * 1e3:>12.3f}")

    print()
    m = build_arinc_model()
    t0 = time.perf_counter()
    mach = build_machine(m)
    t1 = time.perf_counter()
    rep = certify(m, sce_mode="action", mach=mach)
    t2 = time.perf_counter()
    ok = oracle_noninfluence(mach, 3)
    t3 = time.perf_counter()
    print(f"arinc machine: {len(mach)} configurations in {t1 - t0:.3f}s")
    print(f"arinc certify (action SCE): {rep.certified} in {t2 - t1:.3f}s")
    print(f"arinc noninfluence k=3: {bool(ok)} in {t3 - t2:.3f}s")


if __name__ == "__main__":
    main()
