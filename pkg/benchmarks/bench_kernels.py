"""Compiled versus numpy set kernels on masks drawn from real cell instances.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--seed 0]

Both backends are checked for identical output before timing.  Also times a
full separation run under each backend.
"""
import argparse
import random
import statistics
import time

import numpy as np

from cellkit import _kernels_py as pure
from cellkit.cells import _centers_mask, difference_mask
from cellkit.instances import regular_cell, separation_instance
from cellkit.oracle import QuotientWindow

try:
    from cellkit import _kernels as compiled
except ImportError:
    compiled = None


def workloads(seed):
    """``(label, centers mask, difference mask)`` triples at growing moduli."""
    rng = random.Random(seed)
    out = []
    for p, N in ((3, 5), (5, 4), (2, 10), (3, 7), (5, 5)):
        inst = regular_cell(rng, p, "small")
        s = inst.cell.base[0]
        w = QuotientWindow(p, inst.window.lo, N, N)
        cm = _centers_mask(inst.cell.centers[s], w)
        D = difference_mask(inst.cell.condition, s, w)
        out.append((f"p={p} modulus={w.modulus}", cm, D))
    return out


def best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), statistics.median(times)


def separation_time(impl, seed, repeat):
    from cellkit import kernels
    from cellkit.decomposition import separate_subtrees

    names = ("sumset", "periods", "translate")
    saved = {n: getattr(kernels, n) for n in names}
    for n in names:
        setattr(kernels, n, getattr(impl, n))
    try:
        rng = random.Random(seed)
        insts = [separation_instance(rng, 5) for _ in range(6)]
        return best(lambda: [separate_subtrees(i.cell, i.window) for i in insts], repeat)
    finally:
        for n, fn in saved.items():
            setattr(kernels, n, fn)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    impls = [("python", pure)] + ([("compiled", compiled)] if compiled else [])
    if compiled is None:
        print("compiled kernels not built; timing the numpy fallback only")
    print(f"{'workload':<24}{'kernel':<10}" + "".join(f"{n:>14}" for n, _ in impls) + f"{'speedup':>10}")
    for label, cm, D in workloads(args.seed):
        for kname in ("sumset", "periods"):
            results = {}
            ref = None
            for name, impl in impls:
                fn = (lambda impl=impl: impl.sumset(cm, D)) if kname == "sumset" else (lambda impl=impl: impl.periods(D))
                out = fn()
                if ref is None:
                    ref = out
                elif not np.array_equal(ref, out):
                    raise SystemExit(f"backends disagree on {kname} for {label}")
                results[name] = best(fn, args.repeat)[0]
            speed = results["python"] / results["compiled"] if "compiled" in results else float("nan")
            cells = "".join(f"{results[n] * 1e3:>12.3f}ms" for n, _ in impls)
            print(f"{label:<24}{kname:<10}{cells}{speed:>9.1f}x")
    for name, impl in impls:
        lo, med = separation_time(impl, args.seed, args.repeat)
        print(f"separation x6 (p=5)     {name:<10}{lo * 1e3:>12.3f}ms  (median {med * 1e3:.3f}ms)")


if __name__ == "__main__":
    main()
