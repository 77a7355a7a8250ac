"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints one row per kernel with the best-of-N wall time for each backend and
the speedup. Both backends are checked to agree before timing.
"""

import argparse
import math
import timeit

import numpy as np

from regret_forge import _kernels


def cases():
    rng = np.random.default_rng(0)
    L = rng.integers(0, 2, (20_000, 10)).astype(np.float64)
    rates = 1.0 / np.sqrt(np.arange(1, L.shape[0] + 2))
    tab = _kernels.prob_table(64, 2.0)
    codes = rng.integers(0, 4, (2000, 64)).astype(np.int8)
    y = np.repeat([0.0, 1.0], 50_000)
    A = rng.normal(size=(12, 12))
    A = A @ A.T
    tab16 = _kernels.prob_table(16, 1.0)
    empty = np.zeros(0, dtype=np.int8)
    return {
        "hedge_run T=2e4 d=10": lambda k: k.hedge_run(L, rates, _kernels.MODE_RATES, math.log(10)),
        "kahan_cumsum 2e4x10": lambda k: k.kahan_cumsum(L),
        "dh_binary_regret 2000x64": lambda k: k.dh_binary_regret(codes, tab),
        "eg_run T=1e5": lambda k: k.eg_run(y, 1.0),
        "jacobi_eigh d=12": lambda k: k.jacobi_eigh(A, None, 1e-12, 100),
        "search_min T=11": lambda k: k.search_min(11, empty, tab16, 100, 1e-12),
    }


def _first(out):
    return out[0] if isinstance(out, tuple) else out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    found = _kernels.backends()
    if "cython" not in found:
        print("compiled kernels are not built; only the fallback is available")
    names = [n for n in ("cython", "python") if n in found]
    print(f"{'kernel':28s}" + "".join(f"{n:>12s}" for n in names) + ("   speedup" if len(names) == 2 else ""))
    for label, fn in cases().items():
        outs = [_first(fn(found[n])) for n in names]
        if len(outs) == 2:
            np.testing.assert_allclose(np.asarray(outs[0]), np.asarray(outs[1]), rtol=1e-9, atol=1e-9)
        times = [min(timeit.repeat(lambda n=n: fn(found[n]), number=1, repeat=args.repeat)) for n in names]
        row = f"{label:28s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(times) == 2:
            row += f"  {times[1] / times[0]:8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
