"""Time the numba kernels against their numpy twins, and sparse against dense GD steps.

    python3 benchmarks/bench_backends.py [--m 65536] [--n 32] [--d 5] [--B 0 2.5] [--json out.json]
"""

import argparse
import json
import sys

import numpy as np

from sntk import experiments as E
from sntk import kernels
from sntk import ntk
from sntk._backend import HAS_NUMBA


def _time(fn, repeats):
    fn()  # warm-up, includes numba compilation on first use
    return E.time_call(fn, repeats)


def bench_kernels(m, n, d, B, repeats, backends):
    data = E.toy_dataset(0, d=d, n=n)
    model = E.init_model(m, d, B, "standard", seed=0)
    W0, b0, a = np.array(model.W), np.array(model.b), np.asarray(model.a)
    Xt = data.Xt
    active = np.flatnonzero(kernels.active_counts(W0, b0, Xt, backend="numpy") >= 1)
    H = np.asarray(ntk.empirical_ntk(model, data.X))
    rows = []
    for be in backends:
        def step():
            W, b = W0.copy(), b0.copy()
            kernels.sparse_step(W, b, a, Xt, data.y, active, 1e-3, model.scale, backend=be)

        rows.append({"kernel": "sparse_step", "backend": be, "B": B,
                     "ns": _time(step, repeats), "active": int(active.size)})
        rows.append({"kernel": "active_counts", "backend": be, "B": B,
                     "ns": _time(lambda: kernels.active_counts(W0, b0, Xt, backend=be), repeats)})
        rows.append({"kernel": f"jacobi_eigh(n={n})", "backend": be, "B": B,
                     "ns": _time(lambda: kernels.jacobi_eigh(H, backend=be), repeats)})
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--m", type=int, default=65536)
    p.add_argument("--n", type=int, default=32)
    p.add_argument("--d", type=int, default=5)
    p.add_argument("--B", type=float, nargs="+", default=[0.0, 2.5])
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--json", help="also write results to this file")
    args = p.parse_args(argv)
    backends = ["numba", "numpy"] if HAS_NUMBA else ["numpy"]

    kernel_rows, step_rows = [], []
    for B in args.B:
        kernel_rows += bench_kernels(args.m, args.n, args.d, B, args.repeats, backends)
        data = E.toy_dataset(0, d=args.d, n=args.n)
        model = E.init_model(args.m, args.d, B, "standard", seed=0)
        for be in backends:
            E.bench_steps(model, data, 1e-3, repeats=1, backend=be)
            res = E.bench_steps(model, data, 1e-3, repeats=args.repeats, backend=be)
            res.update(backend=be, B=B)
            step_rows.append(res)

    print(f"m={args.m} n={args.n} d={args.d}")
    print(f"{'kernel':<22}{'B':>6}{'backend':>9}{'time':>12}")
    for r in kernel_rows:
        print(f"{r['kernel']:<22}{r['B']:>6.2f}{r['backend']:>9}{r['ns'] / 1e6:>10.3f}ms")
    print()
    print(f"{'GD step':<10}{'B':>6}{'backend':>9}{'active':>9}{'dense':>11}{'sparse':>11}{'speedup':>9}")
    for r in step_rows:
        if not r["equal"]:
            print(f"{'':<10}{r['B']:>6.2f}{r['backend']:>9}  equality precheck failed")
            continue
        print(f"{'':<10}{r['B']:>6.2f}{r['backend']:>9}{r['active_fraction']:>9.3f}"
              f"{r['dense_ns'] / 1e6:>9.2f}ms{r['sparse_ns'] / 1e6:>9.2f}ms{r['speedup']:>8.2f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"kernels": kernel_rows, "steps": step_rows}, fh, indent=2)
    return 0 if all(r["equal"] for r in step_rows) else 1


if __name__ == "__main__":
    sys.exit(main())
