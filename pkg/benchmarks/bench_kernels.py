"""Time the compiled and pure-Python kernels on the same diet instances.

    python benchmarks/bench_kernels.py --size small --horizons 1 3 5 --repeat 5

Diet instances rarely admit a certificate, so the rounding sweep is also
timed on random y-heavy instances with roomy rows (`--scales`).
"""

import argparse
import statistics
import time

import numpy as np

from gpip import _kernels
from gpip.diet import build_model, compile
from gpip.harness import default_plan_config, generate_synthetic
from gpip.lp import relax, solve_lp
from gpip.model import BinarySolution, GpipInstance, normalize
from gpip.pessimistic import calibrate, derandomized_round
from gpip.rounding import scale


def roomy_instance(rng, scale_k):
    """y-heavy instance with coupling coefficients in [0.5, 1]; usually certifiable."""
    m, k = scale_k // 4, scale_k
    n, d1, d2 = 3, 2, 2
    A = rng.random((n, m)) * (rng.random((n, m)) < 0.3)
    B = rng.uniform(0.5, 1.0, (n, k)) * (rng.random((n, k)) < 0.5)
    U = rng.random((d1, m)) * (rng.random((d1, m)) < 0.5)
    V = rng.random((d2, k)) * (rng.random((d2, k)) < 0.3)
    u = rng.uniform(0.1, 0.3, d1) * U.sum(1) + 5.0
    v = rng.uniform(0.1, 0.3, d2) * V.sum(1) + 10.0
    return GpipInstance(A, B, U, V, u, v, rng.random(m) * 0.1, rng.random(k))


def _repair_input(inst, rng):
    return BinarySolution(rng.integers(0, 2, inst.m), rng.integers(0, 2, inst.k))


def _time(fn, repeat):
    runs = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        runs.append(time.perf_counter() - t0)
    return statistics.median(runs)


def _repair(kern, inst, sol):
    v = _kernels.sparse_views(inst)
    x, y = sol.x.astype(np.int8).copy(), sol.y.astype(np.int8).copy()
    kern.greedy_repair(
        x, y, v.A_csr, v.A_csc, v.B_csr, v.B_csc, v.U_csr, v.U_csc, v.V_csr, v.V_csc,
        np.ascontiguousarray(inst.u), np.ascontiguousarray(inst.v),
        np.ascontiguousarray(inst.c1), np.ascontiguousarray(inst.c2), _kernels.REPAIR_TOL,
    )


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", default="small", choices=["small", "medium", "large"])
    ap.add_argument("--horizons", type=int, nargs="+", default=[1, 3, 5])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scales", type=int, nargs="*", default=[100, 400, 1600])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if _kernels.ckernels is None:
        raise SystemExit("compiled kernels are not built; run `python setup.py build_ext --inplace`")
    backends = {"cython": _kernels.ckernels, "python": _kernels.pykernels}
    catalog = generate_synthetic(args.size, args.seed)
    rng = np.random.default_rng(args.seed)
    print(f"{'case':<22}{'kernel':<10}{'columns':>9}{'cython s':>12}{'python s':>12}{'speedup':>9}")
    cases = [(f"{args.size}/N={h}", compile(build_model(catalog, default_plan_config(h)))[0]) for h in args.horizons]
    cases += [(f"roomy/k={sk}", normalize(roomy_instance(rng, sk))[0]) for sk in args.scales]
    for case, inst in cases:
        lp = solve_lp(relax(inst))
        cal = calibrate(inst, lp)
        cols = inst.m + inst.k
        if cal:
            sc = scale(lp, cal.params)
            t = {
                name: _time(lambda k=k: derandomized_round(inst, sc, cal.params, backend=k), args.repeat)
                for name, k in backends.items()
            }
            print(f"{case:<22}{'sweep':<10}{cols:>9}{t['cython']:>12.5f}{t['python']:>12.5f}"
                  f"{t['python'] / t['cython']:>8.1f}x")
        else:
            print(f"{case:<22}{'sweep':<10}{cols:>9}  no certificate, skipped")
        sol = _repair_input(inst, rng)
        t = {name: _time(lambda k=k: _repair(k, inst, sol), args.repeat) for name, k in backends.items()}
        print(f"{case:<22}{'repair':<10}{cols:>9}{t['cython']:>12.5f}{t['python']:>12.5f}"
              f"{t['python'] / t['cython']:>8.1f}x")


if __name__ == "__main__":
    main()
