"""Compare the numba and numpy kernel backends.

    python benchmarks/bench_kernels.py [--sizes 1000 10000 100000] [--repeat 5]

Each kernel runs on random inputs under both backends; outputs are checked to
agree before timings are reported.  The last rows time a whole jet evaluation
of a gallery function, switching the active backend in place.
"""

import argparse
import time

import numpy as np

from conjugate import _kernels as K
from conjugate import gallery
from conjugate.expr import eval_jet


def best_of(fn, repeat):
    fn()  # warm-up (includes JIT compilation for numba)
    ts = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return min(ts)


def inputs(rng, n):
    a = rng.uniform(-1, 1, (n, 20))
    b = rng.uniform(-1, 1, (n, 20))
    b[:, 0] = rng.uniform(0.5, 2.0, n)
    d = rng.uniform(-1, 1, (n, 4))
    grad = rng.normal(size=(n, 3))
    hess = rng.normal(size=(n, 3, 3))
    hess = 0.5 * (hess + hess.transpose(0, 2, 1))
    return a, b, d, grad, hess


def kernel_calls(impl, a, b, d, grad, hess):
    return {
        "mul": lambda: impl.mul(a, b),
        "div": lambda: impl.div(a, b),
        "compose": lambda: impl.compose(a, d),
        "solve_directions": lambda: impl.solve_directions(grad, hess, 1e-10, 1e-8),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 10000, 100000])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if K.numba_impl is None:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'n':>9}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}{'max diff':>12}")
    for n in args.sizes:
        data = inputs(rng, n)
        calls_np = kernel_calls(K.numpy_impl, *data)
        calls_nb = kernel_calls(K.numba_impl, *data)
        for name in calls_np:
            r_np, r_nb = calls_np[name](), calls_nb[name]()
            if isinstance(r_np, tuple):
                # class codes and the (sign-normalised) directions
                diff = max(float(np.max(np.abs(r_np[0] - r_nb[0]))),
                           float(np.max(np.abs(r_np[1] - r_nb[1]))))
            else:
                diff = float(np.max(np.abs(r_np - r_nb)))
            t_np = best_of(calls_np[name], args.repeat)
            t_nb = best_of(calls_nb[name], args.repeat)
            print(f"{name:<20}{n:>9}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}"
                  f"{t_np / t_nb:>10.1f}{diff:>12.2e}")

    hopf = gallery.get("hopf")
    saved = K.backend
    try:
        for n in args.sizes:
            pts = hopf.samples(n, rng)
            times = {}
            for impl in (K.numpy_impl, K.numba_impl):
                K.backend = impl
                times[impl.name] = best_of(lambda: eval_jet(hopf.f_expr, pts), args.repeat)
            print(f"{'eval_jet hopf':<20}{n:>9}{1e3 * times['numpy']:>12.3f}"
                  f"{1e3 * times['numba']:>12.3f}{times['numpy'] / times['numba']:>10.1f}{'':>12}")
    finally:
        K.backend = saved


if __name__ == "__main__":
    main()
