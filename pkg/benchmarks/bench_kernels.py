"""Compare the compiled and numpy kernels on protocol-sized problems.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from edgepriv import graph, kernels, perturb
from edgepriv.ct_engine import CtConfig, integrate


def _cases(rng):
    for n in (5, 10, 20):
        g = graph.random_balanced(n, rng)
        L = graph.laplacian(g)
        yield f"rk4 scramble n={n} (1000 steps)", "rk4_affine", (-L, rng.normal(size=(2001, n)), rng.normal(size=n), 1e-3, 1000)
        yield f"rk4 augmented 2n={2 * n} (1000 steps)", "rk4_affine", (
            np.block([[-L, np.zeros_like(L)], [0.3 * L, -L]]), rng.normal(size=(2001, 2 * n)), rng.normal(size=2 * n), 1e-3, 1000)
        W = np.eye(n) - 0.9 * graph.epsilon_bound(g) * L
        yield f"linear iteration n={n} (500 steps)", "iterate_linear", (W, rng.normal(size=n), 500)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    names = [b for b in ("cython", "python") if b in kernels.BACKENDS]
    if "cython" not in names:
        print("compiled extension not built; only the fallback is timed")
    print(f"{'case':<40}" + "".join(f"{b:>12}" for b in names) + ("     speedup" if len(names) == 2 else ""))
    rng = np.random.default_rng(0)
    for label, fn, call_args in _cases(rng):
        times = []
        for b in names:
            f = getattr(kernels.get_backend(b), fn)
            times.append(min(timeit.repeat(lambda: f(*call_args), number=1, repeat=args.repeat)))
        row = f"{label:<40}" + "".join(f"{t * 1e3:>10.3f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[1] / times[0]:>11.1f}x"
        print(row)

    g = graph.demo_graph()
    p = perturb.random_continuous(g, 42)
    cfg = CtConfig(1.0, t_end=40.0)
    x0 = np.array([7.0, 3.0, 1.0, -2.0, -15.0])
    t = min(timeit.repeat(lambda: integrate(g, x0, p, cfg), number=1, repeat=args.repeat))
    print(f"\nend-to-end ct demo run (40000 RK4 steps, backend {kernels.BACKEND}): {t * 1e3:.2f} ms")


if __name__ == "__main__":
    main()
