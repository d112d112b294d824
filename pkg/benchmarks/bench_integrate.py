"""Wall-clock comparison of the compiled and pure-Python integrator backends.

    python benchmarks/bench_integrate.py [--repeat 3]

Both backends take identical step sequences; the table reports the best
of ``--repeat`` runs and the largest state difference between them.
"""
import argparse
import time

import numpy as np

from laxtop import _backend, apelrot, so4
from laxtop.dynamics import EPState, integrate


def cases():
    p = apelrot.reference_params()
    yield "apelrot t=50 tol=1e-10", p, apelrot.reference_state(p), 50.0, 1e-10
    yield "apelrot t=50 tol=1e-12", p, apelrot.reference_state(p), 50.0, 1e-12
    body = so4.So4CaseParams(1.0, 2.0, 1.0, 0.5).body()
    rng = np.random.default_rng(0)
    A, B = rng.normal(size=(2, 4, 4))
    yield "so4 t=50 tol=1e-11", body, EPState(A - A.T, B - B.T), 50.0, 1e-11


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    names = [b for b in ("python", "compiled") if b in _backend.BACKENDS]
    print(f"{'case':28s} {'steps':>7s} " + " ".join(f"{n:>10s}" for n in names) + "   speedup   max|dy|")
    for label, params, state, t_end, tol in cases():
        res = {}
        for name in names:
            res[name] = best_of(lambda: integrate(params, state, t_end, tol, backend=name), args.repeat)
        steps = res[names[0]][1].nsteps
        cols = " ".join(f"{res[n][0]:10.4f}" for n in names)
        if len(names) == 2:
            speed = res["python"][0] / res["compiled"][0]
            diff = np.max(np.abs(res["python"][1].y - res["compiled"][1].y))
            print(f"{label:28s} {steps:7d} {cols} {speed:9.0f}x {diff:9.1e}")
        else:
            print(f"{label:28s} {steps:7d} {cols}   (compiled backend not built)")


if __name__ == "__main__":
    main()
