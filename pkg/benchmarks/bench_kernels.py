"""Compare the compiled integration kernel with the pure-Python fallback.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.
"""

import argparse
import time

import numpy as np

from qdcascade import _backend
from qdcascade.model import Drive, PhysicalParams
from qdcascade.pulses import ramsey_pair
from qdcascade.qcore import DensityMatrix
from qdcascade.solver import REPETITION_PERIOD, SolverConfig, evolve, rates_vector


def _cases(params):
    g = DensityMatrix.pure("g")
    return {
        "pi pulse, one repetition period": lambda cfg: evolve(
            g, -20.0, REPETITION_PERIOD, [Drive(1.92)], params, cfg),
        "pi pulse, pulse window only": lambda cfg: evolve(g, -20.0, 20.0, [Drive(1.92)], params, cfg),
        "Ramsey pair, tau = 240 ps": lambda cfg: evolve(
            g, -20.0, 260.0, ramsey_pair(1.29, 240.0, 0.3), params, cfg),
        "fixed-step RK4 oracle, 40 ps": lambda cfg: evolve(
            g, -20.0, 20.0, [Drive(1.92)], params, cfg.replace(method="rk4", interaction_frame=False)),
    }


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    params = PhysicalParams()
    backends = ["python"] + (["cython"] if _backend.compiled is not None else [])
    if len(backends) == 1:
        print("compiled kernel not built; timing the fallback only")

    y = np.zeros(20)
    y[0] = 1.0
    rates = rates_vector(params)
    one = np.ones(1)
    print(f"{'case':38s} " + " ".join(f"{b:>12s}" for b in backends) + "     speedup")
    row = []
    for b in backends:
        k = _backend.get(b)
        n = 2000
        t = _best(lambda: [k.rhs_vector(0.1, y, one, 0.0 * one, 0.0 * one, 4.0, 0.0, rates)
                           for _ in range(n)], args.repeat)
        row.append(t / n)
    _print("single RHS evaluation", row)
    for name, run in _cases(params).items():
        repeat = 1 if "RK4" in name else args.repeat
        row = [_best(lambda: run(SolverConfig(backend=b)), repeat) for b in backends]
        _print(name, row)


def _print(name, times):
    cells = " ".join(f"{t * 1e3:10.3f}ms" for t in times)
    speed = f"{times[0] / times[1]:9.1f}x" if len(times) > 1 else ""
    print(f"{name:38s} {cells} {speed}")


if __name__ == "__main__":
    main()
