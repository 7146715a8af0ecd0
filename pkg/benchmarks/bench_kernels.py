"""Time the compiled and pure-Python Strang steppers on the same plan.

    python3 benchmarks/bench_kernels.py [--eps 1/32] [--steps 200]
"""

from __future__ import annotations

import argparse
import time
from fractions import Fraction

import numpy as np

from motorhom import fokker_planck as fp
from motorhom import kernels
from motorhom.model import build_model


def time_backend(state, plan, steps: int, backend: str, repeats: int) -> tuple[float, np.ndarray]:
    best = np.inf
    out = None
    for _ in range(repeats):
        s = state.copy()
        t0 = time.perf_counter()
        kernels.advance(s.n1, s.n2, steps, plan, backend)
        best = min(best, time.perf_counter() - t0)
        out = s.n1 + s.n2
    return best, out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--model", default="asymmetric-ratchet")
    ap.add_argument("--eps", default="1/32")
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    eps = float(Fraction(args.eps))
    state = fp.init_state(build_model(args.model), eps)
    plan = fp.make_plan(state, state.default_dt())
    cells = state.size
    print(f"model={args.model} eps={eps:g} cells={cells} steps={args.steps} r={plan.r:.3g}")
    results = {}
    for name in kernels.available_backends():
        sec, rho = time_backend(state, plan, args.steps, name, args.repeats)
        results[name] = (sec, rho)
        ns = sec / (cells * args.steps) * 1e9
        print(f"{name:>9}: {sec:8.4f} s  ({ns:6.1f} ns per cell-step)")
    if len(results) == 2:
        (tc, rc), (tp, rp) = results["compiled"], results["python"]
        diff = float(np.max(np.abs(rc - rp)) / np.max(rp))
        print(f"speedup: {tp / tc:.1f}x   max relative difference: {diff:.2e}")
    else:
        print("compiled backend not built; only the fallback was timed")


if __name__ == "__main__":
    main()
