#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Runs the two hot paths (switched cycle-level simulation, closed-loop RK4)
on each available backend and prints wall times plus the speedup.

    python benchmarks/bench_backends.py [--switched-ms 20] [--closed-ms 50]
"""

import argparse
import math
import os
import time

from capdc import _backend
from capdc.averaged import solve_duty_for_target
from capdc.closedloop import ClosedLoopConfig, ScenarioEvent, simulate_closed_loop
from capdc.params import table_i_params
from capdc.regulator import design_pi
from capdc.smallsignal import coefficients_numeric
from capdc.switched import SwitchedConfig, simulate_switched
from capdc.xfer import gvd_closed_form, resonant_parameters


def time_call(fn, repeats=3):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--switched-ms", type=float, default=20.0)
    ap.add_argument("--closed-ms", type=float, default=50.0)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    params = table_i_params()
    op = solve_duty_for_target(176.0, 15.0, params, "exact")
    co = coefficients_numeric(op, params)
    rp = resonant_parameters(co, params)
    pi = design_pi(gvd_closed_form(co, params), rp.omega_o_exact, 2 * math.pi * 1e3)

    sw_cfg = SwitchedConfig(
        t_end=args.switched_ms * 1e-3, steps_per_cycle=200, record_decimation=10
    )
    cl_cfg = ClosedLoopConfig(t_end=args.closed_ms * 1e-3, record_decimation=10)
    dip = [ScenarioEvent(0.3 * args.closed_ms * 1e-3, "source_step", 14.0)]

    cases = {
        f"switched {args.switched_ms:g} ms (spc=200)": lambda: simulate_switched(
            params, 0.279, cfg=sw_cfg
        ),
        f"closed-loop {args.closed_ms:g} ms (rk4)": lambda: simulate_closed_loop(
            params, pi, 176.0, dip, cl_cfg
        ),
    }

    backends = _backend.available_backends()
    print(f"available backends: {', '.join(backends)}")
    results = {}
    for backend in backends:
        os.environ["CAPDC_BACKEND"] = backend
        for label, fn in cases.items():
            results[(label, backend)] = time_call(fn, args.repeats)
    os.environ.pop("CAPDC_BACKEND", None)

    width = max(len(label) for label in cases)
    print(f"{'case'.ljust(width)}  {'cython':>10}  {'python':>10}  {'speedup':>8}")
    for label in cases:
        t_c = results.get((label, "cython"))
        t_p = results.get((label, "python"))
        c_text = f"{t_c * 1e3:.1f} ms" if t_c is not None else "n/a"
        p_text = f"{t_p * 1e3:.1f} ms" if t_p is not None else "n/a"
        speed = f"{t_p / t_c:.1f}x" if (t_c and t_p) else "n/a"
        print(f"{label.ljust(width)}  {c_text:>10}  {p_text:>10}  {speed:>8}")


if __name__ == "__main__":
    main()
