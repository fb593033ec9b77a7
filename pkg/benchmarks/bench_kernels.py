#!/usr/bin/env python3
"""Time the numba cell kernels against their pure-numpy twins.

Runs a teacher-forced-style loop (forward chain, then the matching
backward chain) at configurable sizes and reports per-step cost for
each backend.  The numba path is warmed up first so JIT compilation
does not pollute the numbers.

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --hidden 128 --steps 200
"""

import argparse
import time

import numpy as np

from reviewgen import kernels
from reviewgen.numerics import RngState


def make_problem(hidden, input_dim, guidance_dim, seed):
    rng = RngState(seed)
    return {
        "Wx": rng.uniform(4 * hidden * input_dim, -0.3, 0.3).reshape(
            4 * hidden, input_dim),
        "Wm": rng.uniform(4 * hidden * hidden, -0.3, 0.3).reshape(
            4 * hidden, hidden),
        "Wq": rng.uniform(4 * hidden * guidance_dim, -0.3, 0.3).reshape(
            4 * hidden, guidance_dim),
        "b": rng.uniform(4 * hidden, -0.3, 0.3),
        "x": rng.uniform(input_dim, -1.0, 1.0),
        "g": rng.uniform(guidance_dim, -1.0, 1.0),
    }


def run_chain(forward, backward, prob, hidden, steps):
    """One full forward sweep followed by one backward sweep."""
    m = np.zeros(hidden)
    c = np.zeros(hidden)
    tape = []
    for _ in range(steps):
        i, f, o, u, c_raw, c_new, m_new = forward(
            prob["Wx"], prob["Wm"], prob["Wq"], prob["b"],
            prob["x"], prob["g"], m, c, 3.0, False)
        tape.append((m, c, i, f, o, u, c_raw, c_new))
        m, c = m_new, c_new
    d_m = np.ones(hidden)
    d_c = np.zeros(hidden)
    for m_prev, c_prev, i, f, o, u, c_raw, c_new in reversed(tape):
        out = backward(
            prob["Wx"], prob["Wm"], prob["Wq"], prob["x"], prob["g"],
            m_prev, c_prev, i, f, o, u, c_raw, c_new, d_m, d_c, 3.0, False)
        d_m, d_c = out[6], out[7]
    return m


def time_backend(forward, backward, prob, hidden, steps, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        run_chain(forward, backward, prob, hidden, steps)
        best = min(best, time.perf_counter() - start)
    # forward + backward = two kernel calls per step
    return best / (2 * steps)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--hidden", type=int, default=64)
    ap.add_argument("--input-dim", type=int, default=16)
    ap.add_argument("--guidance-dim", type=int, default=37)
    ap.add_argument("--steps", type=int, default=100)
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    prob = make_problem(args.hidden, args.input_dim, args.guidance_dim,
                        args.seed)
    print(f"hidden={args.hidden} input={args.input_dim} "
          f"guidance={args.guidance_dim} steps={args.steps} "
          f"repeats={args.repeats}")

    numpy_us = 1e6 * time_backend(
        kernels.glstm_step_forward_numpy, kernels.glstm_step_backward_numpy,
        prob, args.hidden, args.steps, args.repeats)
    print(f"numpy : {numpy_us:8.2f} us/step-pair")

    if not kernels.HAVE_NUMBA:
        print("numba : not installed, skipping")
        return

    # warm up the JIT before timing
    run_chain(kernels.glstm_step_forward_numba,
              kernels.glstm_step_backward_numba, prob, args.hidden, 2)
    numba_us = 1e6 * time_backend(
        kernels.glstm_step_forward_numba, kernels.glstm_step_backward_numba,
        prob, args.hidden, args.steps, args.repeats)
    print(f"numba : {numba_us:8.2f} us/step-pair")
    print(f"speedup: {numpy_us / numba_us:.2f}x (numpy/numba)")


if __name__ == "__main__":
    main()
