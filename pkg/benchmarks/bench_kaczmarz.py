"""Compare the compiled and NumPy Kaczmarz kernels on precoder-sized problems.

    python3 benchmarks/bench_kaczmarz.py [--repeat 5]
"""

import argparse
import math
import time

import numpy as np

from xlafdm import kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def problems(rng):
    # (label, L rows of H, K columns, steps): a desk-scale subarray and a full-scale one
    for label, length, k, steps in (("desk   N=64 N_ts=16 K_s=2", 1024, 128, 200), ("full   N=64 N_ts=64 K_s=8", 4096, 512, 200)):
        h = (rng.standard_normal((length, k)) + 1j * rng.standard_normal((length, k))) / math.sqrt(2)
        yield label, h, steps


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    if kernels.compiled_kernels is None:
        print("compiled kernels unavailable; only the NumPy backend can run")
        return
    rng = np.random.default_rng(0)
    print(f"{'problem':30s} {'form':7s} {'cython s':>10s} {'numpy s':>10s} {'speedup':>8s}")
    for label, h, steps in problems(rng):
        k = h.shape[1]
        xi = 0.1
        gram = h.conj().T @ h
        seqs = rng.integers(0, k, size=(k, steps)).astype(np.int64)
        targets = np.arange(k, dtype=np.int64)
        hrows = np.ascontiguousarray(h.T)
        row = np.ascontiguousarray(seqs[0])
        for form, c_fn, p_fn in (
            ("dual", lambda: kernels.compiled_kernels.kaczmarz_dual(gram, targets, seqs, xi, xi),
                     lambda: kernels.python_kernels.kaczmarz_dual(gram, targets, seqs, xi, xi)),
            ("primal", lambda: kernels.compiled_kernels.kaczmarz_primal(hrows, row, 0, xi, xi),
                       lambda: kernels.python_kernels.kaczmarz_primal(hrows, row, 0, xi, xi)),
        ):
            tc = best_of(c_fn, args.repeat)
            tp = best_of(p_fn, args.repeat)
            print(f"{label:30s} {form:7s} {tc:10.4f} {tp:10.4f} {tp / tc:7.1f}x")
        a = kernels.compiled_kernels.kaczmarz_dual(gram, targets, seqs, xi, xi)
        b = kernels.python_kernels.kaczmarz_dual(gram, targets, seqs, xi, xi)
        print(f"{'':30s} max |cython - numpy| = {np.max(np.abs(a - b)):.2e}")


if __name__ == "__main__":
    main()
