"""Benchmark the numba kernels against their pure-numpy fallbacks.

Usage: python benchmarks/bench_backends.py [--n 14] [--repeats 3]

Runs each hot kernel through both implementations on identical inputs,
checks the outputs match bit-for-bit, and prints the speedup.
"""

import argparse
import time

import numpy as np

from iqpbp import _accel, arch


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=14, help="qubit count for the sweeps")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if _accel.BACKEND != "numba":
        print("numba backend unavailable (IQPBP_BACKEND or missing numba); nothing to compare")
        return

    n = args.n
    gen_set = arch.complete(n)
    gens = np.asarray(gen_set.masks(), dtype=np.uint64)
    thetas = np.random.default_rng(0).random(gen_set.num_generators)
    fwht_real = np.random.default_rng(1).random(1 << (n + 4))
    fwht_cplx = fwht_real.astype(np.complex128)

    _accel.warm_up()

    rows = []

    jit = best_of(lambda: _accel._rank_table_numba(gens, n), args.repeats)
    ref = best_of(lambda: _accel._rank_table_numpy(gens, n), args.repeats)
    assert np.array_equal(_accel._rank_table_numba(gens, n), _accel._rank_table_numpy(gens, n))
    rows.append((f"rank_table(complete:{n}, 2^{n} freqs)", ref, jit))

    jit = best_of(lambda: _accel._phase_table_numba(gens, thetas, n), args.repeats)
    ref = best_of(lambda: _accel._phase_table_numpy(gens, thetas, n), args.repeats)
    assert np.array_equal(
        _accel._phase_table_numba(gens, thetas, n), _accel._phase_table_numpy(gens, thetas, n)
    )
    rows.append((f"phase_table(complete:{n}, 2^{n} states)", ref, jit))

    jit = best_of(lambda: _accel._fwht_numba_f8(fwht_real.copy()), args.repeats)
    ref = best_of(lambda: _accel._fwht_numpy(fwht_real.copy()), args.repeats)
    assert np.array_equal(
        _accel._fwht_numba_f8(fwht_real.copy()), _accel._fwht_numpy(fwht_real.copy())
    )
    rows.append((f"fwht(float64, 2^{n + 4})", ref, jit))

    jit = best_of(lambda: _accel._fwht_numba_c16(fwht_cplx.copy()), args.repeats)
    ref = best_of(lambda: _accel._fwht_numpy(fwht_cplx.copy()), args.repeats)
    rows.append((f"fwht(complex128, 2^{n + 4})", ref, jit))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}")
    for name, ref, jit in rows:
        print(f"{name:<{width}}  {ref * 1e3:>8.2f}ms  {jit * 1e3:>8.2f}ms  {ref / jit:>7.1f}x")


if __name__ == "__main__":
    main()
