"""Hot numeric kernels: numba-jitted versions with pure-numpy fallbacks.

The backend is picked once at import time from the ``IQPBP_BACKEND``
environment variable: ``numba`` (require the JIT), ``numpy`` (force the
fallback path), or ``auto`` (default: numba when importable).  Both paths
compute bit-identical results; ``benchmarks/bench_backends.py`` compares
their throughput.
"""

from __future__ import annotations

import os

import numpy as np

BACKEND_ENV = "IQPBP_BACKEND"


def _pick_backend() -> str:
    choice = os.environ.get(BACKEND_ENV, "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"{BACKEND_ENV} must be auto|numba|numpy, got {choice!r}")
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if choice == "numba":
            raise
        return "numpy"
    return "numba"


BACKEND = _pick_backend()

if BACKEND == "numba":
    from numba import njit
else:  # pragma: no cover - exercised via IQPBP_BACKEND=numpy runs
    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        if args and callable(args[0]):
            return args[0]
        return wrap


# ---------------------------------------------------------------------------
# critical-rank sweep over all 2^n frequencies
# ---------------------------------------------------------------------------

def _rank_table_numpy(gens: np.ndarray, n: int) -> np.ndarray:
    """Per-frequency GF(2) rank of the anticommuting generator subset."""
    gens_int = [int(g) for g in gens]
    out = np.empty(1 << n, dtype=np.uint8)
    for a in range(1 << n):
        pivots: dict[int, int] = {}
        r = 0
        for g in gens_int:
            if (a & g).bit_count() & 1:
                v = g
                while v:
                    b = (v & -v).bit_length() - 1
                    piv = pivots.get(b)
                    if piv is None:
                        pivots[b] = v
                        r += 1
                        break
                    v ^= piv
        out[a] = r
    return out


@njit(cache=True)
def _rank_table_numba(gens: np.ndarray, n: int) -> np.ndarray:  # pragma: no cover
    size = np.int64(1) << n
    d = gens.shape[0]
    out = np.empty(size, dtype=np.uint8)
    pivots = np.zeros(n, dtype=np.uint64)
    for a in range(size):
        au = np.uint64(a)
        for b in range(n):
            pivots[b] = np.uint64(0)
        r = 0
        for j in range(d):
            x = au & gens[j]
            x ^= x >> np.uint64(32)
            x ^= x >> np.uint64(16)
            x ^= x >> np.uint64(8)
            x ^= x >> np.uint64(4)
            x ^= x >> np.uint64(2)
            x ^= x >> np.uint64(1)
            if x & np.uint64(1):
                v = gens[j]
                while v != np.uint64(0):
                    b = 0
                    while (v >> np.uint64(b)) & np.uint64(1) == np.uint64(0):
                        b += 1
                    if pivots[b] != np.uint64(0):
                        v ^= pivots[b]
                    else:
                        pivots[b] = v
                        r += 1
                        break
        out[a] = r
    return out


def rank_table(gen_masks, n: int) -> np.ndarray:
    """Ranks of the odd-parity generator subset for every frequency 0..2^n-1.

    Requires n <= 24 (table size) and generators representable in 64 bits.
    """
    if n > 24:
        raise ValueError(f"rank_table supports n <= 24, got n={n}")
    gens = np.asarray([int(g) for g in gen_masks], dtype=np.uint64)
    if BACKEND == "numba":
        return _rank_table_numba(gens, n)
    return _rank_table_numpy(gens, n)


# ---------------------------------------------------------------------------
# circuit phase table over all 2^n computational basis states
# ---------------------------------------------------------------------------

def _phase_table_numpy(gens: np.ndarray, thetas: np.ndarray, n: int) -> np.ndarray:
    z = np.arange(1 << n, dtype=np.uint64)
    phases = np.zeros(1 << n, dtype=np.float64)
    for g, t in zip(gens, thetas):
        par = np.bitwise_count(z & g).astype(np.int64) & 1
        phases += t * (1.0 - 2.0 * par)
    return phases


@njit(cache=True)
def _phase_table_numba(gens: np.ndarray, thetas: np.ndarray, n: int) -> np.ndarray:  # pragma: no cover
    size = np.int64(1) << n
    d = gens.shape[0]
    out = np.empty(size, dtype=np.float64)
    for z in range(size):
        zu = np.uint64(z)
        acc = 0.0
        for j in range(d):
            x = zu & gens[j]
            x ^= x >> np.uint64(32)
            x ^= x >> np.uint64(16)
            x ^= x >> np.uint64(8)
            x ^= x >> np.uint64(4)
            x ^= x >> np.uint64(2)
            x ^= x >> np.uint64(1)
            if x & np.uint64(1):
                acc -= thetas[j]
            else:
                acc += thetas[j]
        out[z] = acc
    return out


def phase_table(gen_masks, thetas, n: int) -> np.ndarray:
    """Sum of +-theta_j phase contributions for every n-bit basis state."""
    gens = np.asarray([int(g) for g in gen_masks], dtype=np.uint64)
    th = np.ascontiguousarray(thetas, dtype=np.float64)
    if gens.shape[0] != th.shape[0]:
        raise ValueError("generator/parameter count mismatch")
    if BACKEND == "numba":
        return _phase_table_numba(gens, th, n)
    return _phase_table_numpy(gens, th, n)


# ---------------------------------------------------------------------------
# fast Walsh-Hadamard transform (unnormalized butterfly)
# ---------------------------------------------------------------------------

def _fwht_numpy(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    h = 1
    while h < n:
        y = x.reshape(x.shape[:-1] + (n // (2 * h), 2, h))
        even = y[..., 0, :] + y[..., 1, :]
        odd = y[..., 0, :] - y[..., 1, :]
        y[..., 0, :] = even
        y[..., 1, :] = odd
        h *= 2
    return x


@njit(cache=True)
def _fwht_numba_f8(x: np.ndarray) -> np.ndarray:  # pragma: no cover
    n = x.shape[0]
    h = 1
    while h < n:
        for i in range(0, n, 2 * h):
            for k in range(i, i + h):
                u = x[k]
                v = x[k + h]
                x[k] = u + v
                x[k + h] = u - v
        h *= 2
    return x


@njit(cache=True)
def _fwht_numba_c16(x: np.ndarray) -> np.ndarray:  # pragma: no cover
    n = x.shape[0]
    h = 1
    while h < n:
        for i in range(0, n, 2 * h):
            for k in range(i, i + h):
                u = x[k]
                v = x[k + h]
                x[k] = u + v
                x[k + h] = u - v
        h *= 2
    return x


def fwht_inplace(x: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along the last axis, in place.

    The last axis length must be a power of two.  Batched inputs (ndim > 1)
    always take the vectorized numpy path.
    """
    n = x.shape[-1]
    if n & (n - 1):
        raise ValueError(f"length {n} is not a power of two")
    if not x.flags["C_CONTIGUOUS"]:
        raise ValueError("fwht_inplace requires a C-contiguous array")
    if BACKEND == "numba" and x.ndim == 1 and n > 1:
        if x.dtype == np.float64:
            return _fwht_numba_f8(x)
        if x.dtype == np.complex128:
            return _fwht_numba_c16(x)
    return _fwht_numpy(x)


def warm_up() -> None:
    """Trigger JIT compilation of all kernels (no-op on the numpy backend)."""
    gens = np.asarray([3], dtype=np.uint64)
    rank_table(gens, 2)
    phase_table(gens, np.asarray([0.1]), 2)
    fwht_inplace(np.zeros(4))
    fwht_inplace(np.zeros(4, dtype=np.complex128))
