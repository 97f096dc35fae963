"""Brute-force statevector ground truth at small qubit counts: output
probabilities, the full characteristic spectrum via Walsh-Hadamard
transform, collision probability, exact spectral MMD, and sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._accel import fwht_inplace, phase_table
from .arch import GeneratorSet
from .errors import CapacityError, DimensionError
from .gf2 import BitVec
from .kernel import SpectralPMF

STATEVECTOR_CAP = 20  # 2^20 complex amplitudes = 16 MB
PROB_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class OutputDistribution:
    """Probabilities over all 2^n bitstrings, indexed by their integer form."""

    n: int
    probs: np.ndarray

    def __post_init__(self):
        if self.probs.shape != (1 << self.n,):
            raise DimensionError(
                f"expected {1 << self.n} probabilities, got {self.probs.shape}"
            )
        if np.any(self.probs < -PROB_TOL):
            raise ValueError("negative probability")
        if abs(float(self.probs.sum()) - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {self.probs.sum()!r}")


def _check_cap(n: int) -> None:
    if n > STATEVECTOR_CAP:
        raise CapacityError(
            f"statevector needs 2^{n} amplitudes; cap is 2^{STATEVECTOR_CAP}"
        )


def statevector_probs(gen_set: GeneratorSet, theta) -> OutputDistribution:
    """Output distribution of the circuit by full statevector simulation."""
    n = gen_set.n
    _check_cap(n)
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (gen_set.num_generators,):
        raise ValueError("theta length does not match generator count")
    phases = phase_table(gen_set.masks(), theta, n)
    scale = 2.0 ** (-n / 2.0)
    amps = np.exp(1j * phases) * scale
    fwht_inplace(amps)
    amps *= scale
    return OutputDistribution(n=n, probs=np.abs(amps) ** 2)


def fourier_char_all(dist: OutputDistribution) -> np.ndarray:
    """All 2^n characteristic values sum_x (-1)^(a.x) q(x); index 0 is 1."""
    values = np.ascontiguousarray(dist.probs, dtype=np.float64).copy()
    fwht_inplace(values)
    return values


def collision_probability(dist: OutputDistribution) -> float:
    """Probability that two independent samples coincide."""
    return float(np.dot(dist.probs, dist.probs))


def mmd_exact(
    p: OutputDistribution, q: OutputDistribution, pmf: SpectralPMF
) -> float:
    """Spectral MMD: mass-weighted squared gaps of characteristic values."""
    if p.n != q.n or pmf.n != p.n:
        raise DimensionError("distributions and spectrum must share n")
    lam = pmf.evaluate_all()
    gap = fourier_char_all(p) - fourier_char_all(q)
    return float(np.dot(lam, gap * gap))


def mmd_grad_fd(
    gen_set: GeneratorSet,
    theta,
    ell: int,
    p: OutputDistribution,
    pmf: SpectralPMF,
    h: float = 1e-6,
) -> float:
    """Central finite difference of the exact MMD in angle ell (1-based)."""
    if h <= 0:
        raise ValueError(f"step must be > 0, got {h}")
    if not 1 <= ell <= gen_set.num_generators:
        raise IndexError(f"parameter index {ell} out of range")
    theta = np.asarray(theta, dtype=np.float64)
    shift = np.zeros_like(theta)
    shift[ell - 1] = h
    up = mmd_exact(p, statevector_probs(gen_set, theta + shift), pmf)
    down = mmd_exact(p, statevector_probs(gen_set, theta - shift), pmf)
    return (up - down) / (2.0 * h)


def sample_bitstrings(
    gen_set: GeneratorSet, theta, shots: int, rng: np.random.Generator
) -> list[BitVec]:
    """i.i.d. samples from the output distribution via inverse CDF."""
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    dist = statevector_probs(gen_set, theta)
    cdf = np.cumsum(dist.probs)
    cdf[-1] = 1.0
    draws = np.searchsorted(cdf, rng.random(shots), side="right")
    draws = np.minimum(draws, (1 << dist.n) - 1)
    return [BitVec(dist.n, int(x)) for x in draws]


# ---------------------------------------------------------------------------
# batched simulation (used for per-draw exact MMD gradients)
# ---------------------------------------------------------------------------

def parity_sign_matrix(gen_set: GeneratorSet) -> np.ndarray:
    """(D, 2^n) matrix of (-1)^(s_j . z) signs."""
    n = gen_set.n
    _check_cap(n)
    z = np.arange(1 << n, dtype=np.uint64)
    out = np.empty((gen_set.num_generators, 1 << n))
    for j, g in enumerate(gen_set.generators):
        par = np.bitwise_count(z & np.uint64(g.bits)).astype(np.int64) & 1
        out[j] = 1.0 - 2.0 * par
    return out


def char_spectrum_batch(
    sign_matrix: np.ndarray, thetas: np.ndarray, grad_ell: int | None = None
) -> tuple[np.ndarray, np.ndarray | None]:
    """Characteristic spectra (and optionally their derivative spectra in one
    1-based angle) for a batch of parameter rows.

    Returns (C, dC) with shape (draws, 2^n); dC is None when grad_ell is.
    """
    size = sign_matrix.shape[1]
    n = size.bit_length() - 1
    scale = 2.0 ** (-n / 2.0)
    phases = thetas @ sign_matrix
    amps = np.exp(1j * phases) * scale
    fwht_inplace(amps)
    amps *= scale
    probs = np.abs(amps) ** 2
    chars = np.ascontiguousarray(probs)
    fwht_inplace(chars)
    grads = None
    if grad_ell is not None:
        d_amps = np.ascontiguousarray(1j * sign_matrix[grad_ell - 1] * np.exp(1j * phases) * scale)
        fwht_inplace(d_amps)
        d_amps *= scale
        d_probs = 2.0 * np.real(np.conj(amps) * d_amps)
        grads = np.ascontiguousarray(d_probs)
        fwht_inplace(grads)
    return chars, grads
