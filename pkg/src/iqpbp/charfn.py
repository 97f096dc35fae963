"""Exact characteristic-function values and derivatives of the circuit's
output distribution, their Monte-Carlo estimators, and the closed-form
variance formulas under symmetric i.i.d. parameter initializations.

Parameter indices ``ell`` are 1-based throughout, matching generator
positions in a :class:`~iqpbp.arch.GeneratorSet`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .arch import GeneratorSet, anticommuting_subset, critical_rank
from .errors import CapacityError
from .gf2 import DEFAULT_CAP, BitVec, _gray_span, _null_basis

_CHUNK_ELEMENTS = 4_000_000  # cap on rows*draws per batched trig evaluation


# ---------------------------------------------------------------------------
# initialization schemes and their trigonometric moments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InitScheme:
    """Distribution of each angle; all kinds are symmetric about zero.

    kinds: "uniform" on [0, 2pi); "gaussian" N(0, gamma^2); "coinflip"
    (+-phi with equal probability); "moments" (raw mu, nu, kappa — usable in
    closed forms but not sampleable).
    """

    kind: str
    gamma: Optional[float] = None
    phi: Optional[float] = None
    mu: Optional[float] = None
    nu: Optional[float] = None
    kappa: Optional[float] = None

    def __post_init__(self):
        if self.kind == "uniform":
            return
        if self.kind == "gaussian":
            if self.gamma is None or self.gamma <= 0:
                raise ValueError(f"gaussian width must be > 0, got {self.gamma}")
            return
        if self.kind == "coinflip":
            if self.phi is None or not math.isfinite(self.phi):
                raise ValueError("coinflip angle must be finite")
            return
        if self.kind == "moments":
            mu, nu, kappa = self.mu, self.nu, self.kappa
            if mu is None or nu is None or kappa is None:
                raise ValueError("moments scheme needs mu, nu, kappa")
            if not (-1e-12 <= mu <= 1 + 1e-12 and -1e-12 <= nu <= 1 + 1e-12):
                raise ValueError(f"moments out of [0,1]: mu={mu}, nu={nu}")
            if abs(mu + nu - 1.0) > 1e-9:
                raise ValueError(f"mu + nu must be 1, got {mu + nu}")
            if kappa * kappa > nu + 1e-9:
                raise ValueError(f"kappa^2={kappa**2} exceeds nu={nu}")
            return
        raise ValueError(f"unknown init kind {self.kind!r}")

    @classmethod
    def uniform(cls) -> "InitScheme":
        return cls(kind="uniform")

    @classmethod
    def gaussian(cls, gamma: float) -> "InitScheme":
        return cls(kind="gaussian", gamma=float(gamma))

    @classmethod
    def coinflip(cls, phi: float) -> "InitScheme":
        return cls(kind="coinflip", phi=float(phi))

    @classmethod
    def moments(cls, mu: float, nu: float, kappa: float) -> "InitScheme":
        return cls(kind="moments", mu=float(mu), nu=float(nu), kappa=float(kappa))

    def describe(self) -> str:
        if self.kind == "uniform":
            return "uniform"
        if self.kind == "gaussian":
            return f"gaussian:{self.gamma:g}"
        if self.kind == "coinflip":
            return f"coinflip:{self.phi:g}"
        return f"moments:{self.mu:g},{self.nu:g},{self.kappa:g}"


def parse_init_scheme(spec: str) -> InitScheme:
    kind, _, rest = spec.partition(":")
    if kind == "uniform":
        return InitScheme.uniform()
    if kind == "gaussian":
        return InitScheme.gaussian(float(rest))
    if kind == "coinflip":
        return InitScheme.coinflip(float(rest))
    if kind == "moments":
        mu, nu, kappa = (float(x) for x in rest.split(","))
        return InitScheme.moments(mu, nu, kappa)
    raise ValueError(f"unknown init scheme {spec!r}")


def init_moments(scheme: InitScheme) -> tuple[float, float, float]:
    """(E[sin^2 2theta], E[cos^2 2theta], E[cos 2theta]) for the scheme."""
    if scheme.kind == "uniform":
        return 0.5, 0.5, 0.0
    if scheme.kind == "gaussian":
        decay = math.exp(-8.0 * scheme.gamma**2)
        return (1.0 - decay) / 2.0, (1.0 + decay) / 2.0, math.exp(-2.0 * scheme.gamma**2)
    if scheme.kind == "coinflip":
        c = math.cos(2.0 * scheme.phi)
        s = math.sin(2.0 * scheme.phi)
        return s * s, c * c, c
    return scheme.mu, scheme.nu, scheme.kappa


def sample_thetas(
    scheme: InitScheme, count: int, draws: int, rng: np.random.Generator
) -> np.ndarray:
    """(draws, count) i.i.d. angles; moment-only schemes are not sampleable."""
    if scheme.kind == "uniform":
        return rng.random((draws, count)) * (2.0 * math.pi)
    if scheme.kind == "gaussian":
        return rng.normal(0.0, scheme.gamma, size=(draws, count))
    if scheme.kind == "coinflip":
        return scheme.phi * (1.0 - 2.0 * rng.integers(0, 2, size=(draws, count)))
    raise TypeError("a raw-moments scheme carries no sampleable distribution")


# ---------------------------------------------------------------------------
# Monte-Carlo estimates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Estimate:
    """Sample mean with its standard error."""

    mean: float
    stderr: float
    samples: int

    @classmethod
    def from_samples(cls, values: np.ndarray) -> "Estimate":
        values = np.asarray(values, dtype=np.float64)
        count = values.size
        if count < 2:
            raise ValueError("need at least 2 samples")
        return cls(
            mean=float(values.mean()),
            stderr=float(values.std(ddof=1) / math.sqrt(count)),
            samples=count,
        )


# ---------------------------------------------------------------------------
# exact evaluation via row-space sign patterns
# ---------------------------------------------------------------------------

def _bits_to_signs(patterns: list[BitVec], m: int) -> np.ndarray:
    """(len(patterns), m) matrix of +-1 with sign = (-1)^bit."""
    if m == 0:
        return np.ones((len(patterns), 0))
    if m <= 64:
        raw = np.fromiter((p.bits for p in patterns), dtype=np.uint64, count=len(patterns))
        bits = (raw[:, None] >> np.arange(m, dtype=np.uint64)) & np.uint64(1)
    else:
        bits = np.empty((len(patterns), m), dtype=np.uint8)
        for i, p in enumerate(patterns):
            value = p.bits
            for j in range(m):
                bits[i, j] = (value >> j) & 1
    return 1.0 - 2.0 * bits.astype(np.float64)


@lru_cache(maxsize=128)
def _signed_patterns(
    gen_set: GeneratorSet, a: BitVec, cap: int
) -> tuple[tuple[int, ...], np.ndarray]:
    """1-based anticommuting indices and the 2^r x m sign-pattern matrix."""
    from .gf2 import rowspace_enumerate

    indices = tuple(anticommuting_subset(gen_set, a))
    rows = [gen_set.generators[j - 1] for j in indices]
    patterns = list(rowspace_enumerate(rows, cap))
    signs = _bits_to_signs(patterns, len(rows))
    signs.setflags(write=False)
    return indices, signs


def _check_theta(gen_set: GeneratorSet, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (gen_set.num_generators,):
        raise ValueError(
            f"theta has shape {theta.shape}, expected ({gen_set.num_generators},)"
        )
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta contains non-finite entries")
    return theta


def _check_ell(gen_set: GeneratorSet, ell: int) -> None:
    if not 1 <= ell <= gen_set.num_generators:
        raise IndexError(
            f"parameter index {ell} out of range 1..{gen_set.num_generators}"
        )


def exact_char(gen_set: GeneratorSet, theta, a: BitVec, cap: int = DEFAULT_CAP) -> float:
    """Characteristic function value at frequency a, exactly.

    Averages cos(2 * signed angle sum) over the 2^r row-space sign patterns
    of the anticommuting generators; r <= cap or CapacityError.
    """
    theta = _check_theta(gen_set, theta)
    indices, signs = _signed_patterns(gen_set, a, cap)
    if not indices:
        return 1.0
    idx0 = np.asarray(indices, dtype=np.intp) - 1
    phases = signs @ theta[idx0]
    return float(np.cos(2.0 * phases).mean())


def exact_char_grad(
    gen_set: GeneratorSet, theta, a: BitVec, ell: int, cap: int = DEFAULT_CAP
) -> float:
    """Partial derivative of exact_char w.r.t. angle ell (1-based).

    Exactly zero when generator ell commutes with the frequency's Pauli-X
    observable (even parity).
    """
    theta = _check_theta(gen_set, theta)
    _check_ell(gen_set, ell)
    indices, signs = _signed_patterns(gen_set, a, cap)
    if ell not in indices:
        return 0.0
    pos = indices.index(ell)
    idx0 = np.asarray(indices, dtype=np.intp) - 1
    phases = signs @ theta[idx0]
    return float(np.mean(-2.0 * signs[:, pos] * np.sin(2.0 * phases)))


def exact_char_batch(
    gen_set: GeneratorSet, thetas: np.ndarray, a: BitVec, cap: int = DEFAULT_CAP
) -> np.ndarray:
    """exact_char for every row of a (draws, D) parameter matrix."""
    indices, signs = _signed_patterns(gen_set, a, cap)
    draws = thetas.shape[0]
    if not indices:
        return np.ones(draws)
    idx0 = np.asarray(indices, dtype=np.intp) - 1
    out = np.empty(draws)
    chunk = max(1, _CHUNK_ELEMENTS // signs.shape[0])
    for start in range(0, draws, chunk):
        block = thetas[start : start + chunk, idx0]
        out[start : start + chunk] = np.cos(2.0 * (block @ signs.T)).mean(axis=1)
    return out


def exact_char_grad_batch(
    gen_set: GeneratorSet,
    thetas: np.ndarray,
    a: BitVec,
    ell: int,
    cap: int = DEFAULT_CAP,
) -> np.ndarray:
    """exact_char_grad for every row of a (draws, D) parameter matrix."""
    _check_ell(gen_set, ell)
    indices, signs = _signed_patterns(gen_set, a, cap)
    draws = thetas.shape[0]
    if ell not in indices:
        return np.zeros(draws)
    pos = indices.index(ell)
    idx0 = np.asarray(indices, dtype=np.intp) - 1
    weights = -2.0 * signs[:, pos] / signs.shape[0]
    out = np.empty(draws)
    chunk = max(1, _CHUNK_ELEMENTS // signs.shape[0])
    for start in range(0, draws, chunk):
        block = thetas[start : start + chunk, idx0]
        out[start : start + chunk] = np.sin(2.0 * (block @ signs.T)) @ weights
    return out


# ---------------------------------------------------------------------------
# Monte-Carlo estimators over uniform bitstrings
# ---------------------------------------------------------------------------

def _mask_words(bits: int, words: int) -> np.ndarray:
    full = (1 << 64) - 1
    return np.asarray([(bits >> (64 * w)) & full for w in range(words)], dtype=np.uint64)


def _random_z_words(rng: np.random.Generator, n: int, count: int) -> np.ndarray:
    words = (n + 63) // 64
    return rng.integers(0, 2**64, size=(count, words), dtype=np.uint64)


def _parity_signs(z_words: np.ndarray, mask: np.ndarray) -> np.ndarray:
    pops = np.bitwise_count(z_words & mask[None, :]).sum(axis=1)
    return 1.0 - 2.0 * (pops & 1).astype(np.float64)


def _mc_phases(
    gen_set: GeneratorSet, theta: np.ndarray, idx0: Sequence[int], z_words: np.ndarray
) -> np.ndarray:
    words = z_words.shape[1]
    phases = np.zeros(z_words.shape[0])
    for j in idx0:
        mask = _mask_words(gen_set.generators[j].bits, words)
        phases += theta[j] * _parity_signs(z_words, mask)
    return phases


def mc_char(
    gen_set: GeneratorSet,
    theta,
    a: BitVec,
    samples: int,
    rng: np.random.Generator,
) -> Estimate:
    """Unbiased Monte-Carlo estimate of exact_char from uniform bitstrings."""
    theta = _check_theta(gen_set, theta)
    if samples < 2:
        raise ValueError("need at least 2 samples")
    idx0 = [j - 1 for j in anticommuting_subset(gen_set, a)]
    if not idx0:
        return Estimate(mean=1.0, stderr=0.0, samples=samples)
    z_words = _random_z_words(rng, gen_set.n, samples)
    phases = _mc_phases(gen_set, theta, idx0, z_words)
    return Estimate.from_samples(np.cos(2.0 * phases))


def mc_char_grad(
    gen_set: GeneratorSet,
    theta,
    a: BitVec,
    ell: int,
    samples: int,
    rng: np.random.Generator,
) -> Estimate:
    """Unbiased Monte-Carlo estimate of exact_char_grad."""
    theta = _check_theta(gen_set, theta)
    _check_ell(gen_set, ell)
    if samples < 2:
        raise ValueError("need at least 2 samples")
    idx0 = [j - 1 for j in anticommuting_subset(gen_set, a)]
    if (ell - 1) not in idx0:
        return Estimate(mean=0.0, stderr=0.0, samples=samples)
    z_words = _random_z_words(rng, gen_set.n, samples)
    phases = _mc_phases(gen_set, theta, idx0, z_words)
    ell_mask = _mask_words(gen_set.generators[ell - 1].bits, z_words.shape[1])
    ell_signs = _parity_signs(z_words, ell_mask)
    return Estimate.from_samples(-2.0 * ell_signs * np.sin(2.0 * phases))


# ---------------------------------------------------------------------------
# closed-form moments and variances
# ---------------------------------------------------------------------------

def mean_char(gen_set: GeneratorSet, a: BitVec, scheme: InitScheme) -> float:
    """E[characteristic value] = kappa^(subset size)."""
    m = len(anticommuting_subset(gen_set, a))
    if m == 0:
        return 1.0
    _, _, kappa = init_moments(scheme)
    return kappa**m


def _null_histograms(
    columns: Sequence[BitVec], pos: Optional[int], cap: int
) -> tuple[np.ndarray, np.ndarray]:
    """Counts of vanishing-XOR subsets by size (and by size with position
    `pos` included) over the null space of the column matrix."""
    m = len(columns)
    basis = _null_basis(columns)
    nullity = len(basis)
    if nullity > cap:
        raise CapacityError(
            f"closed-form sum needs 2^{nullity} = {1 << nullity} subsets; cap is 2^{cap}"
        )
    total = np.zeros(m + 1, dtype=np.int64)
    with_pos = np.zeros(m + 1, dtype=np.int64)
    if m <= 64:
        masks = np.zeros(1, dtype=np.uint64)
        for b in basis:
            masks = np.concatenate([masks, masks ^ np.uint64(b)])
        pops = np.bitwise_count(masks).astype(np.int64)
        np.add.at(total, pops, 1)
        if pos is not None:
            hit = (masks >> np.uint64(pos)) & np.uint64(1)
            np.add.at(with_pos, pops[hit == 1], 1)
    else:
        for mask in _gray_span(basis):
            k = mask.bit_count()
            total[k] += 1
            if pos is not None and (mask >> pos) & 1:
                with_pos[k] += 1
    return total, with_pos


def var_char_closed(
    gen_set: GeneratorSet, a: BitVec, scheme: InitScheme, cap: int = DEFAULT_CAP
) -> float:
    """Variance of the characteristic value under the init scheme.

    Uniform initialization takes the rank fast path 2^-r; other schemes sum
    moment products over the vanishing-XOR subsets.
    """
    report = critical_rank(gen_set, a)
    m = report.subset_size
    if m == 0:
        return 0.0
    if scheme.kind == "uniform":
        return 2.0 ** (-report.rank)
    mu, nu, kappa = init_moments(scheme)
    columns = [gen_set.generators[j - 1] for j in report.indices]
    total, _ = _null_histograms(columns, None, cap)
    acc = 0.0
    for k in range(m + 1):
        if total[k]:
            acc += total[k] * mu**k * nu ** (m - k)
    return acc - kappa ** (2 * m)


def var_grad_closed(
    gen_set: GeneratorSet,
    a: BitVec,
    ell: int,
    scheme: InitScheme,
    cap: int = DEFAULT_CAP,
) -> float:
    """Variance of the characteristic value's partial derivative w.r.t.
    angle ell; exactly zero when generator ell has even parity with a."""
    _check_ell(gen_set, ell)
    report = critical_rank(gen_set, a)
    if ell not in report.indices:
        return 0.0
    if scheme.kind == "uniform":
        return 2.0 ** (2 - report.rank)
    mu, nu, kappa = init_moments(scheme)
    m = report.subset_size
    pos = report.indices.index(ell)
    columns = [gen_set.generators[j - 1] for j in report.indices]
    total, with_pos = _null_histograms(columns, pos, cap)
    acc = 0.0
    for k in range(m + 1):
        hits = int(with_pos[k])
        misses = int(total[k]) - hits
        if hits:
            acc += hits * mu ** (k - 1) * nu ** (m - k + 1)
        if misses:
            acc += misses * mu ** (k + 1) * nu ** (m - k - 1)
    return 4.0 * acc


def gaussian_grad_lower_bound(depth: int, gamma: float) -> float:
    """Depth-independent floor 4*mu*nu^(depth-1) on every nonzero gradient
    variance under N(0, gamma^2) initialization."""
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    mu, nu, _ = init_moments(InitScheme.gaussian(gamma))
    return 4.0 * mu * nu ** (depth - 1)
