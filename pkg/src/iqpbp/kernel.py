"""Spectral distributions over frequencies: the Gaussian-kernel spectrum,
weight-band spectra, and explicit tables, with exact weights and sampling."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import CapacityError, DimensionError
from .gf2 import BitVec

MASS_TOL = 1e-12
TABLE_CAP = 24  # evaluate_all materializes 2^n weights


def bandwidth_rate(sigma: float) -> float:
    """Per-bit rate tau of the Gaussian-kernel spectrum."""
    if sigma <= 0:
        raise ValueError(f"bandwidth must be > 0, got {sigma}")
    return (1.0 - math.exp(-1.0 / (2.0 * sigma))) / 2.0


@dataclass(frozen=True)
class SpectralPMF:
    """Probability mass function over n-bit frequencies.

    kinds: "gaussian" (product Bernoulli with rate tau(sigma)),
    "band" (uniform mass per allowed Hamming-weight class, uniform within),
    "explicit" (table of (frequency, probability) entries).
    """

    n: int
    kind: str
    sigma: Optional[float] = None
    weights: Optional[tuple[int, ...]] = None
    entries: Optional[tuple[tuple[BitVec, float], ...]] = None

    def __post_init__(self):
        if self.kind == "gaussian":
            bandwidth_rate(self.sigma)  # validates sigma
        elif self.kind == "band":
            ws = self.weights
            if not ws or len(set(ws)) != len(ws):
                raise ValueError("band weights must be nonempty and distinct")
            if any(w < 0 or w > self.n for w in ws):
                raise ValueError(f"band weights must lie in [0, {self.n}]")
        elif self.kind == "explicit":
            if not self.entries:
                raise ValueError("explicit spectrum needs at least one entry")
            seen = set()
            total = 0.0
            for a, prob in self.entries:
                if a.n != self.n:
                    raise DimensionError("entry frequency has wrong length")
                if a in seen:
                    raise ValueError(f"duplicate frequency {a}")
                if prob < 0:
                    raise ValueError(f"negative probability {prob}")
                seen.add(a)
                total += prob
            if abs(total - 1.0) > MASS_TOL:
                raise ValueError(f"explicit masses sum to {total!r}, not 1")
        else:
            raise ValueError(f"unknown spectrum kind {self.kind!r}")

    # -- exact evaluation ---------------------------------------------------

    def weight_of(self, a: BitVec) -> float:
        if a.n != self.n:
            raise DimensionError(f"frequency length {a.n} != {self.n}")
        if self.kind == "gaussian":
            tau = bandwidth_rate(self.sigma)
            w = a.weight
            return tau**w * (1.0 - tau) ** (self.n - w)
        if self.kind == "band":
            w = a.weight
            if w not in self.weights:
                return 0.0
            return 1.0 / (len(self.weights) * math.comb(self.n, w))
        table = dict(self.entries)
        return table.get(a, 0.0)

    def class_mass(self, weight: int) -> float:
        """Total mass carried by the Hamming-weight class."""
        if not 0 <= weight <= self.n:
            return 0.0
        if self.kind == "gaussian":
            tau = bandwidth_rate(self.sigma)
            return math.comb(self.n, weight) * tau**weight * (1.0 - tau) ** (self.n - weight)
        if self.kind == "band":
            return 1.0 / len(self.weights) if weight in self.weights else 0.0
        return sum(p for a, p in self.entries if a.weight == weight)

    def evaluate_all(self) -> np.ndarray:
        """Dense weight table indexed by the integer form of each frequency."""
        if self.n > TABLE_CAP:
            raise CapacityError(f"dense table needs 2^{self.n} entries; cap is 2^{TABLE_CAP}")
        size = 1 << self.n
        if self.kind == "explicit":
            out = np.zeros(size)
            for a, prob in self.entries:
                out[a.bits] = prob
            return out
        pops = np.bitwise_count(np.arange(size, dtype=np.uint64)).astype(np.intp)
        if self.kind == "gaussian":
            tau = bandwidth_rate(self.sigma)
            per_weight = np.array(
                [tau**w * (1.0 - tau) ** (self.n - w) for w in range(self.n + 1)]
            )
        else:
            per_weight = np.array(
                [
                    self.class_mass(w) / math.comb(self.n, w) if w in self.weights else 0.0
                    for w in range(self.n + 1)
                ]
            )
        return per_weight[pops]

    def support(self):
        """Iterate (frequency, weight) over nonzero-mass frequencies (dense kinds
        enumerate all 2^n; capped like evaluate_all)."""
        if self.kind == "explicit":
            for a, prob in self.entries:
                if prob > 0:
                    yield a, prob
            return
        table = self.evaluate_all()
        for value in range(table.shape[0]):
            if table[value] > 0:
                yield BitVec(self.n, value), float(table[value])

    # -- sampling -----------------------------------------------------------

    def sample(self, rng: np.random.Generator) -> BitVec:
        if self.kind == "gaussian":
            tau = bandwidth_rate(self.sigma)
            bits = 0
            draws = rng.random(self.n)
            for k in range(self.n):
                if draws[k] < tau:
                    bits |= 1 << k
            return BitVec(self.n, bits)
        if self.kind == "band":
            w = self.weights[rng.integers(0, len(self.weights))]
            positions = rng.choice(self.n, size=w, replace=False)
            return BitVec.from_indices(self.n, (int(k) for k in positions))
        cdf = np.cumsum([p for _, p in self.entries])
        idx = int(np.searchsorted(cdf, rng.random(), side="right"))
        idx = min(idx, len(self.entries) - 1)
        return self.entries[idx][0]


def gaussian_spectrum(n: int, sigma: float) -> SpectralPMF:
    """Product-Bernoulli spectrum of the Gaussian kernel at bandwidth sigma."""
    return SpectralPMF(n=n, kind="gaussian", sigma=float(sigma))


def weight_band(n: int, weights: Sequence[int]) -> SpectralPMF:
    """Uniform mass per allowed weight class, uniform within each class."""
    return SpectralPMF(n=n, kind="band", weights=tuple(sorted(int(w) for w in weights)))


def explicit_pmf(n: int, entries: Sequence[tuple[BitVec, float]]) -> SpectralPMF:
    return SpectralPMF(n=n, kind="explicit", entries=tuple(entries))


def pmf_weight(pmf: SpectralPMF, a: BitVec) -> float:
    """Exact mass of one frequency."""
    return pmf.weight_of(a)


def sample_frequency(pmf: SpectralPMF, rng: np.random.Generator) -> BitVec:
    """Draw a frequency with probability equal to its mass."""
    return pmf.sample(rng)


def load_explicit_file(path: str, n: int) -> SpectralPMF:
    """Read a JSON list of ["0/1 frequency", probability] pairs."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    entries = [(BitVec.from_string(text), float(prob)) for text, prob in data]
    return explicit_pmf(n, entries)


def parse_kernel(spec: str, n: int) -> SpectralPMF:
    """Parse gaussian:<sigma> | band:<k1,k2,...> | explicit:<path>."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "gaussian":
            return gaussian_spectrum(n, float(rest))
        if kind == "band":
            return weight_band(n, [int(w) for w in rest.split(",")])
        if kind == "explicit":
            return load_explicit_file(rest, n)
    except (ValueError, KeyError) as exc:
        raise ValueError(f"malformed kernel spec {spec!r}: {exc}") from exc
    raise ValueError(f"unknown kernel kind {kind!r} in {spec!r}")
