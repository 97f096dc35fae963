"""MMD training of the circuit model on a classical machine: target
construction, spectral-sampled loss/gradient estimators, and a plain SGD
loop with seeded, bit-reproducible traces."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np

from ._accel import fwht_inplace
from .arch import GeneratorSet, anticommuting_subset, parse_architecture
from .charfn import (
    Estimate,
    _check_theta,
    _mask_words,
    _parity_signs,
    _random_z_words,
    parse_init_scheme,
    sample_thetas,
)
from .errors import CapacityError, DimensionError
from .gf2 import BitVec
from .kernel import SpectralPMF, parse_kernel
from .streams import substream

TABLE_CAP = 20
PLANTED_TOL = 1e-12


# ---------------------------------------------------------------------------
# targets
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TargetSpec:
    """A target distribution: bitstring dataset, explicit table, or a planted
    sparse spectrum with known coefficients."""

    kind: str  # "dataset" | "explicit" | "planted"
    n: int
    samples: Optional[tuple[BitVec, ...]] = None
    probs: Optional[np.ndarray] = None
    planted: Optional[tuple[tuple[BitVec, float], ...]] = None
    meta: dict = field(default_factory=dict)

    @cached_property
    def _spectrum(self) -> np.ndarray:
        if self.n > TABLE_CAP:
            raise CapacityError(f"dense spectrum needs 2^{self.n} entries")
        if self.kind == "explicit":
            table = np.ascontiguousarray(self.probs, dtype=np.float64).copy()
            fwht_inplace(table)
            return table
        if self.kind == "planted":
            table = np.zeros(1 << self.n)
            table[0] = 1.0
            for a, amp in self.planted:
                table[a.bits] = amp
            return table
        counts = np.zeros(1 << self.n)
        for x in self.samples:
            counts[x.bits] += 1.0
        counts /= counts.sum()
        fwht_inplace(counts)
        return counts

    def spectrum(self) -> np.ndarray:
        """Dense table of characteristic values indexed by frequency."""
        return self._spectrum

    def distribution(self) -> np.ndarray:
        """Dense probability table (inverse transform of the spectrum)."""
        table = self.spectrum().copy()
        fwht_inplace(table)
        table /= 1 << self.n
        return table


def target_char(target: TargetSpec, a: BitVec) -> float:
    """Characteristic value of the target at one frequency."""
    if a.n != target.n:
        raise DimensionError(f"frequency length {a.n} != target n {target.n}")
    if a.is_zero:
        return 1.0
    if target.kind == "dataset":
        total = 0
        for x in target.samples:
            total += -1 if x.dot(a) else 1
        return total / len(target.samples)
    if target.kind == "planted":
        if a.is_zero:
            return 1.0
        return dict(target.planted).get(a, 0.0)
    return float(target.spectrum()[a.bits])


def dataset_target(samples: Sequence[BitVec]) -> TargetSpec:
    if not samples:
        raise ValueError("dataset is empty")
    n = samples[0].n
    for x in samples:
        if x.n != n:
            raise DimensionError("dataset bitstrings have mixed lengths")
    return TargetSpec(kind="dataset", n=n, samples=tuple(samples))


def explicit_target(probs, n: int) -> TargetSpec:
    if n > TABLE_CAP:
        raise CapacityError(f"explicit table needs 2^{n} entries; cap is 2^{TABLE_CAP}")
    table = np.ascontiguousarray(probs, dtype=np.float64)
    if table.shape != (1 << n,):
        raise ValueError(f"expected {1 << n} probabilities")
    if np.any(table < 0):
        raise ValueError("negative probability in target table")
    if abs(float(table.sum()) - 1.0) > 1e-9:
        raise ValueError(f"target probabilities sum to {table.sum()!r}")
    return TargetSpec(kind="explicit", n=n, probs=table)


def dirichlet_target(n: int, seed: int) -> TargetSpec:
    """Uniform draw from the probability simplex via exponential spacings."""
    if n > TABLE_CAP:
        raise CapacityError(f"simplex draw needs 2^{n} entries; cap is 2^{TABLE_CAP}")
    rng = substream(seed, "dirichlet")
    raw = rng.exponential(1.0, size=1 << n)
    spec = explicit_target(raw / raw.sum(), n)
    spec.meta["dirichlet_seed"] = seed
    return spec


def dirichlet_sigma2(n: int) -> float:
    """Ensemble second moment of every nonzero characteristic value under
    the uniform-simplex target ensemble."""
    return 1.0 / ((1 << n) + 1)


def planted_target(
    n: int, frequencies: Sequence[BitVec], amplitudes: Sequence[float]
) -> TargetSpec:
    """p(x) proportional to 1 + sum of planted signed parities; validated to
    be a true distribution by constructing its table."""
    if len(frequencies) != len(amplitudes):
        raise ValueError("frequencies and amplitudes differ in length")
    if len(set(frequencies)) != len(frequencies):
        raise ValueError("planted frequencies must be distinct")
    entries = []
    for a, amp in zip(frequencies, amplitudes):
        if a.n != n:
            raise DimensionError("planted frequency has wrong length")
        if a.is_zero:
            raise ValueError("the zero frequency is fixed at 1 and cannot be planted")
        if abs(amp) > 1.0:
            raise ValueError(f"amplitude {amp} outside [-1, 1]")
        entries.append((a, float(amp)))
    spec = TargetSpec(kind="planted", n=n, planted=tuple(entries))
    if np.min(spec.distribution()) < -PLANTED_TOL:
        raise ValueError("planted amplitudes give a negative probability")
    return spec


def load_dataset(path: str) -> TargetSpec:
    """One bitstring per line, coordinate 0 first."""
    with open(path, "r", encoding="utf-8") as fh:
        samples = [BitVec.from_string(line.strip()) for line in fh if line.strip()]
    return dataset_target(samples)


def resolve_target(spec: Union[TargetSpec, dict], n: int) -> TargetSpec:
    """Accept a TargetSpec or its JSON dict form."""
    if isinstance(spec, TargetSpec):
        target = spec
    else:
        kind = spec["kind"]
        if kind == "planted":
            target = planted_target(
                int(spec.get("n", n)),
                [BitVec.from_string(s) for s in spec["frequencies"]],
                [float(x) for x in spec["amplitudes"]],
            )
        elif kind == "dirichlet":
            target = dirichlet_target(int(spec.get("n", n)), int(spec["seed"]))
        elif kind == "explicit":
            target = explicit_target(spec["probs"], int(spec.get("n", n)))
        elif kind == "dataset":
            if "path" in spec:
                target = load_dataset(spec["path"])
            else:
                target = dataset_target([BitVec.from_string(s) for s in spec["samples"]])
        else:
            raise ValueError(f"unknown target kind {kind!r}")
    if target.n != n:
        raise DimensionError(f"target n {target.n} != circuit n {n}")
    return target


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def _subset_signs(
    gen_set: GeneratorSet, idx0: Sequence[int], z_words: np.ndarray
) -> np.ndarray:
    words = z_words.shape[1]
    return np.column_stack(
        [
            _parity_signs(z_words, _mask_words(gen_set.generators[j].bits, words))
            for j in idx0
        ]
    )


def mmd_loss_estimate(
    gen_set: GeneratorSet,
    theta,
    target: TargetSpec,
    pmf: SpectralPMF,
    n_freq: int,
    n_z: int,
    rng: np.random.Generator,
) -> Estimate:
    """Unbiased spectral MMD estimate: per sampled frequency, the squared gap
    is formed from two independent bitstring batches."""
    theta = _check_theta(gen_set, theta)
    if n_freq < 2 or n_z < 2:
        raise ValueError("need at least 2 sampled frequencies and 2 bitstrings")
    terms = np.empty(n_freq)
    for i in range(n_freq):
        a = pmf.sample(rng)
        cp = target_char(target, a)
        idx0 = [j - 1 for j in anticommuting_subset(gen_set, a)]
        if not idx0:
            terms[i] = (cp - 1.0) ** 2
            continue
        gaps = []
        for _ in range(2):
            z_words = _random_z_words(rng, gen_set.n, n_z)
            signs = _subset_signs(gen_set, idx0, z_words)
            phases = signs @ theta[idx0]
            gaps.append(cp - float(np.cos(2.0 * phases).mean()))
        terms[i] = gaps[0] * gaps[1]
    return Estimate.from_samples(terms)


def mmd_gradient_estimate(
    gen_set: GeneratorSet,
    theta,
    target: TargetSpec,
    pmf: SpectralPMF,
    n_freq: int,
    n_z: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Unbiased estimate of the full MMD gradient; the gap factor and the
    derivative factor use independent bitstring batches, and one batch serves
    every index in the sampled frequency's anticommuting set."""
    theta = _check_theta(gen_set, theta)
    if n_freq < 2 or n_z < 2:
        raise ValueError("need at least 2 sampled frequencies and 2 bitstrings")
    grad = np.zeros(gen_set.num_generators)
    for _ in range(n_freq):
        a = pmf.sample(rng)
        idx0 = [j - 1 for j in anticommuting_subset(gen_set, a)]
        if not idx0:
            continue
        cp = target_char(target, a)
        z1 = _random_z_words(rng, gen_set.n, n_z)
        signs1 = _subset_signs(gen_set, idx0, z1)
        gap = cp - float(np.cos(2.0 * (signs1 @ theta[idx0])).mean())
        z2 = _random_z_words(rng, gen_set.n, n_z)
        signs2 = _subset_signs(gen_set, idx0, z2)
        sin2 = np.sin(2.0 * (signs2 @ theta[idx0]))
        derivs = -2.0 * (signs2 * sin2[:, None]).mean(axis=0)
        grad[idx0] += -2.0 * gap * derivs
    grad /= n_freq
    return grad


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    architecture: str
    kernel: str
    init: str
    target: Union[TargetSpec, dict]
    learning_rate: float
    steps: int
    n_freq: int
    n_z: int
    seed: int

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be > 0")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.n_freq < 1 or self.n_z < 1:
            raise ValueError("sample counts must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(
            architecture=data["architecture"],
            kernel=data["kernel"],
            init=data["init"],
            target=data["target"],
            learning_rate=float(data["learning_rate"]),
            steps=int(data["steps"]),
            n_freq=int(data["n_freq"]),
            n_z=int(data["n_z"]),
            seed=int(data["seed"]),
        )

    @classmethod
    def from_json(cls, path: str) -> "TrainConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class TraceRecord:
    step: int
    loss: Estimate
    grad_norm: float
    theta_digest: str


@dataclass(frozen=True)
class TrainTrace:
    records: tuple[TraceRecord, ...]
    final_theta: np.ndarray

    def csv_rows(self) -> list[tuple]:
        return [
            (r.step, r.loss.mean, r.loss.stderr, r.grad_norm) for r in self.records
        ]


def _digest(theta: np.ndarray) -> str:
    return hashlib.sha256(theta.tobytes()).hexdigest()[:16]


def train(config: TrainConfig) -> TrainTrace:
    """Plain constant-rate SGD on the spectral MMD estimators; every random
    draw flows from the config seed through named substreams, so identical
    configs give bit-identical traces."""
    gen_set = parse_architecture(config.architecture)
    pmf = parse_kernel(config.kernel, gen_set.n)
    scheme = parse_init_scheme(config.init)
    target = resolve_target(config.target, gen_set.n)
    depth = gen_set.num_generators
    theta = sample_thetas(scheme, depth, 1, substream(config.seed, "init"))[0]

    records = []
    for step in range(config.steps):
        loss = mmd_loss_estimate(
            gen_set, theta, target, pmf, config.n_freq, config.n_z,
            substream(config.seed, "loss", step),
        )
        grad = mmd_gradient_estimate(
            gen_set, theta, target, pmf, config.n_freq, config.n_z,
            substream(config.seed, "grad", step),
        )
        records.append(
            TraceRecord(step, loss, float(np.linalg.norm(grad)), _digest(theta))
        )
        theta = theta - config.learning_rate * grad
    loss = mmd_loss_estimate(
        gen_set, theta, target, pmf, config.n_freq, config.n_z,
        substream(config.seed, "loss", config.steps),
    )
    grad = mmd_gradient_estimate(
        gen_set, theta, target, pmf, config.n_freq, config.n_z,
        substream(config.seed, "grad", config.steps),
    )
    records.append(
        TraceRecord(config.steps, loss, float(np.linalg.norm(grad)), _digest(theta))
    )
    return TrainTrace(records=tuple(records), final_theta=theta)
