"""Experiment engine: empirical-vs-closed-form variance measurements,
scaling scans over architecture families, anti-concentration sums, and the
MMD gradient-variance bounds."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from . import charfn, oracle
from ._accel import rank_table
from .arch import GeneratorSet, architectures_for_scan, critical_rank, erdos_renyi
from .charfn import (
    Estimate,
    InitScheme,
    exact_char_batch,
    exact_char_grad_batch,
    init_moments,
    sample_thetas,
    var_char_closed,
    var_grad_closed,
)
from .errors import CapacityError
from .gf2 import DEFAULT_CAP, BitVec
from .kernel import SpectralPMF, bandwidth_rate
from .streams import spawn_seeds, substream

QUANTITIES = ("char", "grad", "mmd-grad")
_DRAW_CHUNK = 4096


@dataclass(frozen=True)
class VarianceRecord:
    """One measured (architecture, frequency, parameter) variance."""

    arch_label: str
    n: int
    frequency: BitVec
    ell: Optional[int]
    scheme: str
    closed_form: Optional[float]
    empirical: Optional[Estimate]
    draws: int
    seed: int


@dataclass(frozen=True)
class ScalingCurve:
    """log2(variance)-vs-n fit over a family of qubit counts."""

    points: tuple[tuple[int, float], ...]
    slope: float
    slope_stderr: float
    records: tuple[VarianceRecord, ...] = ()

    @classmethod
    def fit(
        cls, points: Sequence[tuple[int, float]], records: Sequence[VarianceRecord] = ()
    ) -> "ScalingCurve":
        if len(points) < 3:
            raise ValueError("slope fitting needs at least 3 points")
        if any(v <= 0 for _, v in points):
            raise ValueError("slope fitting needs positive variances")
        x = np.asarray([n for n, _ in points], dtype=np.float64)
        y = np.log2([v for _, v in points])
        xc = x - x.mean()
        denom = float(np.dot(xc, xc))
        slope = float(np.dot(xc, y) / denom)
        resid = y - (y.mean() + slope * xc)
        dof = len(points) - 2
        stderr = float(math.sqrt(max(float(np.dot(resid, resid)), 0.0) / dof / denom))
        return cls(tuple((int(n), float(v)) for n, v in points), slope, stderr, tuple(records))


def variance_with_jackknife(values: np.ndarray) -> tuple[float, float]:
    """Unbiased sample variance and its delete-one jackknife standard error."""
    x = np.asarray(values, dtype=np.float64)
    count = x.size
    if count < 2:
        raise ValueError("variance needs at least 2 draws")
    d = x - x.mean()
    ssq = float(np.dot(d, d))
    var = ssq / (count - 1)
    if count < 3:
        return var, float("inf")
    loo = (ssq - d * d * (count / (count - 1))) / (count - 2)
    dev = loo - loo.mean()
    se = math.sqrt((count - 1) / count * float(np.dot(dev, dev)))
    return var, se


# ---------------------------------------------------------------------------
# empirical variances of exact per-draw quantities
# ---------------------------------------------------------------------------

def _resolve_target_spectrum(target, n: int) -> np.ndarray:
    if target is None:
        raise ValueError("mmd-grad needs a target distribution")
    if hasattr(target, "spectrum"):
        table = target.spectrum()
    else:
        table = np.asarray(target, dtype=np.float64)
    if table.shape != (1 << n,):
        raise ValueError(f"target spectrum must have 2^{n} entries")
    return table


def mmd_grad_exact(
    gen_set: GeneratorSet,
    theta,
    target,
    pmf: SpectralPMF,
) -> np.ndarray:
    """Exact MMD gradient -2 sum_a mass(a) (C_p - C_theta) dC_theta, all ells."""
    theta = np.asarray(theta, dtype=np.float64)
    cp = _resolve_target_spectrum(target, gen_set.n)
    lam = pmf.evaluate_all()
    signs = oracle.parity_sign_matrix(gen_set)
    out = np.empty(gen_set.num_generators)
    for ell in range(1, gen_set.num_generators + 1):
        chars, grads = oracle.char_spectrum_batch(signs, theta[None, :], grad_ell=ell)
        out[ell - 1] = -2.0 * float(np.dot(lam, (cp - chars[0]) * grads[0]))
    return out


def _mmd_grad_values(
    gen_set: GeneratorSet,
    thetas: np.ndarray,
    ell: int,
    cp: np.ndarray,
    lam: np.ndarray,
    signs: np.ndarray,
) -> np.ndarray:
    chars, grads = oracle.char_spectrum_batch(signs, thetas, grad_ell=ell)
    return -2.0 * ((cp[None, :] - chars) * grads) @ lam


def _thread_chunks(
    worker: Callable[[int], np.ndarray], n_chunks: int, threads: int
) -> list[np.ndarray]:
    if threads <= 1 or n_chunks <= 1:
        return [worker(i) for i in range(n_chunks)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, range(n_chunks)))


def empirical_variance(
    quantity: str,
    gen_set: GeneratorSet,
    a: Optional[BitVec],
    ell: Optional[int],
    scheme: InitScheme,
    target=None,
    pmf: Optional[SpectralPMF] = None,
    draws: int = 10_000,
    seed: int = 0,
    cap: int = DEFAULT_CAP,
    threads: int = 1,
) -> VarianceRecord:
    """Sample variance (with jackknife stderr) of an exactly evaluated
    quantity over i.i.d. parameter draws, next to its closed form."""
    if quantity not in QUANTITIES:
        raise ValueError(f"quantity must be one of {QUANTITIES}")
    if draws < 2:
        raise ValueError("need at least 2 draws")
    depth = gen_set.num_generators
    rng = substream(seed, "empvar", quantity)
    thetas = sample_thetas(scheme, depth, draws, rng)

    closed: Optional[float] = None
    if quantity == "char":
        if a is None:
            raise ValueError("char variance needs a frequency")
        values = exact_char_batch(gen_set, thetas, a, cap)
        closed = var_char_closed(gen_set, a, scheme, cap)
    elif quantity == "grad":
        if a is None or ell is None:
            raise ValueError("grad variance needs a frequency and an index")
        values = exact_char_grad_batch(gen_set, thetas, a, ell, cap)
        closed = var_grad_closed(gen_set, a, ell, scheme, cap)
    else:
        if ell is None or pmf is None:
            raise ValueError("mmd-grad variance needs ell, target, and pmf")
        cp = _resolve_target_spectrum(target, gen_set.n)
        lam = pmf.evaluate_all()
        signs = oracle.parity_sign_matrix(gen_set)
        chunks = [
            thetas[s : s + _DRAW_CHUNK] for s in range(0, draws, _DRAW_CHUNK)
        ]
        parts = _thread_chunks(
            lambda i: _mmd_grad_values(gen_set, chunks[i], ell, cp, lam, signs),
            len(chunks),
            threads,
        )
        values = np.concatenate(parts)

    var, se = variance_with_jackknife(values)
    return VarianceRecord(
        arch_label=gen_set.label,
        n=gen_set.n,
        frequency=a if a is not None else BitVec.zeros(gen_set.n),
        ell=ell,
        scheme=scheme.describe(),
        closed_form=closed,
        empirical=Estimate(mean=var, stderr=se, samples=draws),
        draws=draws,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# scaling scans
# ---------------------------------------------------------------------------

def er_mean_rank_variance(n: int, weight: int, c: float, quantity: str = "grad") -> float:
    """Graph-ensemble mean of 2^(2-r) (grad) or 2^(-r) (char) for fixed-weight
    frequencies on the random-pair architecture."""
    p = min(1.0, c * math.log(n) / n)
    q = 1.0 - (1.0 - p) ** weight
    base = 2.0 ** (-weight) * (1.0 - q / 2.0) ** (n - weight)
    return 4.0 * base if quantity == "grad" else base


def _scan_frequency(n: int, a_weight: Union[int, float]) -> BitVec:
    if isinstance(a_weight, float) and not a_weight.is_integer():
        k = max(1, round(a_weight * n))
    else:
        k = int(a_weight)
    if not 1 <= k <= n:
        raise ValueError(f"frequency weight {k} out of range for n={n}")
    return BitVec.from_indices(n, range(k))


def bp_scaling_scan(
    family: str,
    n_list: Sequence[int],
    a_weight: Union[int, float],
    scheme: InitScheme,
    quantity: str = "grad",
    seed: int = 0,
    graph_seeds: int = 100,
    er_c: float = 3.0,
    cap: int = DEFAULT_CAP,
) -> ScalingCurve:
    """Closed-form variance of one spectral component across qubit counts,
    with a least-squares log2 slope.

    The random-pair family averages per-graph closed forms over graph seeds
    (uniform scheme only) and records the ensemble formula as closed_form.
    """
    points: list[tuple[int, float]] = []
    records: list[VarianceRecord] = []
    for n in n_list:
        a = _scan_frequency(n, a_weight)
        if family == "er":
            if scheme.kind != "uniform":
                raise ValueError("random-pair scan averages need the uniform scheme")
            values = []
            for gseed in spawn_seeds(seed, graph_seeds, "er-scan", n):
                report = critical_rank(erdos_renyi(n, er_c, gseed), a)
                base = 2.0 ** (-report.rank)
                values.append(4.0 * base if quantity == "grad" else base)
            est = Estimate.from_samples(np.asarray(values))
            closed = er_mean_rank_variance(n, a.weight, er_c, quantity)
            records.append(
                VarianceRecord(
                    arch_label=f"er:{n}:{er_c:g}:avg{graph_seeds}",
                    n=n,
                    frequency=a,
                    ell=None,
                    scheme=scheme.describe(),
                    closed_form=closed,
                    empirical=est,
                    draws=graph_seeds,
                    seed=seed,
                )
            )
            points.append((n, est.mean))
            continue
        gen_set = architectures_for_scan(family, n, c=er_c, seed=seed)
        report = critical_rank(gen_set, a)
        if report.subset_size == 0:
            raise ValueError(f"frequency {a} has an empty anticommuting set")
        ell = report.indices[0]
        if quantity == "grad":
            value = var_grad_closed(gen_set, a, ell, scheme, cap)
        else:
            value = var_char_closed(gen_set, a, scheme, cap)
        records.append(
            VarianceRecord(
                arch_label=gen_set.label,
                n=n,
                frequency=a,
                ell=ell,
                scheme=scheme.describe(),
                closed_form=value,
                empirical=None,
                draws=0,
                seed=seed,
            )
        )
        points.append((n, value))
    return ScalingCurve.fit(points, records)


# ---------------------------------------------------------------------------
# anti-concentration sums
# ---------------------------------------------------------------------------

def _subset_rank(masks: Sequence[int], a: int) -> int:
    pivots: dict[int, int] = {}
    r = 0
    for g in masks:
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
    return r


def anticoncentration_sum_exact(gen_set: GeneratorSet, cap: int = DEFAULT_CAP) -> float:
    """Sum over all frequencies of 2^(-critical rank); the zero frequency
    contributes 1.  Bounded iff the output ensemble anti-concentrates."""
    n = gen_set.n
    if n > cap or n > 24:
        raise CapacityError(f"exact sum loops over 2^{n} frequencies; cap is 2^{min(cap, 24)}")
    table = rank_table(gen_set.masks(), n)
    return float(np.power(2.0, -table.astype(np.float64)).sum())


def anticoncentration_sum_mc(
    gen_set: GeneratorSet, samples: int, seed: int = 0
) -> Estimate:
    """Monte-Carlo estimate of the same sum from uniformly sampled frequencies."""
    if samples < 2:
        raise ValueError("need at least 2 samples")
    n = gen_set.n
    masks = gen_set.masks()
    rng = substream(seed, "anticonc-mc")
    words = (n + 63) // 64
    values = np.empty(samples)
    for i in range(samples):
        raw = rng.integers(0, 2**64, size=words, dtype=np.uint64)
        a = 0
        for w in range(words):
            a |= int(raw[w]) << (64 * w)
        a &= (1 << n) - 1
        values[i] = 2.0 ** (n - _subset_rank(masks, a))
    return Estimate.from_samples(values)


def er_anticoncentration_formula(n: int, c: float) -> float:
    """Exact graph-ensemble expectation of the anti-concentration sum for the
    random-pair architecture, evaluated in log space."""
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if c <= 0:
        raise ValueError(f"need c > 0, got {c}")
    p = min(1.0, c * math.log(n) / n)
    lam = 1.0 - p
    log_lam = math.log(lam) if lam > 0 else None
    ln2 = math.log(2.0)
    total = 0.0
    for k in range(n + 1):
        log_weight = (
            math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1) - n * ln2
        )
        if k == 0:
            lam_k = 1.0
        elif log_lam is None:
            lam_k = 0.0
        else:
            lam_k = math.exp(k * log_lam)
        total += math.exp(log_weight + (n - k) * math.log1p(lam_k))
    return total


# ---------------------------------------------------------------------------
# MMD gradient-variance bounds
# ---------------------------------------------------------------------------

def _parity_mask(values: np.ndarray, mask: int) -> np.ndarray:
    return (np.bitwise_count(values & np.uint64(mask)) & 1).astype(bool)


def _odd_parity_probability(weight: int, tau: float) -> float:
    return (1.0 - (1.0 - 2.0 * tau) ** weight) / 2.0


def mmd_grad_var_upper(
    gen_set: GeneratorSet,
    ell: int,
    pmf: SpectralPMF,
    scheme: InitScheme,
    cap: int = DEFAULT_CAP,
    method: str = "auto",
) -> float:
    """Mass-weighted upper bound 16 * sum_a mass(a) Var[dC/dtheta_ell].

    method: "auto" picks a weight-class closed form for the product/complete
    architectures under uniform init with a gaussian-kernel spectrum, a
    vectorized rank sweep for other uniform cases, and an explicit frequency
    loop otherwise; "explicit" forces the loop (cross-check path).
    """
    charfn._check_ell(gen_set, ell)
    n = gen_set.n
    s_ell = gen_set.generators[ell - 1]
    if method not in ("auto", "explicit", "weight-class"):
        raise ValueError(f"unknown method {method!r}")

    if method == "weight-class" and (scheme.kind != "uniform" or pmf.kind != "gaussian"):
        raise ValueError("weight-class method needs uniform init and a gaussian spectrum")
    if method != "explicit" and scheme.kind == "uniform" and pmf.kind == "gaussian":
        tau = bandwidth_rate(pmf.sigma)
        label = gen_set.label
        if method == "weight-class" or label.startswith(("product:", "complete:")):
            if label.startswith("product:"):
                # rank equals frequency weight; only weight-1 generators exist
                total = 0.0
                for k in range(1, n + 1):
                    class_mass = (
                        math.comb(n - 1, k - 1) * tau**k * (1.0 - tau) ** (n - k)
                    )
                    total += class_mass * 2.0 ** (2 - k)
                return 16.0 * total
            if label.startswith("complete:"):
                # rank is n for every nonzero frequency
                odd = _odd_parity_probability(s_ell.weight, tau)
                return 16.0 * odd * 2.0 ** (2 - n)
            raise ValueError("weight-class method needs a product/complete set")

    if scheme.kind == "uniform" and pmf.kind != "explicit" and n <= 24:
        lam = pmf.evaluate_all()
        ranks = rank_table(gen_set.masks(), n).astype(np.float64)
        odd = _parity_mask(np.arange(1 << n, dtype=np.uint64), s_ell.bits)
        return 16.0 * float(np.sum(lam[odd] * np.power(2.0, 2.0 - ranks[odd])))

    total = 0.0
    for a, mass in pmf.support():
        total += mass * var_grad_closed(gen_set, a, ell, scheme, cap)
    return 16.0 * total


Sigma2 = Union[float, Mapping[BitVec, float], Callable[[BitVec], float]]


def _sigma2_fn(sigma2: Sigma2) -> Callable[[BitVec], float]:
    if callable(sigma2):
        return sigma2
    if isinstance(sigma2, Mapping):
        def lookup(a: BitVec) -> float:
            if a not in sigma2:
                raise KeyError(f"sigma^2 missing for frequency {a}")
            return float(sigma2[a])
        return lookup
    value = float(sigma2)
    return lambda a: value


def mmd_grad_var_lower_avg(
    gen_set: GeneratorSet,
    ell: int,
    pmf: SpectralPMF,
    scheme: InitScheme,
    sigma2: Sigma2,
    cap: int = DEFAULT_CAP,
) -> float:
    """Target-ensemble-averaged lower bound
    4 * sum_a mass(a)^2 sigma_a^2 Var[dC/dtheta_ell]."""
    charfn._check_ell(gen_set, ell)
    sig = _sigma2_fn(sigma2)
    total = 0.0
    for a, mass in pmf.support():
        var = var_grad_closed(gen_set, a, ell, scheme, cap)
        if var:
            total += mass * mass * sig(a) * var
    return 4.0 * total


# ---------------------------------------------------------------------------
# trainability classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainabilityVerdict:
    frequency: BitVec
    trainable: bool
    best_ell: Optional[int]
    best_variance: float
    threshold: float
    method: str  # "exact" or "lower-bound"


def _per_position_grad_vars(
    gen_set: GeneratorSet, report, scheme: InitScheme, cap: int
) -> np.ndarray:
    """Gradient variance for every anticommuting position at once."""
    from .gf2 import _gray_span, _null_basis

    mu, nu, _ = init_moments(scheme)
    m = report.subset_size
    columns = [gen_set.generators[j - 1] for j in report.indices]
    basis = _null_basis(columns)
    if len(basis) > cap:
        raise CapacityError(
            f"per-position sums need 2^{len(basis)} subsets; cap is 2^{cap}"
        )
    total = np.zeros(m + 1, dtype=np.int64)
    with_pos = np.zeros((m + 1, m), dtype=np.int64)
    if m <= 64:
        masks = np.zeros(1, dtype=np.uint64)
        for b in basis:
            masks = np.concatenate([masks, masks ^ np.uint64(b)])
        pops = np.bitwise_count(masks).astype(np.int64)
        np.add.at(total, pops, 1)
        bits = ((masks[:, None] >> np.arange(m, dtype=np.uint64)) & np.uint64(1)).astype(bool)
        for pos in range(m):
            np.add.at(with_pos[:, pos], pops[bits[:, pos]], 1)
    else:
        for mask in _gray_span(basis):
            k = mask.bit_count()
            total[k] += 1
            for pos in range(m):
                if (mask >> pos) & 1:
                    with_pos[k, pos] += 1
    out = np.zeros(m)
    for k in range(m + 1):
        if not total[k]:
            continue
        hit_term = mu ** (k - 1) * nu ** (m - k + 1) if k >= 1 else 0.0
        miss_term = mu ** (k + 1) * nu ** (m - k - 1)
        hits = with_pos[k]
        out += 4.0 * (hits * hit_term + (total[k] - hits) * miss_term)
    return out


def classify_trainability(
    gen_set: GeneratorSet,
    frequencies: Sequence[BitVec],
    scheme: InitScheme,
    threshold_exponent: float = 3.0,
    cap: int = DEFAULT_CAP,
) -> list[TrainabilityVerdict]:
    """Per-frequency verdicts: is the best gradient variance at least
    n^-threshold_exponent?  Falls back to the depth-independent lower-bound
    certificate when the exact sum is over cap."""
    threshold = float(gen_set.n) ** (-threshold_exponent)
    verdicts = []
    for a in frequencies:
        report = critical_rank(gen_set, a)
        if report.subset_size == 0:
            verdicts.append(
                TrainabilityVerdict(a, False, None, 0.0, threshold, "exact")
            )
            continue
        if scheme.kind == "uniform":
            value = 2.0 ** (2 - report.rank)
            verdicts.append(
                TrainabilityVerdict(
                    a, value >= threshold, report.indices[0], value, threshold, "exact"
                )
            )
            continue
        try:
            per_pos = _per_position_grad_vars(gen_set, report, scheme, cap)
            best = int(np.argmax(per_pos))
            verdicts.append(
                TrainabilityVerdict(
                    a,
                    float(per_pos[best]) >= threshold,
                    report.indices[best],
                    float(per_pos[best]),
                    threshold,
                    "exact",
                )
            )
        except CapacityError:
            mu, nu, _ = init_moments(scheme)
            bound = 4.0 * mu * nu ** (report.subset_size - 1)
            if bound >= threshold:
                verdicts.append(
                    TrainabilityVerdict(
                        a, True, report.indices[0], bound, threshold, "lower-bound"
                    )
                )
            else:
                raise CapacityError(
                    f"frequency {a}: exact sum over cap and the lower-bound "
                    f"certificate {bound:g} is below the threshold {threshold:g}"
                )
    return verdicts


# ---------------------------------------------------------------------------
# four-copy term diagnostic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FourCopyReport:
    empirical: Estimate
    displayed_value: float
    overlap_size: int


def four_copy_diagnostic(
    gen_set: GeneratorSet,
    a: BitVec,
    b: BitVec,
    ell: int,
    draws: int = 20_000,
    seed: int = 0,
    cap: int = DEFAULT_CAP,
) -> FourCopyReport:
    """Estimate E[C_a C_b dC_a dC_b] under uniform init and report it next to
    the 2^(4 - 3n - overlap) display (validity not asserted; diagnostic only)."""
    n = gen_set.n
    overlap = sum(1 for s in gen_set.generators if s.dot(a) and s.dot(b))
    rng = substream(seed, "four-copy")
    thetas = sample_thetas(InitScheme.uniform(), gen_set.num_generators, draws, rng)
    values = (
        exact_char_batch(gen_set, thetas, a, cap)
        * exact_char_batch(gen_set, thetas, b, cap)
        * exact_char_grad_batch(gen_set, thetas, a, ell, cap)
        * exact_char_grad_batch(gen_set, thetas, b, ell, cap)
    )
    displayed = 2.0 ** (4 - 3 * n - overlap)
    return FourCopyReport(Estimate.from_samples(values), displayed, overlap)
