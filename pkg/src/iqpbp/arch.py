"""Generator-set construction for the built-in circuit architectures, plus
the anticommuting-subset and critical-rank queries."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from . import gf2
from .errors import DimensionError
from .gf2 import BitVec
from .streams import counter_stream


@dataclass(frozen=True)
class GeneratorSet:
    """Ordered multiset of n-bit generators; index ell (1-based) owns angle ell."""

    n: int
    generators: tuple[BitVec, ...]
    label: str = ""

    def __post_init__(self):
        if self.n < 1:
            raise DimensionError(f"qubit count must be >= 1, got {self.n}")
        for g in self.generators:
            if g.n != self.n:
                raise DimensionError("generator length differs from qubit count")

    @property
    def num_generators(self) -> int:
        return len(self.generators)

    def masks(self) -> list[int]:
        return [g.bits for g in self.generators]


@dataclass(frozen=True)
class RankReport:
    """Anticommuting subset of a frequency: size, GF(2) rank, and positions."""

    frequency: BitVec
    subset_size: int
    rank: int
    indices: tuple[int, ...] = field(repr=False)  # 1-based generator positions

    def __post_init__(self):
        if self.subset_size >= 1:
            assert self.rank >= 1


def _pairs_lex(n: int):
    for i in range(n):
        for j in range(i + 1, n):
            yield i, j


def product(n: int) -> GeneratorSet:
    """All single-qubit generators and nothing else."""
    if n < 1:
        raise DimensionError(f"qubit count must be >= 1, got {n}")
    gens = tuple(BitVec.basis(n, k) for k in range(n))
    return GeneratorSet(n, gens, f"product:{n}")


def lattice(rows: int, cols: int) -> GeneratorSet:
    """Open-boundary rectangular grid: singles plus nearest-neighbor pairs.

    Vertex (i, j) maps to qubit i*cols + j (row-major).
    """
    if rows < 1 or cols < 1:
        raise DimensionError("lattice dimensions must be >= 1")
    n = rows * cols
    gens = [BitVec.basis(n, k) for k in range(n)]
    edges = []
    for i in range(rows):
        for j in range(cols):
            v = i * cols + j
            if j + 1 < cols:
                edges.append((v, v + 1))
            if i + 1 < rows:
                edges.append((v, v + cols))
    for u, v in sorted(edges):
        gens.append(BitVec.basis(n, u) ^ BitVec.basis(n, v))
    return GeneratorSet(n, tuple(gens), f"lattice:{rows}x{cols}")


def erdos_renyi(n: int, c: float, seed: int) -> GeneratorSet:
    """Singles plus a random pair set: each pair kept with p = c*ln(n)/n.

    One Bernoulli draw per lexicographic pair from a counter-based stream,
    so (n, c, seed) reproduces the same graph on every platform.  p is
    clamped to [0, 1]; self-loops are never generated.
    """
    if n < 2:
        raise DimensionError(f"Erdos-Renyi needs n >= 2, got {n}")
    if c <= 0:
        raise ValueError(f"edge-density constant must be > 0, got {c}")
    p = min(1.0, c * math.log(n) / n)
    gens = [BitVec.basis(n, k) for k in range(n)]
    draws = counter_stream(seed).random(n * (n - 1) // 2)
    for (i, j), u in zip(_pairs_lex(n), draws):
        if u < p:
            gens.append(BitVec.basis(n, i) ^ BitVec.basis(n, j))
    return GeneratorSet(n, tuple(gens), f"er:{n}:{c:g}:{seed}")


def complete(n: int) -> GeneratorSet:
    """All single-qubit and all two-qubit generators."""
    if n < 1:
        raise DimensionError(f"qubit count must be >= 1, got {n}")
    gens = [BitVec.basis(n, k) for k in range(n)]
    for i, j in _pairs_lex(n):
        gens.append(BitVec.basis(n, i) ^ BitVec.basis(n, j))
    return GeneratorSet(n, tuple(gens), f"complete:{n}")


def anticommuting_subset(gen_set: GeneratorSet, a: BitVec) -> list[int]:
    """1-based positions ell with odd parity between generator ell and a."""
    if a.n != gen_set.n:
        raise DimensionError(f"frequency length {a.n} != qubit count {gen_set.n}")
    return [j + 1 for j, s in enumerate(gen_set.generators) if s.dot(a)]


def critical_rank(gen_set: GeneratorSet, a: BitVec) -> RankReport:
    """Rank of the anticommuting generator span; drives all variance scalings."""
    indices = anticommuting_subset(gen_set, a)
    subset = [gen_set.generators[j - 1] for j in indices]
    return RankReport(
        frequency=a,
        subset_size=len(subset),
        rank=gf2.rank(subset),
        indices=tuple(indices),
    )


# ---------------------------------------------------------------------------
# architecture spec strings and generator files
# ---------------------------------------------------------------------------

def load_generator_file(path: str) -> GeneratorSet:
    """Read {"n": int, "generators": ["0/1 string", ...]} (coordinate 0 first)."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    n = int(data["n"])
    gens = []
    for text in data["generators"]:
        v = BitVec.from_string(text)
        if v.n != n:
            raise DimensionError(f"generator {text!r} has length {v.n}, expected {n}")
        gens.append(v)
    return GeneratorSet(n, tuple(gens), f"file:{path}")


def save_generator_file(gen_set: GeneratorSet, path: str) -> None:
    data = {"n": gen_set.n, "generators": [str(g) for g in gen_set.generators]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")


def parse_architecture(spec: str) -> GeneratorSet:
    """Parse product:<n> | lattice:<r>x<c> | er:<n>:<c>:<seed> | complete:<n> | file:<path>."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "product":
            return product(int(rest))
        if kind == "lattice":
            r, c = rest.split("x")
            return lattice(int(r), int(c))
        if kind == "er":
            n, c, seed = rest.split(":")
            return erdos_renyi(int(n), float(c), int(seed))
        if kind == "complete":
            return complete(int(rest))
        if kind == "file":
            return load_generator_file(rest)
    except (ValueError, KeyError) as exc:
        if isinstance(exc, DimensionError):
            raise
        raise ValueError(f"malformed architecture spec {spec!r}: {exc}") from exc
    raise ValueError(f"unknown architecture kind {kind!r} in {spec!r}")


def architectures_for_scan(family: str, n: int, c: float = 3.0, seed: int = 0) -> GeneratorSet:
    """Instantiate a scan family member at a given qubit count."""
    if family == "product":
        return product(n)
    if family == "complete":
        return complete(n)
    if family == "er":
        return erdos_renyi(n, c, seed)
    if family.startswith("lattice"):
        _, _, rows_text = family.partition(":")
        rows = int(rows_text) if rows_text else 2
        if n % rows:
            raise ValueError(f"n={n} not divisible by lattice rows={rows}")
        return lattice(rows, n // rows)
    raise ValueError(f"unknown scan family {family!r}")
