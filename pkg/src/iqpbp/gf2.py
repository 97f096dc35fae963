"""Bit-packed GF(2) vectors and the linear algebra the rank analysis rests on.

Convention: coordinate k of a vector is qubit k and is stored in bit k of a
Python int, so coordinate 0 is the least significant bit.  Textual forms
write coordinate 0 first ("110" has coordinates 1,1,0).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .errors import CapacityError, DimensionError

DEFAULT_CAP = 24  # enumerations are limited to 2**DEFAULT_CAP elements


class BitVec:
    """Immutable n-bit vector over GF(2)."""

    __slots__ = ("n", "bits")

    def __init__(self, n: int, bits: int = 0):
        if n < 0:
            raise DimensionError(f"bit length must be >= 0, got {n}")
        if bits < 0 or bits >> n:
            raise ValueError(f"value 0x{bits:x} does not fit in {n} bits")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "bits", bits)

    def __setattr__(self, name, value):
        raise AttributeError("BitVec is immutable")

    @classmethod
    def zeros(cls, n: int) -> "BitVec":
        return cls(n, 0)

    @classmethod
    def basis(cls, n: int, k: int) -> "BitVec":
        """Unit vector e_k (coordinate k set)."""
        if not 0 <= k < n:
            raise DimensionError(f"coordinate {k} out of range for n={n}")
        return cls(n, 1 << k)

    @classmethod
    def from_string(cls, text: str) -> "BitVec":
        """Parse a 0/1 string written coordinate-0-first."""
        if not text or any(c not in "01" for c in text):
            raise ValueError(f"not a 0/1 string: {text!r}")
        bits = 0
        for k, c in enumerate(text):
            if c == "1":
                bits |= 1 << k
        return cls(len(text), bits)

    @classmethod
    def from_indices(cls, n: int, indices: Iterable[int]) -> "BitVec":
        bits = 0
        for k in indices:
            if not 0 <= k < n:
                raise DimensionError(f"coordinate {k} out of range for n={n}")
            bits |= 1 << k
        return cls(n, bits)

    @property
    def weight(self) -> int:
        """Hamming weight."""
        return self.bits.bit_count()

    @property
    def is_zero(self) -> bool:
        return self.bits == 0

    def __getitem__(self, k: int) -> int:
        if not 0 <= k < self.n:
            raise IndexError(k)
        return (self.bits >> k) & 1

    def __xor__(self, other: "BitVec") -> "BitVec":
        if self.n != other.n:
            raise DimensionError(f"length mismatch: {self.n} vs {other.n}")
        return BitVec(self.n, self.bits ^ other.bits)

    def dot(self, other: "BitVec") -> int:
        """Parity (mod 2) of the coordinate-wise AND."""
        if self.n != other.n:
            raise DimensionError(f"length mismatch: {self.n} vs {other.n}")
        return (self.bits & other.bits).bit_count() & 1

    def __eq__(self, other) -> bool:
        return isinstance(other, BitVec) and self.n == other.n and self.bits == other.bits

    def __hash__(self) -> int:
        return hash((self.n, self.bits))

    def __len__(self) -> int:
        return self.n

    def __str__(self) -> str:
        return "".join("1" if (self.bits >> k) & 1 else "0" for k in range(self.n))

    def __repr__(self) -> str:
        return f"BitVec({str(self)!r})"


def dot(u: BitVec, v: BitVec) -> int:
    """Parity of the overlap of u and v."""
    return u.dot(v)


def _check_common_length(vectors: Sequence[BitVec]) -> int:
    n = vectors[0].n
    for v in vectors:
        if v.n != n:
            raise DimensionError("vectors have mixed lengths")
    return n


def _eliminate(pivots: dict[int, int], v: int) -> int:
    """Reduce v against pivot rows keyed by lowest set bit; return residue."""
    while v:
        b = (v & -v).bit_length() - 1
        piv = pivots.get(b)
        if piv is None:
            return v
        v ^= piv
    return 0


def rank(vectors: Sequence[BitVec]) -> int:
    """GF(2) dimension of the span; duplicates and zeros contribute nothing."""
    if not vectors:
        return 0
    _check_common_length(vectors)
    pivots: dict[int, int] = {}
    r = 0
    for v in vectors:
        residue = _eliminate(pivots, v.bits)
        if residue:
            pivots[(residue & -residue).bit_length() - 1] = residue
            r += 1
    return r


@dataclass(frozen=True)
class GF2Basis:
    """Reduced row-echelon basis: each pivot bit is zero in all other rows."""

    n: int
    rows: tuple[BitVec, ...]

    @classmethod
    def from_vectors(cls, n: int, vectors: Iterable[BitVec]) -> "GF2Basis":
        pivots: dict[int, int] = {}
        for v in vectors:
            if v.n != n:
                raise DimensionError("vector length differs from ambient dimension")
            residue = _eliminate(pivots, v.bits)
            if residue:
                pivots[(residue & -residue).bit_length() - 1] = residue
        # back-substitute so every pivot column is unique to its row
        for b in sorted(pivots, reverse=True):
            for c in pivots:
                if c != b and (pivots[c] >> b) & 1:
                    pivots[c] ^= pivots[b]
        rows = tuple(BitVec(n, pivots[b]) for b in sorted(pivots))
        return cls(n, rows)

    @property
    def rank(self) -> int:
        return len(self.rows)

    def contains(self, v: BitVec) -> bool:
        if v.n != self.n:
            raise DimensionError("length mismatch")
        pivots = {(r.bits & -r.bits).bit_length() - 1: r.bits for r in self.rows}
        return _eliminate(pivots, v.bits) == 0


def _null_basis(columns: Sequence[BitVec]) -> list[int]:
    """Combination masks (over positions 0..m-1) spanning the null space of
    the matrix whose columns are the given vectors."""
    pivots: dict[int, tuple[int, int]] = {}
    null_masks: list[int] = []
    for j, col in enumerate(columns):
        v = col.bits
        combo = 1 << j
        while v:
            b = (v & -v).bit_length() - 1
            piv = pivots.get(b)
            if piv is None:
                pivots[b] = (v, combo)
                break
            v ^= piv[0]
            combo ^= piv[1]
        else:
            null_masks.append(combo)
    return null_masks


def _gray_span(basis: list[int]) -> Iterator[int]:
    """All XOR combinations of basis masks, in Gray-code order over coefficients."""
    y = 0
    yield y
    for i in range(1, 1 << len(basis)):
        y ^= basis[((i & -i).bit_length() - 1)]
        yield y


def nullspace_enumerate(columns: Sequence[BitVec], cap: int = DEFAULT_CAP) -> list[BitVec]:
    """All subsets of column positions whose columns XOR to zero.

    Returns indicator vectors over F_2^m (m = number of columns), the empty
    subset included, in Gray-code order over the null-space basis.
    """
    m = len(columns)
    if m:
        _check_common_length(columns)
    basis = _null_basis(columns)
    nullity = len(basis)
    if nullity > cap:
        raise CapacityError(
            f"null space requires enumerating 2^{nullity} = {1 << nullity} "
            f"subsets; cap is 2^{cap}"
        )
    return [BitVec(m, y) for y in _gray_span(basis)]


def rowspace_enumerate(rows: Sequence[BitVec], cap: int = DEFAULT_CAP) -> Iterator[BitVec]:
    """All distinct images (row_j . z)_j in F_2^m of the map z -> parities.

    Yields exactly 2^rank(rows) vectors, each once, in Gray-code order.
    """
    m = len(rows)
    if m == 0:
        yield BitVec(0, 0)
        return
    n = _check_common_length(rows)
    # image is spanned by the per-coordinate columns u_k = (rows[j][k])_j
    pivots: dict[int, int] = {}
    basis: list[int] = []
    for k in range(n):
        u = 0
        for j, row in enumerate(rows):
            if (row.bits >> k) & 1:
                u |= 1 << j
        residue = _eliminate(pivots, u)
        if residue:
            pivots[(residue & -residue).bit_length() - 1] = residue
            basis.append(residue)
    r = len(basis)
    if r > cap:
        raise CapacityError(
            f"row space has 2^{r} = {1 << r} sign patterns; cap is 2^{cap}"
        )
    for y in _gray_span(basis):
        yield BitVec(m, y)
