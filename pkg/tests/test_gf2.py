import itertools

import numpy as np
import pytest

from iqpbp.errors import CapacityError, DimensionError
from iqpbp.gf2 import BitVec, GF2Basis, dot, nullspace_enumerate, rank, rowspace_enumerate


def bv(text: str) -> BitVec:
    return BitVec.from_string(text)


class TestBitVec:
    def test_string_round_trip(self):
        for text in ("1", "0", "110", "010011", "0" * 40 + "1"):
            assert str(bv(text)) == text

    def test_coordinate_order(self):
        v = bv("110")
        assert (v[0], v[1], v[2]) == (1, 1, 0)
        assert v.bits == 0b011

    def test_weight_and_zero(self):
        assert bv("0101").weight == 2
        assert BitVec.zeros(5).is_zero

    def test_basis(self):
        assert str(BitVec.basis(4, 2)) == "0010"

    def test_xor_requires_equal_length(self):
        with pytest.raises(DimensionError):
            bv("10") ^ bv("100")

    def test_out_of_range_bits_rejected(self):
        with pytest.raises(ValueError):
            BitVec(2, 0b100)

    def test_immutable(self):
        v = bv("10")
        with pytest.raises(AttributeError):
            v.bits = 3

    def test_hashable(self):
        assert len({bv("10"), bv("10"), bv("01")}) == 2


class TestDot:
    def test_examples(self):
        assert dot(bv("111"), bv("110")) == 0
        assert dot(BitVec.zeros(7), bv("1011011")) == 0
        assert dot(bv("101"), bv("100")) == 1

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            dot(bv("10"), bv("100"))


class TestRank:
    def test_standard_basis(self):
        assert rank([bv("100"), bv("010"), bv("001")]) == 3

    def test_dependent_triple(self):
        # third vector is the XOR of the first two
        assert rank([bv("110"), bv("011"), bv("101")]) == 2

    def test_zero_vector(self):
        assert rank([BitVec.zeros(3)]) == 0

    def test_empty(self):
        assert rank([]) == 0

    def test_invariances(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = int(rng.integers(2, 12))
            vecs = [BitVec(n, int(rng.integers(0, 1 << n))) for _ in range(int(rng.integers(2, 8)))]
            r = rank(vecs)
            perm = list(rng.permutation(len(vecs)))
            assert rank([vecs[i] for i in perm]) == r
            assert rank(vecs + [vecs[0]]) == r
            replaced = list(vecs)
            replaced[0] = vecs[0] ^ vecs[-1]  # XOR with a different row
            assert rank(replaced) == r


def brute_force_null_subsets(columns):
    m = len(columns)
    out = set()
    for mask in range(1 << m):
        acc = 0
        for j in range(m):
            if (mask >> j) & 1:
                acc ^= columns[j].bits
        if acc == 0:
            out.add(mask)
    return out


class TestNullspaceEnumerate:
    def test_full_rank_only_empty(self):
        result = nullspace_enumerate([bv("100"), bv("010"), bv("001")])
        assert [r.bits for r in result] == [0]

    def test_duplicate_columns(self):
        result = nullspace_enumerate([bv("110"), bv("110")])
        assert {r.bits for r in result} == {0, 0b11}
        assert brute_force_null_subsets([bv("110")] * 2) == {0, 0b11}

    def test_three_columns(self):
        cols = [bv("100"), bv("010"), bv("110")]
        result = nullspace_enumerate(cols)
        assert {r.bits for r in result} == brute_force_null_subsets(cols) == {0, 0b111}

    def test_matches_brute_force_random(self):
        rng = np.random.default_rng(3)
        for _ in range(40):
            n = int(rng.integers(1, 6))
            m = int(rng.integers(0, 9))
            cols = [BitVec(n, int(rng.integers(0, 1 << n))) for _ in range(m)]
            got = {r.bits for r in nullspace_enumerate(cols)}
            assert got == brute_force_null_subsets(cols)

    def test_rank_nullity(self):
        rng = np.random.default_rng(4)
        for _ in range(40):
            n = int(rng.integers(1, 8))
            m = int(rng.integers(0, 12))
            cols = [BitVec(n, int(rng.integers(0, 1 << n))) for _ in range(m)]
            assert len(nullspace_enumerate(cols)) * (1 << rank(cols)) == 1 << m

    def test_capacity_error_names_size(self):
        cols = [BitVec.zeros(2)] * 8
        with pytest.raises(CapacityError, match="2\\^8 = 256"):
            nullspace_enumerate(cols, cap=7)

    def test_first_element_is_empty_set(self):
        cols = [bv("10"), bv("10"), bv("01")]
        assert nullspace_enumerate(cols)[0].bits == 0


class TestRowspaceEnumerate:
    def test_independent_rows(self):
        got = {r.bits for r in rowspace_enumerate([bv("100"), bv("010")])}
        assert got == {0b00, 0b01, 0b10, 0b11}

    def test_duplicate_rows(self):
        got = [str(r) for r in rowspace_enumerate([bv("110"), bv("110")])]
        assert sorted(got) == ["00", "11"]

    def test_empty_rows(self):
        got = list(rowspace_enumerate([]))
        assert len(got) == 1 and got[0].n == 0

    def test_matches_brute_force(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            n = int(rng.integers(1, 10))
            m = int(rng.integers(1, 7))
            rows = [BitVec(n, int(rng.integers(0, 1 << n))) for _ in range(m)]
            expected = set()
            for z in range(1 << n):
                zv = BitVec(n, z)
                pattern = 0
                for j, row in enumerate(rows):
                    if dot(row, zv):
                        pattern |= 1 << j
                expected.add(pattern)
            got = [r.bits for r in rowspace_enumerate(rows)]
            assert len(got) == len(set(got)) == 1 << rank(rows)
            assert set(got) == expected

    def test_capacity(self):
        rows = [BitVec.basis(8, k) for k in range(8)]
        with pytest.raises(CapacityError):
            list(rowspace_enumerate(rows, cap=7))


class TestGF2Basis:
    def test_reduced_row_echelon(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            n = int(rng.integers(1, 12))
            vecs = [BitVec(n, int(rng.integers(0, 1 << n))) for _ in range(int(rng.integers(0, 8)))]
            basis = GF2Basis.from_vectors(n, vecs)
            assert basis.rank == rank(vecs)
            pivots = [(r.bits & -r.bits).bit_length() - 1 for r in basis.rows]
            assert len(set(pivots)) == len(pivots)
            for i, row in enumerate(basis.rows):
                for j, p in enumerate(pivots):
                    if i != j:
                        assert (row.bits >> p) & 1 == 0

    def test_contains(self):
        basis = GF2Basis.from_vectors(3, [bv("110"), bv("011")])
        assert basis.contains(bv("101"))
        assert not basis.contains(bv("100"))


def test_span_membership_brute_force():
    # every enumerated subset XORs to zero, every omitted one does not
    cols = [bv("1100"), bv("0110"), bv("1010"), bv("0001")]
    valid = {r.bits for r in nullspace_enumerate(cols)}
    for mask in range(1 << len(cols)):
        acc = 0
        for j in range(len(cols)):
            if (mask >> j) & 1:
                acc ^= cols[j].bits
        assert (acc == 0) == (mask in valid)


def test_exhaustive_small_dimensions():
    # rank-nullity over every 2-column set in F_2^2
    for bits in itertools.product(range(4), repeat=2):
        cols = [BitVec(2, b) for b in bits]
        assert len(nullspace_enumerate(cols)) * (1 << rank(cols)) == 4
