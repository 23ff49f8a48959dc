import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tensorscale import (
    SparseTensor,
    SubtensorId,
    apply_family_scaling,
    enumerate_families,
    fold_index,
    global_support,
    member_subtensors,
    phi,
    support_set,
    unfold_index,
)
from tensorscale.errors import (
    InvalidIndexError,
    InvalidRankError,
    InvalidScalingError,
    MalformedTensorError,
)
from tensorscale.instances import random_sparse_tensor


@st.composite
def shapes(draw, min_d=2, max_d=4, max_n=4):
    d = draw(st.integers(min_d, max_d))
    return tuple(draw(st.lists(st.integers(1, max_n), min_size=d, max_size=d)))


@st.composite
def shape_and_rank(draw):
    shape = draw(shapes())
    k = draw(st.integers(1, len(shape) - 1))
    return shape, k


@st.composite
def sparse_tensors(draw, shape):
    cells = list(itertools.product(*(range(1, n + 1) for n in shape)))
    keep = draw(st.lists(st.booleans(), min_size=len(cells), max_size=len(cells)))
    vals = draw(
        st.lists(
            st.floats(0.01, 100.0) | st.floats(-100.0, -0.01),
            min_size=len(cells),
            max_size=len(cells),
        )
    )
    entries = {c: v for c, k, v in zip(cells, keep, vals) if k}
    return SparseTensor.from_entries(shape, entries)


def brute_index_set(shape, family, s):
    """Every cell whose fixed coordinates linearize to ``s`` (exhaustive scan)."""
    out = set()
    for alpha in itertools.product(*(range(1, n + 1) for n in shape)):
        fixed = [alpha[j - 1] for j in family.fixed_dims]
        lin, stride = 1, 1
        for c, j in zip(fixed, family.fixed_dims):
            lin += (c - 1) * stride
            stride *= shape[j - 1]
        if lin == s:
            out.add(alpha)
    return out


class TestEnumerateFamilies:
    def test_matrix_rows_and_columns(self):
        fams = enumerate_families((3, 5), 1)
        assert [f.spanned_dims for f in fams] == [(1,), (2,)]
        # spanning dim 1 means fixing the column: one subtensor per column
        assert [f.cardinality for f in fams] == [5, 3]

    def test_three_way_slices(self):
        fams = enumerate_families((3, 4, 2), 2)
        assert [f.spanned_dims for f in fams] == [(1, 2), (1, 3), (2, 3)]
        assert [f.index for f in fams] == [1, 2, 3]
        assert [f.cardinality for f in fams] == [2, 4, 3]

    def test_three_way_fibers(self):
        fams = enumerate_families((2, 2, 2), 1)
        assert [f.spanned_dims for f in fams] == [(1,), (2,), (3,)]
        assert [f.fixed_dims for f in fams] == [(2, 3), (1, 3), (1, 2)]

    @pytest.mark.parametrize("k", [0, 3, -1])
    def test_rank_out_of_range(self, k):
        with pytest.raises(InvalidRankError):
            enumerate_families((2, 2, 2), k)

    def test_order_above_eight_rejected(self):
        with pytest.raises(MalformedTensorError):
            enumerate_families((1,) * 9, 1)

    @given(shape_and_rank())
    def test_count_and_partition(self, sk):
        shape, k = sk
        fams = enumerate_families(shape, k)
        assert len(fams) == math.comb(len(shape), k)
        grid = set(itertools.product(*(range(1, n + 1) for n in shape)))
        for f in fams:
            assert set(f.spanned_dims) | set(f.fixed_dims) == set(range(1, len(shape) + 1))
            assert not set(f.spanned_dims) & set(f.fixed_dims)
            seen = set()
            for s in range(1, f.cardinality + 1):
                cells = set(f.index_set(s))
                assert cells == brute_index_set(shape, f, s)
                assert not cells & seen
                seen |= cells
            assert seen == grid


class TestUnfold:
    def test_origin(self):
        assert unfold_index((3, 4, 2), (1, 1, 1)) == 1

    def test_last(self):
        assert unfold_index((3, 4, 2), (3, 4, 2)) == 24

    def test_formula_value(self):
        assert unfold_index((3, 4, 2), (2, 3, 2)) == 2 + 2 * 3 + 1 * 12 == 20

    @pytest.mark.parametrize("alpha", [(0, 1, 1), (4, 1, 1), (1, 1), (1, 1, 3)])
    def test_out_of_range(self, alpha):
        with pytest.raises(InvalidIndexError):
            unfold_index((3, 4, 2), alpha)

    @given(shapes(min_d=1, max_d=5, max_n=5))
    def test_bijection(self, shape):
        total = math.prod(shape)
        seen = [unfold_index(shape, a) for a in itertools.product(*(range(1, n + 1) for n in shape))]
        assert sorted(seen) == list(range(1, total + 1))
        for j in range(1, total + 1):
            assert unfold_index(shape, fold_index(shape, j)) == j

    @given(shapes(min_d=1, max_d=4, max_n=6), st.data())
    def test_strictly_increasing_per_coordinate(self, shape, data):
        alpha = [data.draw(st.integers(1, n)) for n in shape]
        for j, n in enumerate(shape):
            if alpha[j] < n:
                bumped = list(alpha)
                bumped[j] += 1
                assert unfold_index(shape, bumped) > unfold_index(shape, alpha)

    def test_large_shape_round_trip(self):
        shape = (100, 100, 100)
        rng = np.random.default_rng(0)
        for j in rng.integers(1, 10**6 + 1, size=200):
            assert unfold_index(shape, fold_index(shape, int(j))) == j


class TestSparseTensor:
    def test_from_dense_drops_zeros(self):
        A = SparseTensor.from_dense([[1.0, 0.0], [0.0, -2.0]])
        assert A.nnz == 2
        assert A[(2, 2)] == -2.0 and A[(1, 2)] == 0.0

    def test_explicit_zero_rejected(self):
        with pytest.raises(MalformedTensorError):
            SparseTensor((2, 2), [[1, 1]], [0.0])

    def test_duplicates_rejected(self):
        with pytest.raises(MalformedTensorError, match="duplicate"):
            SparseTensor((2, 2), [[1, 1], [1, 1]], [1.0, 2.0])

    def test_out_of_range_rejected(self):
        with pytest.raises(InvalidIndexError):
            SparseTensor((2, 2), [[3, 1]], [1.0])

    def test_immutable(self):
        A = SparseTensor.from_dense([[1.0, 2.0]])
        with pytest.raises(ValueError):
            A.values[0] = 5.0

    def test_entries_sorted_by_unfolded_position(self, rng):
        A = random_sparse_tensor(rng, (3, 4, 5), 0.4)
        assert np.all(np.diff(A.positions) > 0)


class TestMembership:
    def test_matrix_row_and_column(self):
        A = SparseTensor.from_dense(np.ones((3, 4)))
        ids = member_subtensors(A, 1, (2, 3))
        # family 1 spans dim 1 (a column, fixed col 3); family 2 spans dim 2 (a row, fixed row 2)
        assert ids == [SubtensorId(3, 1), SubtensorId(2, 2)]

    def test_example1_frontal_slice(self, example1):
        ids = member_subtensors(example1, 2, (1, 1, 2))
        assert ids[0] == SubtensorId(2, 1)

    def test_fibers(self):
        A = SparseTensor.from_dense(np.ones((2, 2, 2)))
        ids = member_subtensors(A, 1, (1, 2, 1))
        # fixed dims (2,3)->(2,1): s=2; (1,3)->(1,1): s=1; (1,2)->(1,2): s=3
        assert ids == [SubtensorId(2, 1), SubtensorId(1, 2), SubtensorId(3, 3)]

    def test_out_of_range(self, example1):
        with pytest.raises(InvalidIndexError):
            member_subtensors(example1, 2, (4, 1, 1))

    @given(shape_and_rank(), st.data())
    def test_membership_consistency(self, sk, data):
        shape, k = sk
        A = data.draw(sparse_tensors(shape))
        for f in enumerate_families(shape, k):
            for s in range(1, f.cardinality + 1):
                cells = set(f.index_set(s))
                for alpha in cells:
                    assert SubtensorId(s, f.index) in member_subtensors(A, k, alpha)
                sup = support_set(A, k, SubtensorId(s, f.index))
                assert sup.positions == global_support(A) & cells


class TestSupport:
    def test_empty_subtensor(self):
        A = SparseTensor.from_dense([[1.0, 0.0], [2.0, 0.0]])
        assert len(support_set(A, 1, SubtensorId(2, 1))) == 0

    def test_example1_first_slice_dense(self, example1):
        sup = support_set(example1, 2, SubtensorId(1, 1))
        assert len(sup) == 12
        assert sup.positions == {(i, j, 1) for i in range(1, 4) for j in range(1, 5)}

    def test_random_against_exhaustive_scan(self, rng):
        dense = np.zeros(27)
        dense[rng.choice(27, 10, replace=False)] = rng.uniform(1, 2, 10)
        dense = dense.reshape(3, 3, 3)
        A = SparseTensor.from_dense(dense)
        for k in (1, 2):
            for f in enumerate_families(A.shape, k):
                counts = phi(A, f)
                union = set()
                for s in range(1, f.cardinality + 1):
                    scan = {a for a in brute_index_set(A.shape, f, s) if dense[tuple(x - 1 for x in a)] != 0}
                    sup = support_set(A, k, SubtensorId(s, f.index))
                    assert sup.positions == scan
                    assert counts[s - 1] == len(scan)
                    union |= scan
                assert union == global_support(A)

    def test_invalid_id(self, example1):
        with pytest.raises(InvalidIndexError):
            support_set(example1, 2, SubtensorId(3, 1))
        with pytest.raises(InvalidIndexError):
            support_set(example1, 2, SubtensorId(1, 4))


class TestGlobalSupport:
    def test_empty(self):
        assert global_support(SparseTensor((2, 3), np.zeros((0, 2)), [])) == set()

    def test_example1_full(self, example1):
        assert len(global_support(example1)) == 24

    def test_single(self):
        assert global_support(SparseTensor((2, 2, 2), [[1, 1, 1]], [3.0])) == {(1, 1, 1)}


class TestApplyFamilyScaling:
    def test_example1_slices(self, example1):
        S = apply_family_scaling(example1, 2, 1, [2.0, 3.0]).to_dense()
        A = example1.to_dense()
        assert np.array_equal(S[:, :, 0], 2.0 * A[:, :, 0])
        assert np.array_equal(S[:, :, 1], 3.0 * A[:, :, 1])

    def test_identity(self, example1):
        assert apply_family_scaling(example1, 2, 3, np.ones(3)) == example1

    def test_length_mismatch(self, example1):
        with pytest.raises(InvalidScalingError):
            apply_family_scaling(example1, 2, 1, [1.0, 2.0, 3.0])

    def test_zero_factor(self, example1):
        with pytest.raises(InvalidScalingError):
            apply_family_scaling(example1, 2, 1, [1.0, 0.0])

    def test_commutes_on_matrix(self, rng):
        A = SparseTensor.from_dense(rng.uniform(0.5, 2, (2, 3)))
        r, c = rng.uniform(0.5, 2, 3), rng.uniform(0.5, 2, 2)
        one = apply_family_scaling(apply_family_scaling(A, 1, 1, r), 1, 2, c)
        two = apply_family_scaling(apply_family_scaling(A, 1, 2, c), 1, 1, r)
        np.testing.assert_allclose(one.values, two.values, rtol=4e-16)

    @given(shape_and_rank(), st.data())
    def test_preserves_pattern_and_commutes(self, sk, data):
        shape, k = sk
        A = data.draw(sparse_tensors(shape))
        fams = enumerate_families(shape, k)
        i1 = data.draw(st.sampled_from(fams))
        i2 = data.draw(st.sampled_from(fams))
        factor = st.floats(0.1, 10.0) | st.floats(-10.0, -0.1)
        M1 = data.draw(st.lists(factor, min_size=i1.cardinality, max_size=i1.cardinality))
        M2 = data.draw(st.lists(factor, min_size=i2.cardinality, max_size=i2.cardinality))
        one = apply_family_scaling(apply_family_scaling(A, k, i1.index, M1), k, i2.index, M2)
        two = apply_family_scaling(apply_family_scaling(A, k, i2.index, M2), k, i1.index, M1)
        assert one.same_pattern(A) and two.same_pattern(A)
        np.testing.assert_allclose(one.values, two.values, rtol=1e-15)
