"""Sparse d-way tensors and the index machinery for k-dimensional subtensors.

All indices exposed by this module are 1-based. A tensor of order ``d`` is
split, for a rank ``k`` with ``1 <= k < d``, into ``C(d, k)`` partition
families. Family ``i`` spans a k-subset of the dimensions; each of its
subtensors is obtained by fixing the remaining ``d - k`` coordinates, and the
subtensors of one family tile the full index grid without overlap.

Subtensor numbering inside a family is the mixed-radix linearization of the
fixed coordinates, lowest fixed dimension varying fastest. This mirrors the
unfolding map :func:`unfold_index` restricted to the fixed dimensions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import (
    InvalidIndexError,
    InvalidRankError,
    InvalidScalingError,
    MalformedTensorError,
)

MAX_ORDER = 8

MultiIndex = tuple[int, ...]


class SubtensorId(NamedTuple):
    """Label ``(s, i)`` of subtensor ``s`` in family ``i`` (both 1-based)."""

    s: int
    family: int


def _strides(shape: Sequence[int]) -> np.ndarray:
    # column-major: first dimension varies fastest
    strides = np.ones(len(shape), dtype=np.int64)
    for j in range(1, len(shape)):
        strides[j] = strides[j - 1] * shape[j - 1]
    return strides


def _check_shape(shape: Sequence[int]) -> tuple[int, ...]:
    shape = tuple(int(n) for n in shape)
    if not shape:
        raise MalformedTensorError("tensor order must be at least 1")
    if len(shape) > MAX_ORDER:
        raise MalformedTensorError(f"tensor order {len(shape)} exceeds the supported maximum {MAX_ORDER}")
    if any(n < 1 for n in shape):
        raise MalformedTensorError(f"dimension sizes must be positive, got {shape}")
    return shape


def _check_index(shape: Sequence[int], alpha: Sequence[int]) -> MultiIndex:
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != len(shape):
        raise InvalidIndexError(f"index {alpha} has length {len(alpha)}, tensor order is {len(shape)}")
    for a, n in zip(alpha, shape):
        if not 1 <= a <= n:
            raise InvalidIndexError(f"index {alpha} out of range for shape {tuple(shape)}")
    return alpha


def unfold_index(shape: Sequence[int], alpha: Sequence[int]) -> int:
    """Position of ``alpha`` in the unfolded vector of a tensor of ``shape``.

    ``J(alpha) = alpha_1 + (alpha_2 - 1) n_1 + ... + (alpha_d - 1) n_1 ... n_{d-1}``

    >>> unfold_index((3, 4, 2), (2, 3, 2))
    20
    """
    alpha = _check_index(shape, alpha)
    j = 1
    stride = 1
    for a, n in zip(alpha, shape):
        j += (a - 1) * stride
        stride *= n
    return j


def fold_index(shape: Sequence[int], j: int) -> MultiIndex:
    """Inverse of :func:`unfold_index`."""
    total = math.prod(shape)
    if not 1 <= j <= total:
        raise InvalidIndexError(f"unfolded index {j} out of range [1, {total}]")
    rem = j - 1
    alpha = []
    for n in shape:
        alpha.append(rem % n + 1)
        rem //= n
    return tuple(alpha)


def unfold_indices(shape: Sequence[int], indices: np.ndarray) -> np.ndarray:
    """Vectorized :func:`unfold_index` for an ``(nnz, d)`` array of 1-based rows."""
    indices = np.asarray(indices, dtype=np.int64).reshape(-1, len(shape))
    return (indices - 1) @ _strides(shape) + 1


@dataclass(frozen=True)
class PartitionFamily:
    """One of the ``C(d, k)`` ways to tile the tensor with k-subtensors."""

    index: int
    shape: tuple[int, ...]
    spanned_dims: tuple[int, ...]
    fixed_dims: tuple[int, ...]

    @property
    def cardinality(self) -> int:
        return math.prod(self.shape[j - 1] for j in self.fixed_dims)

    @property
    def fixed_shape(self) -> tuple[int, ...]:
        return tuple(self.shape[j - 1] for j in self.fixed_dims)

    def subtensor_of(self, alpha: Sequence[int]) -> int:
        """Subtensor number ``s`` containing position ``alpha``."""
        alpha = _check_index(self.shape, alpha)
        return unfold_index(self.fixed_shape, [alpha[j - 1] for j in self.fixed_dims])

    def subtensors_of(self, indices: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`subtensor_of`; returns 1-based numbers."""
        indices = np.asarray(indices, dtype=np.int64).reshape(-1, len(self.shape))
        cols = [j - 1 for j in self.fixed_dims]
        return unfold_indices(self.fixed_shape, indices[:, cols])

    def fixed_coords(self, s: int) -> dict[int, int]:
        """Map from fixed dimension (1-based) to its coordinate in subtensor ``s``."""
        if not 1 <= s <= self.cardinality:
            raise InvalidIndexError(f"subtensor {s} out of range for family {self.index}")
        return dict(zip(self.fixed_dims, fold_index(self.fixed_shape, s)))

    def index_set(self, s: int) -> Iterator[MultiIndex]:
        """Every position (zero or not) inside subtensor ``s``."""
        fixed = self.fixed_coords(s)
        ranges = [
            (fixed[j],) if j in fixed else range(1, self.shape[j - 1] + 1)
            for j in range(1, len(self.shape) + 1)
        ]
        return itertools.product(*ranges)


def enumerate_families(shape: Sequence[int], k: int) -> list[PartitionFamily]:
    """All partition families for rank ``k``, in lexicographic order of spanned dims."""
    shape = _check_shape(shape)
    d = len(shape)
    if not 1 <= k < d:
        raise InvalidRankError(f"subtensor rank k={k} must satisfy 1 <= k < d={d}")
    families = []
    for i, spanned in enumerate(itertools.combinations(range(1, d + 1), k), start=1):
        fixed = tuple(j for j in range(1, d + 1) if j not in spanned)
        families.append(PartitionFamily(i, shape, spanned, fixed))
    return families


@dataclass(frozen=True, eq=False, init=False, repr=False)
class SparseTensor:
    """Coordinate-format sparse tensor with 1-based indices.

    Entries are kept sorted by unfolded position so iteration order is
    deterministic. Explicit zeros and duplicate coordinates are rejected.
    """

    shape: tuple[int, ...]
    indices: np.ndarray
    values: np.ndarray
    _positions: np.ndarray = field(init=False, repr=False)

    def __init__(self, shape: Sequence[int], indices, values):
        shape = _check_shape(shape)
        d = len(shape)
        indices = np.array(indices, dtype=np.int64).reshape(-1, d)
        values = np.array(values, dtype=np.float64).reshape(-1)
        if indices.shape[0] != values.shape[0]:
            raise MalformedTensorError(f"{indices.shape[0]} indices but {values.shape[0]} values")
        if values.size:
            if np.any(indices < 1) or np.any(indices > np.asarray(shape)):
                bad = indices[np.any((indices < 1) | (indices > np.asarray(shape)), axis=1)][0]
                raise InvalidIndexError(f"index {tuple(bad.tolist())} out of range for shape {shape}")
            if not np.all(np.isfinite(values)):
                raise MalformedTensorError("tensor values must be finite")
            if np.any(values == 0):
                raise MalformedTensorError("explicit zero entries are not allowed; omit them")
        positions = unfold_indices(shape, indices)
        order = np.argsort(positions, kind="stable")
        positions, indices, values = positions[order], indices[order], values[order]
        if positions.size > 1 and np.any(positions[1:] == positions[:-1]):
            dup = indices[1:][positions[1:] == positions[:-1]][0]
            raise MalformedTensorError(f"duplicate coordinate {tuple(dup.tolist())}")
        for arr in (indices, values, positions):
            arr.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_positions", positions)

    @classmethod
    def from_dense(cls, array) -> "SparseTensor":
        array = np.asarray(array, dtype=np.float64)
        nz = np.argwhere(array != 0)
        return cls(array.shape, nz + 1, array[tuple(nz.T)])

    @classmethod
    def from_entries(cls, shape: Sequence[int], entries: Mapping[Sequence[int], float]) -> "SparseTensor":
        idx = [tuple(a) for a in entries]
        return cls(shape, np.array(idx, dtype=np.int64).reshape(-1, len(shape)), list(entries.values()))

    @property
    def order(self) -> int:
        return len(self.shape)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @property
    def positions(self) -> np.ndarray:
        """Unfolded (1-based) position of every stored entry, ascending."""
        return self._positions

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        if self.nnz:
            out[tuple((self.indices - 1).T)] = self.values
        return out

    def entries(self) -> dict[MultiIndex, float]:
        return {tuple(a): float(v) for a, v in zip(self.indices.tolist(), self.values)}

    def with_values(self, values) -> "SparseTensor":
        """Same sparsity pattern, new values (in stored order)."""
        return SparseTensor(self.shape, self.indices, values)

    def same_pattern(self, other: "SparseTensor") -> bool:
        return self.shape == other.shape and np.array_equal(self.positions, other.positions)

    def __getitem__(self, alpha: Sequence[int]) -> float:
        j = unfold_index(self.shape, alpha)
        pos = np.searchsorted(self._positions, j)
        if pos < self.nnz and self._positions[pos] == j:
            return float(self.values[pos])
        return 0.0

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseTensor):
            return NotImplemented
        return self.same_pattern(other) and np.array_equal(self.values, other.values)

    def __repr__(self) -> str:
        return f"SparseTensor(shape={self.shape}, nnz={self.nnz})"


@dataclass(frozen=True)
class SupportSet:
    id: SubtensorId
    positions: frozenset[MultiIndex]

    def __len__(self) -> int:
        return len(self.positions)


def _family(shape: Sequence[int], k: int, i: int) -> PartitionFamily:
    families = enumerate_families(shape, k)
    if not 1 <= i <= len(families):
        raise InvalidIndexError(f"family index {i} out of range [1, {len(families)}]")
    return families[i - 1]


def member_subtensors(A: SparseTensor, k: int, alpha: Sequence[int]) -> list[SubtensorId]:
    """The one subtensor per family that contains position ``alpha``."""
    alpha = _check_index(A.shape, alpha)
    return [SubtensorId(f.subtensor_of(alpha), f.index) for f in enumerate_families(A.shape, k)]


def support_set(A: SparseTensor, k: int, sid: SubtensorId) -> SupportSet:
    """Nonzero positions of ``A`` lying in subtensor ``sid``."""
    family = _family(A.shape, k, sid.family)
    if not 1 <= sid.s <= family.cardinality:
        raise InvalidIndexError(f"subtensor {sid.s} out of range for family {sid.family}")
    mask = family.subtensors_of(A.indices) == sid.s
    return SupportSet(SubtensorId(sid.s, sid.family), frozenset(map(tuple, A.indices[mask].tolist())))


def global_support(A: SparseTensor) -> set[MultiIndex]:
    return set(map(tuple, A.indices.tolist()))


def phi(A: SparseTensor, family: PartitionFamily) -> np.ndarray:
    """Nonzero count of every subtensor of ``family`` (position ``s - 1``)."""
    return np.bincount(family.subtensors_of(A.indices) - 1, minlength=family.cardinality)


def apply_family_scaling(A: SparseTensor, k: int, i: int, M: Sequence[float]) -> SparseTensor:
    """Multiply every entry of subtensor ``(s, i)`` by ``M[s - 1]``."""
    family = _family(A.shape, k, i)
    M = np.asarray(M, dtype=np.float64).reshape(-1)
    if M.size != family.cardinality:
        raise InvalidScalingError(
            f"family {i} has {family.cardinality} subtensors, got {M.size} scale factors"
        )
    if np.any(M == 0) or not np.all(np.isfinite(M)):
        raise InvalidScalingError("scale factors must be finite and nonzero")
    return A.with_values(A.values * M[family.subtensors_of(A.indices) - 1])


def iter_subtensor_ids(shape: Sequence[int], k: int) -> Iterable[SubtensorId]:
    for f in enumerate_families(shape, k):
        for s in range(1, f.cardinality + 1):
            yield SubtensorId(s, f.index)
