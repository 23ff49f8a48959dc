"""Reference and random problem instances for tests, scripts and benchmarks."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .engine import ScalingLists, TargetProducts, log_products
from .tensor import SparseTensor, apply_family_scaling, enumerate_families


def example1_tensor() -> SparseTensor:
    """The 3 x 4 x 2 tensor whose frontal slices hold 1..12 and 13..24 column-major."""
    return SparseTensor.from_dense(np.arange(1, 25, dtype=float).reshape(2, 4, 3).transpose(2, 1, 0))


def random_sparse_tensor(
    rng: np.random.Generator,
    shape: Sequence[int],
    density: float,
    low: float = 0.1,
    high: float = 10.0,
    log_uniform: bool = True,
) -> SparseTensor:
    """Positive tensor with each cell kept independently with probability ``density``.

    At least one entry is always kept.
    """
    shape = tuple(shape)
    mask = rng.random(shape) < density
    if not mask.any():
        mask[tuple(rng.integers(0, n) for n in shape)] = True
    if log_uniform:
        vals = np.exp(rng.uniform(np.log(low), np.log(high), size=shape))
    else:
        vals = rng.uniform(low, high, size=shape)
    return SparseTensor.from_dense(np.where(mask, vals, 0.0))


def random_tensor_with_nnz(rng: np.random.Generator, shape: Sequence[int], nnz: int) -> SparseTensor:
    """Positive tensor with exactly ``nnz`` nonzeros at distinct random positions."""
    total = int(np.prod(shape))
    flat = rng.choice(total, size=nnz, replace=False)
    idx = np.stack(np.unravel_index(flat, tuple(shape), order="F"), axis=1) + 1
    return SparseTensor(shape, idx, np.exp(rng.uniform(-2.0, 2.0, size=nnz)))


def random_family_scalings(rng: np.random.Generator, shape: Sequence[int], k: int, spread: float = 1.0) -> ScalingLists:
    return ScalingLists.random(shape, k, rng, scale=spread)


def scale_by(A: SparseTensor, scalings: ScalingLists) -> SparseTensor:
    """Apply every family's multiplicative list in turn."""
    out = A
    for f, M in zip(enumerate_families(A.shape, scalings.k), scalings.multiplicative()):
        out = apply_family_scaling(out, scalings.k, f.index, M)
    return out


def feasible_targets(rng: np.random.Generator, A: SparseTensor, k: int, spread: float = 1.0) -> TargetProducts:
    """Targets read off a randomly rescaled copy of ``A``, hence attainable by construction.

    Empty subtensors get target 1, the empty product.
    """
    B = scale_by(A, random_family_scalings(rng, A.shape, k, spread))
    return TargetProducts.from_log(A.shape, k, log_products(B, k))
