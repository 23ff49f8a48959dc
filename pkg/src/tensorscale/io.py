"""Line-oriented text formats for tensors, targets and scaling lists.

Tensor file::

    # comments anywhere
    d n_1 ... n_d nnz
    alpha_1 ... alpha_d value      (one line per nonzero, 1-based)

Targets file::

    k
    i s S                          (family, subtensor, target > 0)

Scalings file, one section per family::

    family i spanned_dim_1 ... spanned_dim_k
    s M

Floats are written with ``repr`` so a write/read round trip is exact.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterator, Union

import numpy as np

from .engine import ScalingLists, TargetProducts
from .errors import TensorFormatError, TensorScaleError
from .tensor import SparseTensor, enumerate_families

PathLike = Union[str, Path]


def _lines(path: PathLike) -> Iterator[tuple[int, list[str]]]:
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            body = raw.split("#", 1)[0].strip()
            if body:
                yield lineno, body.split()


def _int(tok: str, path, lineno) -> int:
    try:
        return int(tok)
    except ValueError:
        raise TensorFormatError(f"{path}:{lineno}: expected an integer, got {tok!r}") from None


def _float(tok: str, path, lineno) -> float:
    try:
        return float(tok)
    except ValueError:
        raise TensorFormatError(f"{path}:{lineno}: expected a number, got {tok!r}") from None


def read_tensor(path: PathLike) -> SparseTensor:
    lines = _lines(path)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise TensorFormatError(f"{path}: empty tensor file") from None
    d = _int(header[0], path, lineno)
    if d < 1 or len(header) != d + 2:
        raise TensorFormatError(f"{path}:{lineno}: header must be 'd n_1 ... n_d nnz'")
    shape = [_int(t, path, lineno) for t in header[1 : d + 1]]
    nnz = _int(header[-1], path, lineno)
    indices, values = [], []
    for lineno, toks in lines:
        if len(toks) != d + 1:
            raise TensorFormatError(f"{path}:{lineno}: expected {d} indices and a value")
        indices.append([_int(t, path, lineno) for t in toks[:d]])
        values.append(_float(toks[d], path, lineno))
    if len(values) != nnz:
        raise TensorFormatError(f"{path}: header declares {nnz} entries, found {len(values)}")
    try:
        return SparseTensor(shape, np.array(indices, dtype=np.int64).reshape(-1, d), values)
    except TensorScaleError as exc:
        raise TensorFormatError(f"{path}: {exc}") from None


def write_tensor(path: PathLike, A: SparseTensor) -> None:
    with open(path, "w") as fh:
        fh.write(" ".join(map(str, [A.order, *A.shape, A.nnz])) + "\n")
        for idx, v in zip(A.indices.tolist(), A.values.tolist()):
            fh.write(" ".join(map(str, idx)) + " " + repr(v) + "\n")


def read_targets(path: PathLike, shape) -> TargetProducts:
    lines = _lines(path)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise TensorFormatError(f"{path}: empty targets file") from None
    if len(header) != 1:
        raise TensorFormatError(f"{path}:{lineno}: first line must be the rank k")
    k = _int(header[0], path, lineno)
    pairs = {}
    for lineno, toks in lines:
        if len(toks) != 3:
            raise TensorFormatError(f"{path}:{lineno}: expected 'i s S'")
        i, s = _int(toks[0], path, lineno), _int(toks[1], path, lineno)
        if (s, i) in pairs:
            raise TensorFormatError(f"{path}:{lineno}: duplicate target for (s={s}, i={i})")
        pairs[(s, i)] = _float(toks[2], path, lineno)
    return TargetProducts.from_pairs(shape, k, pairs)


def write_targets(path: PathLike, targets: TargetProducts, skip_ones: bool = True) -> None:
    with open(path, "w") as fh:
        fh.write(f"{targets.k}\n")
        for i, vals in enumerate(targets.values, start=1):
            for s, v in enumerate(vals.tolist(), start=1):
                if not (skip_ones and v == 1.0):
                    fh.write(f"{i} {s} {v!r}\n")


def write_scalings(path: PathLike, scalings: ScalingLists) -> None:
    families = enumerate_families(scalings.shape, scalings.k)
    with open(path, "w") as fh:
        for f, M in zip(families, scalings.multiplicative()):
            fh.write("family " + " ".join(map(str, [f.index, *f.spanned_dims])) + "\n")
            for s, v in enumerate(M.tolist(), start=1):
                fh.write(f"{s} {v!r}\n")


def read_scalings(path: PathLike, shape) -> ScalingLists:
    sections: dict[int, tuple[tuple[int, ...], dict[int, float]]] = {}
    current = None
    for lineno, toks in _lines(path):
        if toks[0] == "family":
            if len(toks) < 3:
                raise TensorFormatError(f"{path}:{lineno}: expected 'family i spanned_dims...'")
            i = _int(toks[1], path, lineno)
            if i in sections:
                raise TensorFormatError(f"{path}:{lineno}: family {i} appears twice")
            spanned = tuple(_int(t, path, lineno) for t in toks[2:])
            current = sections[i] = (spanned, {})
            continue
        if current is None:
            raise TensorFormatError(f"{path}:{lineno}: scaling entry before any 'family' line")
        if len(toks) != 2:
            raise TensorFormatError(f"{path}:{lineno}: expected 's M'")
        current[1][_int(toks[0], path, lineno)] = _float(toks[1], path, lineno)
    if not sections:
        raise TensorFormatError(f"{path}: no family sections")
    k = len(next(iter(sections.values()))[0])
    families = enumerate_families(shape, k)
    if sorted(sections) != [f.index for f in families]:
        raise TensorFormatError(f"{path}: expected families 1..{len(families)}, found {sorted(sections)}")
    values = []
    for f in families:
        spanned, entries = sections[f.index]
        if spanned != f.spanned_dims:
            raise TensorFormatError(f"{path}: family {f.index} spans {spanned}, expected {f.spanned_dims}")
        if sorted(entries) != list(range(1, f.cardinality + 1)):
            raise TensorFormatError(f"{path}: family {f.index} must list s = 1..{f.cardinality}")
        values.append([entries[s] for s in range(1, f.cardinality + 1)])
    try:
        return ScalingLists.from_multiplicative(shape, k, values)
    except TensorScaleError as exc:
        raise TensorFormatError(f"{path}: {exc}") from None
