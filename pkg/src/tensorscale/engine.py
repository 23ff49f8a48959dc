"""Log-domain cyclic scaling of k-subtensors to prescribed nonzero products.

Working with ``a = ln|A|`` over the support, the product constraint on
subtensor ``(s, i)`` becomes a linear one: the entries of ``a`` inside the
subtensor must sum to ``ln S[s, i]``. A sweep visits the families in order
and, for every nonempty subtensor of the current family, spreads the
constraint violation evenly over its ``phi(s, i)`` nonzeros. Each family
update is an exact projection onto that family's constraints; the updates
accumulate into the log scaling lists ``m`` so that, at every step,
``a'(alpha) = a(alpha) + sum of m over the subtensors containing alpha``.

Per sweep the work is proportional to ``C(d, k) * nnz``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import (
    InfeasibleEmptySubtensorError,
    InvalidIndexError,
    InvalidRankError,
    InvalidScalingError,
    InvalidTargetError,
    MalformedTensorError,
    PatternMismatchError,
)
from .tensor import PartitionFamily, SparseTensor, SubtensorId, enumerate_families

logger = logging.getLogger(__name__)


class SignPolicy(str, enum.Enum):
    PRESERVE = "preserve"
    REJECT = "reject"


class Status(str, enum.Enum):
    CONVERGED = "converged"
    MAX_SWEEPS = "max-sweeps-reached"


def _per_family(shape, k, arrays, what: str) -> tuple[np.ndarray, ...]:
    families = enumerate_families(shape, k)
    arrays = tuple(np.array(v, dtype=np.float64).reshape(-1) for v in arrays)
    if len(arrays) != len(families):
        raise InvalidScalingError(f"expected {len(families)} {what} lists, got {len(arrays)}")
    for f, arr in zip(families, arrays):
        if arr.size != f.cardinality:
            raise InvalidScalingError(
                f"family {f.index} has {f.cardinality} subtensors, {what} list has {arr.size}"
            )
    return arrays


@dataclass(frozen=True)
class TargetProducts:
    """Target product ``S[s, i] > 0`` for every subtensor of every family."""

    shape: tuple[int, ...]
    k: int
    values: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(self.shape))
        try:
            values = _per_family(self.shape, self.k, self.values, "target")
        except InvalidScalingError as exc:
            raise InvalidTargetError(str(exc)) from None
        for i, v in enumerate(values, start=1):
            if not np.all(np.isfinite(v)) or np.any(v <= 0):
                raise InvalidTargetError(f"targets of family {i} must be finite and strictly positive")
            v.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def ones(cls, shape: Sequence[int], k: int) -> "TargetProducts":
        return cls(tuple(shape), k, tuple(np.ones(f.cardinality) for f in enumerate_families(shape, k)))

    @classmethod
    def from_pairs(
        cls, shape: Sequence[int], k: int, pairs: Mapping[tuple[int, int], float]
    ) -> "TargetProducts":
        """Build from ``{(s, i): S}``; omitted pairs default to 1."""
        families = enumerate_families(shape, k)
        values = [np.ones(f.cardinality) for f in families]
        for (s, i), target in pairs.items():
            if not 1 <= i <= len(families):
                raise InvalidTargetError(f"family index {i} out of range [1, {len(families)}]")
            if not 1 <= s <= families[i - 1].cardinality:
                raise InvalidTargetError(f"subtensor {s} out of range for family {i}")
            values[i - 1][s - 1] = target
        return cls(tuple(shape), k, tuple(values))

    @classmethod
    def from_log(cls, shape: Sequence[int], k: int, log_values) -> "TargetProducts":
        return cls(tuple(shape), k, tuple(np.exp(np.asarray(v, dtype=np.float64)) for v in log_values))

    @property
    def log_values(self) -> tuple[np.ndarray, ...]:
        return tuple(np.log(v) for v in self.values)

    def __getitem__(self, sid: SubtensorId) -> float:
        return float(self.values[sid.family - 1][sid.s - 1])


@dataclass(frozen=True)
class LogTensor:
    """``ln|A|`` on the support of ``A``; positions off the support are implicit zeros."""

    shape: tuple[int, ...]
    indices: np.ndarray
    values: np.ndarray

    def to_sparse(self, signs: Optional[np.ndarray] = None) -> SparseTensor:
        vals = np.exp(self.values)
        if signs is not None:
            vals = vals * signs
        return SparseTensor(self.shape, self.indices, vals)


@dataclass(frozen=True)
class ScalingLists:
    """Per-family log scaling factors ``m[i][s - 1] = ln M[s, i]``."""

    shape: tuple[int, ...]
    k: int
    log_values: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(self.shape))
        object.__setattr__(self, "log_values", _per_family(self.shape, self.k, self.log_values, "scaling"))

    @classmethod
    def zeros(cls, shape: Sequence[int], k: int) -> "ScalingLists":
        return cls(tuple(shape), k, tuple(np.zeros(f.cardinality) for f in enumerate_families(shape, k)))

    @classmethod
    def random(cls, shape: Sequence[int], k: int, rng: np.random.Generator, scale: float = 1.0) -> "ScalingLists":
        families = enumerate_families(shape, k)
        return cls(tuple(shape), k, tuple(scale * rng.standard_normal(f.cardinality) for f in families))

    @classmethod
    def from_multiplicative(cls, shape: Sequence[int], k: int, values) -> "ScalingLists":
        values = [np.asarray(v, dtype=np.float64) for v in values]
        if any(np.any(v <= 0) or not np.all(np.isfinite(v)) for v in values):
            raise InvalidScalingError("multiplicative scaling factors must be finite and positive")
        return cls(tuple(shape), k, tuple(np.log(v) for v in values))

    def multiplicative(self) -> tuple[np.ndarray, ...]:
        return tuple(np.exp(m) for m in self.log_values)

    def __getitem__(self, sid: SubtensorId) -> float:
        return float(np.exp(self.log_values[sid.family - 1][sid.s - 1]))

    def membership_sums(self, indices: np.ndarray) -> np.ndarray:
        """For each position, the sum of ``m`` over the subtensors containing it."""
        total = np.zeros(np.asarray(indices).reshape(-1, len(self.shape)).shape[0])
        for f, m in zip(enumerate_families(self.shape, self.k), self.log_values):
            total += m[f.subtensors_of(indices) - 1]
        return total


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 1e-10
    max_sweeps: int = 10_000
    initial_scalings: Optional[ScalingLists] = None
    sign_policy: SignPolicy = SignPolicy.PRESERVE
    family_order: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_sweeps < 1:
            raise ValueError(f"max_sweeps must be at least 1, got {self.max_sweeps}")
        object.__setattr__(self, "sign_policy", SignPolicy(self.sign_policy))


@dataclass(frozen=True)
class ScalingProblem:
    tensor: SparseTensor
    k: int
    targets: Optional[TargetProducts] = None
    config: SolverConfig = field(default_factory=SolverConfig)

    def resolved_targets(self) -> TargetProducts:
        if self.targets is None:
            return TargetProducts.ones(self.tensor.shape, self.k)
        if self.targets.shape != self.tensor.shape or self.targets.k != self.k:
            raise InvalidTargetError(
                f"targets are for shape {self.targets.shape}, k={self.targets.k}; "
                f"problem has shape {self.tensor.shape}, k={self.k}"
            )
        return self.targets


@dataclass(frozen=True)
class ScalingSolution:
    scaled_tensor: SparseTensor
    scalings: ScalingLists
    residuals: tuple[float, ...]
    sweeps: int
    status: Status
    family_residuals: tuple[float, ...] = ()

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else math.nan


class SupportLayout:
    """Subtensor membership of every stored entry, per family.

    ``members[i]`` holds the 0-based subtensor number of each entry in family
    ``i + 1`` and ``phi[i]`` the nonzero count of each subtensor.
    """

    def __init__(self, shape: Sequence[int], k: int, indices: np.ndarray):
        self.shape = tuple(shape)
        self.k = k
        self.families: list[PartitionFamily] = enumerate_families(shape, k)
        self.members = [f.subtensors_of(indices) - 1 for f in self.families]
        self.phi = [np.bincount(mem, minlength=f.cardinality) for f, mem in zip(self.families, self.members)]
        self.nnz = int(np.asarray(indices).reshape(-1, len(self.shape)).shape[0])

    @classmethod
    def of(cls, A, k: int) -> "SupportLayout":
        return cls(A.shape, k, A.indices)

    def sums(self, family: int, values: np.ndarray) -> np.ndarray:
        f = self.families[family - 1]
        return np.bincount(self.members[family - 1], weights=values, minlength=f.cardinality)

    def family_residuals(self, values: np.ndarray, log_targets: Sequence[np.ndarray]) -> np.ndarray:
        out = np.zeros(len(self.families))
        for i, f in enumerate(self.families):
            nonempty = self.phi[i] > 0
            if nonempty.any():
                diff = log_targets[i][nonempty] - self.sums(f.index, values)[nonempty]
                out[i] = np.max(np.abs(diff))
        return out


def log_convert(A: SparseTensor, sign_policy: SignPolicy | str = SignPolicy.PRESERVE) -> LogTensor:
    """``ln|A|`` over the support. Negative entries are an error under ``reject``."""
    if SignPolicy(sign_policy) is SignPolicy.REJECT and np.any(A.values < 0):
        raise MalformedTensorError("negative entries present and sign policy is 'reject'")
    mags = np.abs(A.values)
    if np.any(mags == 0):
        raise MalformedTensorError("stored entry with magnitude zero")
    return LogTensor(A.shape, A.indices, np.log(mags))


def _project_family(
    values: np.ndarray, m: np.ndarray, log_target: np.ndarray, members: np.ndarray, phi: np.ndarray
) -> float:
    # in place; returns the family's max violation before the update
    sums = np.bincount(members, weights=values, minlength=phi.size)
    nonempty = phi > 0
    if not nonempty.any():
        return 0.0
    rho = np.zeros(phi.size)
    gap = log_target[nonempty] - sums[nonempty]
    rho[nonempty] = gap / phi[nonempty]
    values += rho[members]
    m += rho
    return float(np.max(np.abs(gap)))


def _family_order(order: Optional[Sequence[int]], n_families: int) -> list[int]:
    if order is None:
        return list(range(1, n_families + 1))
    order = [int(i) for i in order]
    if sorted(order) != list(range(1, n_families + 1)):
        raise InvalidIndexError(f"family order {order} is not a permutation of 1..{n_families}")
    return order


def sweep(
    a: LogTensor,
    m: ScalingLists,
    targets: TargetProducts,
    layout: Optional[SupportLayout] = None,
    order: Optional[Sequence[int]] = None,
) -> tuple[LogTensor, ScalingLists, np.ndarray]:
    """One pass over all families; returns the updated ``(a, m)`` and the
    per-family max violation seen just before each family was projected."""
    layout = layout or SupportLayout(a.shape, targets.k, a.indices)
    values = a.values.copy()
    ms = [v.copy() for v in m.log_values]
    log_targets = targets.log_values
    before = np.zeros(len(layout.families))
    for i in _family_order(order, len(layout.families)):
        before[i - 1] = _project_family(values, ms[i - 1], log_targets[i - 1], layout.members[i - 1], layout.phi[i - 1])
    return LogTensor(a.shape, a.indices, values), ScalingLists(m.shape, m.k, tuple(ms)), before


def residual(a: LogTensor, targets: TargetProducts, layout: Optional[SupportLayout] = None) -> float:
    """Max over nonempty subtensors of ``|ln S[s, i] - sum of a over its support|``."""
    layout = layout or SupportLayout(a.shape, targets.k, a.indices)
    res = layout.family_residuals(a.values, targets.log_values)
    return float(res.max()) if res.size else 0.0


def check_empty_targets(layout: SupportLayout, targets: TargetProducts) -> None:
    for f, phi, t in zip(layout.families, layout.phi, targets.values):
        bad = np.flatnonzero((phi == 0) & (t != 1.0))
        if bad.size:
            s = int(bad[0]) + 1
            raise InfeasibleEmptySubtensorError(
                f"subtensor (s={s}, i={f.index}) has no nonzeros but target {t[bad[0]]!r} != 1"
            )


def solve(problem: ScalingProblem) -> ScalingSolution:
    """Scale ``problem.tensor`` so every nonempty subtensor product hits its target.

    Sweeps until the max log-domain residual drops to ``config.epsilon`` or
    ``config.max_sweeps`` sweeps have run; the latter is reported through
    ``status`` rather than raised. Signs of negative entries are carried
    through unchanged under the ``preserve`` policy.
    """
    A, k, cfg = problem.tensor, problem.k, problem.config
    if not 1 <= k < A.order:
        raise InvalidRankError(f"subtensor rank k={k} must satisfy 1 <= k < d={A.order}")
    targets = problem.resolved_targets()
    layout = SupportLayout.of(A, k)
    check_empty_targets(layout, targets)
    order = _family_order(cfg.family_order, len(layout.families))

    a = log_convert(A, cfg.sign_policy)
    signs = np.sign(A.values)
    m0 = cfg.initial_scalings or ScalingLists.zeros(A.shape, k)
    if m0.shape != A.shape or m0.k != k:
        raise InvalidScalingError("initial scalings do not match the problem's shape and rank")
    values = a.values + m0.membership_sums(A.indices)
    ms = [v.copy() for v in m0.log_values]
    log_targets = targets.log_values

    history: list[float] = []
    status = Status.MAX_SWEEPS
    for count in range(1, cfg.max_sweeps + 1):
        for i in order:
            _project_family(values, ms[i - 1], log_targets[i - 1], layout.members[i - 1], layout.phi[i - 1])
        res = float(layout.family_residuals(values, log_targets).max())
        if history and res > history[-1] + 1e-12:
            logger.debug("residual rose from %.3e to %.3e at sweep %d", history[-1], res, count)
        history.append(res)
        if res <= cfg.epsilon:
            status = Status.CONVERGED
            break

    scaled = A.with_values(signs * np.exp(values))
    return ScalingSolution(
        scaled_tensor=scaled,
        scalings=ScalingLists(A.shape, k, tuple(ms)),
        residuals=tuple(history),
        sweeps=len(history),
        status=status,
        family_residuals=tuple(layout.family_residuals(values, log_targets).tolist()),
    )


def log_products(A: SparseTensor, k: int) -> tuple[np.ndarray, ...]:
    """``sum of ln|A|`` over the support of each subtensor (0 for empty ones)."""
    layout = SupportLayout.of(A, k)
    a = np.log(np.abs(A.values))
    return tuple(layout.sums(f.index, a) for f in layout.families)


def verify_multiplicative(
    A: SparseTensor, scaled: SparseTensor, scalings: ScalingLists, rtol: float = 1e-10
) -> bool:
    """True iff ``scaled(alpha) = A(alpha) * prod of M over alpha's subtensors`` on the support."""
    if not A.same_pattern(scaled):
        raise PatternMismatchError("scaled tensor's shape or zero pattern differs from the input")
    if scalings.shape != A.shape:
        raise PatternMismatchError(f"scalings are for shape {scalings.shape}, tensor has {A.shape}")
    expected = A.values * np.exp(scalings.membership_sums(A.indices))
    return bool(np.all(np.abs(scaled.values - expected) <= rtol * np.abs(expected)))
