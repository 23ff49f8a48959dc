"""Dense incidence-matrix view of the scaling problem, used as a verification oracle.

Row ``P(s, i)`` of ``C`` is subtensor ``(s, i)``; column ``J(alpha)`` is an
unfolded tensor position. ``C[P(s, i), J(alpha)] = 1`` exactly when ``alpha``
is a nonzero of ``A`` inside that subtensor. The log constraints read
``C x = b`` with ``b[P(s, i)] = ln S[s, i]``, and the nearest point to
``a = ln|A|`` on that affine set is the log of the scaled tensor. Any ``mu``
with ``mu^T C = 0`` and ``mu^T b != 0`` certifies that no scaling exists.

None of this is the production path: it materializes ``C`` densely and uses
SVD, so it is capped at a modest number of columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .engine import LogTensor, ScalingLists, TargetProducts
from .errors import InvalidTargetError, OracleTooLargeError
from .tensor import SparseTensor, SubtensorId, enumerate_families

DENSE_COLUMN_LIMIT = 100_000
RANK_RTOL = 1e-10
FEASIBILITY_TOL = 1e-9
CONSTRAINT_TOL = 1e-10


@dataclass(frozen=True)
class IncidenceSystem:
    """``C`` over all ``prod(shape)`` columns plus the support-restricted block.

    ``support_columns`` are the 0-based columns ``J(alpha) - 1`` of the
    nonzeros of ``A`` in ascending order; ``C_support`` is ``C`` restricted to
    them (dense). ``row_offsets[i - 1]`` is ``P(0, i)``, so row
    ``P(s, i) = row_offsets[i - 1] + s``.
    """

    shape: tuple[int, ...]
    k: int
    C: sp.csr_matrix
    b: np.ndarray
    support_columns: np.ndarray
    C_support: np.ndarray
    row_offsets: tuple[int, ...]

    @property
    def n_rows(self) -> int:
        return self.C.shape[0]

    @property
    def n_cols(self) -> int:
        return self.C.shape[1]

    def row(self, sid: SubtensorId) -> int:
        """1-based row ``P(s, i)``."""
        return self.row_offsets[sid.family - 1] + sid.s

    def row_id(self, p: int) -> SubtensorId:
        """Inverse of :meth:`row` (``p`` is 1-based)."""
        i = int(np.searchsorted(self.row_offsets, p, side="left"))
        return SubtensorId(p - self.row_offsets[i - 1], i)

    def omega(self, scalings: ScalingLists) -> np.ndarray:
        """Stack the log scaling lists in row order."""
        return np.concatenate(scalings.log_values)

    def split_rows(self, vec: np.ndarray) -> tuple[np.ndarray, ...]:
        """Cut a row-indexed vector back into per-family lists."""
        bounds = list(self.row_offsets) + [self.n_rows]
        return tuple(np.asarray(vec[bounds[j]:bounds[j + 1]]) for j in range(len(self.row_offsets)))


@dataclass(frozen=True)
class FeasibilityCertificate:
    feasible: bool
    witness: Optional[np.ndarray]
    witness_dot_b: float
    witness_CT_norm: float
    nullity: int
    max_violation: float

    @property
    def verdict(self) -> str:
        return "feasible" if self.feasible else "infeasible"


@dataclass(frozen=True)
class ProgramIIResult:
    x: LogTensor
    omega: np.ndarray
    feasible: bool
    constraint_violation: float
    stationarity: float


def build_incidence(
    A: SparseTensor,
    k: int,
    targets: Optional[TargetProducts] = None,
    max_columns: int = DENSE_COLUMN_LIMIT,
) -> IncidenceSystem:
    n_cols = math.prod(A.shape)
    if n_cols > max_columns:
        raise OracleTooLargeError(
            f"incidence matrix would have {n_cols} columns, limit is {max_columns}; "
            "use the sweep residuals for diagnostics instead"
        )
    targets = targets or TargetProducts.ones(A.shape, k)
    if targets.shape != A.shape or targets.k != k:
        raise InvalidTargetError("targets do not match the tensor shape and rank")
    families = enumerate_families(A.shape, k)
    offsets = np.concatenate([[0], np.cumsum([f.cardinality for f in families])])
    cols = A.positions - 1
    rows = np.concatenate([offsets[j] + f.subtensors_of(A.indices) - 1 for j, f in enumerate(families)])
    C = sp.csr_matrix(
        (np.ones(rows.size), (rows, np.tile(cols, len(families)))),
        shape=(int(offsets[-1]), n_cols),
    )
    b = np.concatenate(targets.log_values)
    C_support = C[:, cols].toarray()
    return IncidenceSystem(
        shape=A.shape,
        k=k,
        C=C,
        b=b,
        support_columns=cols,
        C_support=C_support,
        row_offsets=tuple(int(o) for o in offsets[:-1]),
    )


def _left_null_space(C_support: np.ndarray) -> np.ndarray:
    if C_support.shape[1] == 0:
        return np.eye(C_support.shape[0])
    return scipy.linalg.null_space(C_support.T, rcond=RANK_RTOL)


def solve_program_ii(sys: IncidenceSystem, a: LogTensor) -> ProgramIIResult:
    """Nearest point to ``a`` (Euclidean, support only) satisfying ``C x = b``.

    ``x = a + C^T omega`` with the minimum-norm correction. When ``C x = b`` is
    inconsistent the least-squares point is still returned, flagged
    ``feasible=False``.
    """
    C = sys.C_support
    a_vec = np.asarray(a.values, dtype=np.float64)
    if C.shape[1] == 0:
        viol = float(np.max(np.abs(sys.b))) if sys.b.size else 0.0
        return ProgramIIResult(a, np.zeros(sys.n_rows), viol <= CONSTRAINT_TOL, viol, 0.0)
    gap = sys.b - C @ a_vec
    # minimum-norm delta lies in the row space of C, so delta = C^T omega
    delta, *_ = scipy.linalg.lstsq(C, gap, cond=RANK_RTOL)
    omega, *_ = scipy.linalg.lstsq(C.T, delta, cond=RANK_RTOL)
    x = a_vec + delta
    violation = float(np.max(np.abs(C @ x - sys.b))) if sys.b.size else 0.0
    stationarity = float(np.max(np.abs(x - a_vec - C.T @ omega)))
    scale = max(1.0, float(np.max(np.abs(sys.b))) if sys.b.size else 1.0)
    return ProgramIIResult(
        x=LogTensor(a.shape, a.indices, x),
        omega=omega,
        feasible=violation <= CONSTRAINT_TOL * scale,
        constraint_violation=violation,
        stationarity=stationarity,
    )


def check_feasibility(sys: IncidenceSystem) -> FeasibilityCertificate:
    """Decide ``C x = b`` solvability from the left null space of ``C``.

    Feasible iff every orthonormal basis vector ``mu`` of the left null space
    has ``|mu^T b| <= 1e-9``. The witness returned on infeasibility is the
    projection of ``b`` onto that space, scaled to max-abs 1.
    """
    N = _left_null_space(sys.C_support)
    dots = N.T @ sys.b if N.size else np.zeros(0)
    max_violation = float(np.max(np.abs(dots))) if dots.size else 0.0
    if max_violation <= FEASIBILITY_TOL:
        return FeasibilityCertificate(True, None, 0.0, 0.0, N.shape[1], max_violation)
    mu = N @ dots
    mu = mu / np.max(np.abs(mu))
    mu[np.abs(mu) < 1e-14] = 0.0
    return FeasibilityCertificate(
        feasible=False,
        witness=mu,
        witness_dot_b=float(mu @ sys.b),
        witness_CT_norm=float(np.max(np.abs(mu @ sys.C_support))) if sys.C_support.size else 0.0,
        nullity=N.shape[1],
        max_violation=max_violation,
    )


def gauge_space(sys: IncidenceSystem) -> np.ndarray:
    """Columns span the log-scaling changes that leave every scaled entry fixed."""
    return _left_null_space(sys.C_support)
