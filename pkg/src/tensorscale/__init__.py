"""Canonical positive scaling of k-dimensional subtensors of sparse tensors."""

from .engine import (
    LogTensor,
    ScalingLists,
    ScalingProblem,
    ScalingSolution,
    SignPolicy,
    SolverConfig,
    Status,
    SupportLayout,
    TargetProducts,
    log_convert,
    log_products,
    residual,
    solve,
    sweep,
    verify_multiplicative,
)
from .errors import *  # noqa: F401,F403
from .oracle import (
    FeasibilityCertificate,
    IncidenceSystem,
    build_incidence,
    check_feasibility,
    gauge_space,
    solve_program_ii,
)
from .tensor import (
    PartitionFamily,
    SparseTensor,
    SubtensorId,
    SupportSet,
    apply_family_scaling,
    enumerate_families,
    fold_index,
    global_support,
    member_subtensors,
    phi,
    support_set,
    unfold_index,
)

__version__ = "0.1.0"
