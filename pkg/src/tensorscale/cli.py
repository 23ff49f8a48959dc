"""``tensorscale`` command line: scale, verify, feasible.

Exit codes: 0 success, 1 input error, 2 not converged / check failed /
infeasible, 3 incidence system too large for the oracle.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .engine import (
    ScalingLists,
    ScalingProblem,
    SignPolicy,
    SolverConfig,
    SupportLayout,
    TargetProducts,
    log_convert,
    solve,
    verify_multiplicative,
)
from .errors import OracleTooLargeError, TensorScaleError
from .oracle import DENSE_COLUMN_LIMIT, build_incidence, check_feasibility
from .tensor import enumerate_families

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_FAILED = 2
EXIT_ORACLE_LIMIT = 3


def _threads() -> int:
    raw = os.environ.get("TENSORSCALE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise TensorScaleError(f"TENSORSCALE_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise TensorScaleError(f"TENSORSCALE_THREADS must be a positive integer, got {raw!r}")
    return n


def _load_targets(path, shape, k) -> TargetProducts:
    if path is None:
        return TargetProducts.ones(shape, k)
    targets = io.read_targets(path, shape)
    if targets.k != k:
        raise TensorScaleError(f"targets file is for k={targets.k}, but --k {k} was given")
    return targets


def _emit(report: dict, as_json: bool, out=None) -> None:
    out = out or sys.stdout
    if as_json:
        out.write(json.dumps(report, sort_keys=True) + "\n")
        return
    for key, value in report.items():
        if isinstance(value, list) and value and isinstance(value[0], dict):
            out.write(f"{key}:\n")
            for item in value:
                out.write("  " + " ".join(f"{k}={v}" for k, v in item.items()) + "\n")
        else:
            out.write(f"{key}: {value}\n")


def cmd_scale(args) -> int:
    A = io.read_tensor(args.tensor)
    enumerate_families(A.shape, args.k)
    targets = _load_targets(args.targets, A.shape, args.k)
    init = None
    if args.seed is not None:
        init = ScalingLists.random(A.shape, args.k, np.random.default_rng(args.seed))
    config = SolverConfig(
        epsilon=args.eps,
        max_sweeps=args.max_sweeps,
        initial_scalings=init,
        sign_policy=SignPolicy(args.sign_policy),
    )
    threads = _threads()
    t0 = time.perf_counter()
    sol = solve(ScalingProblem(A, args.k, targets, config))
    wall = time.perf_counter() - t0

    out = Path(args.out)
    scalings_out = Path(args.scalings_out) if args.scalings_out else out.with_name(out.name + ".scalings")
    io.write_tensor(out, sol.scaled_tensor)
    io.write_scalings(scalings_out, sol.scalings)

    report = {
        "command": "scale",
        "status": sol.status.value,
        "sweeps": sol.sweeps,
        "final_residual": sol.final_residual,
        "family_residuals": [
            {"family": i, "max_residual": r} for i, r in enumerate(sol.family_residuals, start=1)
        ],
        "wall_time": wall,
        "threads": threads,
        "scaled_tensor": str(out),
        "scalings": str(scalings_out),
    }
    _emit(report, args.json)
    return EXIT_OK if sol.converged else EXIT_FAILED


def cmd_verify(args) -> int:
    A = io.read_tensor(args.tensor)
    scaled = io.read_tensor(args.scaled)
    scalings = io.read_scalings(args.scalings, A.shape)
    if scalings.k != args.k:
        raise TensorScaleError(f"scalings file is for k={scalings.k}, but --k {args.k} was given")
    targets = _load_targets(args.targets, A.shape, args.k)
    multiplicative_ok = verify_multiplicative(A, scaled, scalings, rtol=args.rtol)

    a = log_convert(scaled)
    layout = SupportLayout.of(scaled, args.k)
    log_targets = targets.log_values
    per_family = []
    offending = []
    for f, phi, lt in zip(layout.families, layout.phi, log_targets):
        dev = np.abs(lt - layout.sums(f.index, a.values))
        dev[phi == 0] = np.abs(lt[phi == 0])
        per_family.append({"family": f.index, "max_deviation": float(dev.max()) if dev.size else 0.0})
        offending += [{"s": int(s) + 1, "i": f.index, "deviation": float(dev[s])} for s in np.flatnonzero(dev > args.tol)]
    passed = multiplicative_ok and not offending
    report = {
        "command": "verify",
        "result": "pass" if passed else "fail",
        "multiplicative": multiplicative_ok,
        "family_deviations": per_family,
        "offending": offending,
    }
    _emit(report, args.json)
    return EXIT_OK if passed else EXIT_FAILED


def cmd_feasible(args) -> int:
    A = io.read_tensor(args.tensor)
    targets = _load_targets(args.targets, A.shape, args.k)
    sys_ = build_incidence(A, args.k, targets, max_columns=args.max_columns)
    cert = check_feasibility(sys_)
    report = {
        "command": "feasible",
        "verdict": cert.verdict,
        "nullity": cert.nullity,
        "max_violation": cert.max_violation,
    }
    if not cert.feasible:
        witness = [
            {"s": sid.s, "i": sid.family, "mu": float(mu)}
            for sid, mu in ((sys_.row_id(p), cert.witness[p - 1]) for p in range(1, sys_.n_rows + 1))
            if mu != 0.0
        ]
        report["witness_dot_b"] = cert.witness_dot_b
        report["witness_CT_norm"] = cert.witness_CT_norm
        report["witness"] = witness
        if args.witness_out:
            with open(args.witness_out, "w") as fh:
                for w in witness:
                    fh.write(f"{w['i']} {w['s']} {w['mu']!r}\n")
            report["witness_file"] = args.witness_out
    _emit(report, args.json)
    return EXIT_OK if cert.feasible else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tensorscale", description="Canonical scaling of sparse tensor subtensors.")
    sub = p.add_subparsers(dest="command", required=True)

    sc = sub.add_parser("scale", help="scale subtensors to target products")
    sc.add_argument("tensor")
    sc.add_argument("--k", type=int, required=True, help="subtensor rank, 1 <= k < d")
    sc.add_argument("--targets", help="targets file (default: all products 1)")
    sc.add_argument("--eps", type=float, default=1e-10, help="log-domain residual tolerance (default 1e-10)")
    sc.add_argument("--max-sweeps", type=int, default=10_000)
    sc.add_argument("--seed", type=int, help="start from random scaling lists drawn with this seed")
    sc.add_argument("--sign-policy", choices=[p.value for p in SignPolicy], default="preserve")
    sc.add_argument("--out", required=True, help="path for the scaled tensor")
    sc.add_argument("--scalings-out", help="path for the scaling lists (default: <out>.scalings)")
    sc.add_argument("--json", action="store_true", help="single-line JSON report")
    sc.set_defaults(func=cmd_scale)

    ve = sub.add_parser("verify", help="check a scaled tensor against its input and targets")
    ve.add_argument("tensor")
    ve.add_argument("scaled")
    ve.add_argument("scalings")
    ve.add_argument("--k", type=int, required=True)
    ve.add_argument("--targets")
    ve.add_argument("--rtol", type=float, default=1e-10, help="relative tolerance of the multiplicative check")
    ve.add_argument("--tol", type=float, default=1e-8, help="log-domain tolerance on subtensor products")
    ve.add_argument("--json", action="store_true")
    ve.set_defaults(func=cmd_verify)

    fe = sub.add_parser("feasible", help="feasibility certificate from the incidence system")
    fe.add_argument("tensor")
    fe.add_argument("--k", type=int, required=True)
    fe.add_argument("--targets")
    fe.add_argument("--witness-out", help="write the infeasibility witness as 'i s mu' lines")
    fe.add_argument("--max-columns", type=int, default=DENSE_COLUMN_LIMIT)
    fe.add_argument("--json", action="store_true")
    fe.set_defaults(func=cmd_feasible)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OracleTooLargeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ORACLE_LIMIT
    except (TensorScaleError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
