"""Command-line driver: dataset generation, pipeline fits, and evaluation.

Every command is a deterministic function of its inputs, flags, and seed;
matrices travel as headerless CSV and metadata as JSON with an explicit
schema tag.  Exit codes: 0 success, 2 invalid input, 3 I/O failure,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from .core import (
    Factorization,
    InvalidInputError,
    NumericalError,
    SaaConfig,
    nnz,
    read_json,
    read_matrix_csv,
    write_json,
    write_matrix_csv,
)
from .evaluation import cluster_assign, cluster_metrics, robustness_report, synth_instance
from .local_search import local_search
from .mip_init import BranchAndBound, continuation, outer_approximation
from .solver import SolveTrace, objective, solve

SCHEMA = "sparse-aa-v1"


def parse_lambda(text: str) -> float | tuple[float, ...]:
    """Either a single value or ``log:hi:lo:n`` for a log-spaced schedule."""
    if text.startswith("log:"):
        parts = text.split(":")
        if len(parts) != 4:
            raise InvalidInputError(
                f"bad lambda schedule {text!r}: expected log:hi:lo:n"
            )
        hi, lo, count = float(parts[1]), float(parts[2]), int(parts[3])
        if count < 1 or hi <= lo or lo <= 0:
            raise InvalidInputError(
                f"bad lambda schedule {text!r}: need hi > lo > 0 and n >= 1"
            )
        if count == 1:
            return (lo,)
        return tuple(np.geomspace(hi, lo, count).tolist())
    return float(text)


def zero_init(X: np.ndarray, cfg: SaaConfig) -> Factorization:
    """Baseline start: H = 0 with uniform weight rows."""
    m = X.shape[0]
    return Factorization(
        H=np.zeros((cfg.k, X.shape[1])),
        W=np.full((m, cfg.k), 1.0 / cfg.k),
        Wt=np.full((cfg.k, m), 1.0 / m),
    )


def run_fit(
    X: np.ndarray,
    cfg: SaaConfig,
    init: str = "mip",
    use_local_search: bool = False,
    max_swaps: int = 100,
    oa_kwargs: dict | None = None,
):
    """Full pipeline on an in-memory matrix; returns the factorization plus
    a summary dict, the last solve trace, and the accepted swap log."""
    timings: dict[str, float] = {}
    swaps = []
    if init == "mip":
        t0 = time.monotonic()
        oa = outer_approximation(X, cfg, **(oa_kwargs or {}))
        timings["mip_init"] = time.monotonic() - t0
        t0 = time.monotonic()
        fac, traces = continuation(X, cfg, oa=oa)
        timings["continuation"] = time.monotonic() - t0
        trace = traces[-1]
        oa_info = {
            "rounds": oa.rounds,
            "converged": oa.converged,
            "best_upper": oa.cutset.best_upper,
            "best_lower": oa.cutset.best_lower,
            "gap": oa.cutset.gap,
        }
    elif init == "zero":
        t0 = time.monotonic()
        fac, trace = solve(X, zero_init(X, cfg), cfg, lam=cfg.final_lambda)
        timings["solve"] = time.monotonic() - t0
        oa_info = None
    else:
        raise InvalidInputError(f"unknown init {init!r} (expected 'zero' or 'mip')")

    if use_local_search:
        t0 = time.monotonic()
        fac, n_swaps, swaps = local_search(X, fac, cfg, max_swaps=max_swaps)
        timings["local_search"] = time.monotonic() - t0
    else:
        n_swaps = 0

    final = objective(X, fac, cfg.final_lambda)
    # timings ride along separately: the summary itself is a deterministic
    # function of (inputs, config, seed) and reruns must be byte-identical
    summary = {
        "schema": SCHEMA,
        "config": cfg.to_json(),
        "init": init,
        "local_search": use_local_search,
        "objective": {"fit": final.fit, "reg": final.reg, "total": final.total},
        "nnz_H": nnz(fac.H, 0.0),
        "iterations": trace.iterations,
        "converged": trace.converged,
        "stationarity_residual": trace.stationarity_residual,
        "boundary_tie": trace.boundary_tie,
        "swaps_accepted": n_swaps,
        "mip": oa_info,
    }
    return fac, summary, trace, swaps, timings


def _write_trace_csv(path: Path, trace: SolveTrace) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["schema", "iteration", "fit", "reg", "total"])
        for i, fit, reg, total in trace.rows():
            writer.writerow([SCHEMA, i, f"{fit:.17g}", f"{reg:.17g}", f"{total:.17g}"])


def _write_swaps_csv(path: Path, swaps) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["schema", "leaving_i", "leaving_j", "entering_i", "entering_j", "t", "objective"]
        )
        for s in swaps:
            li, lj = ("", "") if s.leaving is None else s.leaving
            writer.writerow(
                [
                    SCHEMA,
                    li,
                    lj,
                    s.entering[0],
                    s.entering[1],
                    f"{s.t_star:.17g}",
                    f"{s.new_objective:.17g}",
                ]
            )


def cmd_synth(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    X, X0, H0, W0, Z = synth_instance(
        args.m, args.n, args.k, args.sigma_z, args.zero_frac, args.seed
    )
    for name, mat in [("X", X), ("X0", X0), ("H0", H0), ("W0", W0), ("Z", Z)]:
        write_matrix_csv(out / f"{name}.csv", mat)
    manifest = {
        "schema": SCHEMA,
        "m": args.m,
        "n": args.n,
        "k": args.k,
        "sigma_z": args.sigma_z,
        "zero_frac": args.zero_frac,
        "seed": args.seed,
        "nnz_H0": nnz(H0, 0.0),
        "files": ["X.csv", "X0.csv", "H0.csv", "W0.csv", "Z.csv"],
    }
    write_json(out / "manifest.json", manifest)
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    X = read_matrix_csv(args.data)
    lam = parse_lambda(args.lam)
    if args.ell == 0:
        raise InvalidInputError(
            "ell=0 leaves no room for any archetype entry; choose ell >= 1"
        )
    cfg = SaaConfig(
        k=args.k,
        ell=args.ell,
        lam=lam,
        eps_safeguard=args.eps_safeguard,
        tol_objective=args.tol_objective,
        tol_stationary=args.tol_stationary,
        max_iter=args.max_iter,
        seed=args.seed,
    )
    oa_kwargs = {
        "max_rounds": args.oa_rounds,
        "tol_gap": args.oa_tol_gap,
        "backend": BranchAndBound(node_cap=args.oa_node_cap),
        "time_budget": args.time_budget,
    }
    fac, summary, trace, swaps, timings = run_fit(
        X,
        cfg,
        init=args.init,
        use_local_search=args.local_search == "on",
        max_swaps=args.max_swaps,
        oa_kwargs=oa_kwargs,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(out / "H.csv", fac.H)
    write_matrix_csv(out / "W.csv", fac.W)
    write_matrix_csv(out / "Wt.csv", fac.Wt)
    _write_trace_csv(out / "trace.csv", trace)
    _write_swaps_csv(out / "swaps.csv", swaps)
    write_json(out / "summary.json", summary)
    write_json(out / "timings.json", {"schema": SCHEMA, "seconds": timings})
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    truth = Path(args.truth)
    manifest = read_json(truth / "manifest.json")
    H0 = read_matrix_csv(truth / "H0.csv")
    X0 = read_matrix_csv(truth / "X0.csv")
    Z = read_matrix_csv(truth / "Z.csv")
    labels = None
    if args.labels:
        labels = np.loadtxt(args.labels, dtype=np.int64, ndmin=1)

    rows = []
    for fit_dir in args.fit:
        fit = Path(fit_dir)
        summary = read_json(fit / "summary.json")
        H_hat = read_matrix_csv(fit / "H.csv")
        if H_hat.shape[1] != H0.shape[1]:
            raise InvalidInputError(
                f"fitted H in {fit_dir} has {H_hat.shape[1]} columns, "
                f"ground truth has {H0.shape[1]}"
            )
        ell = summary["config"]["ell"]
        rep = robustness_report(H0, H_hat, X0, Z, ell)
        row = {
            "schema": SCHEMA,
            "fit": str(fit_dir),
            "seed": summary["config"]["seed"],
            "sigma_z": manifest["sigma_z"],
            "ell": ell,
            "weak": rep.weak,
            "strong": rep.strong,
            "delta": rep.delta,
            "beta": rep.beta,
            "sep": rep.sep,
            "psi": summary["objective"]["total"],
        }
        if labels is not None:
            X = read_matrix_csv(truth / "X.csv")
            est = cluster_assign(X, H_hat)
            cm = cluster_metrics(labels, est, H0.shape[0])
            row["purity"] = cm.purity
            row["entropy"] = cm.entropy
        rows.append(row)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fields = list(rows[0].keys()) if rows else ["schema"]
    with open(out / "reports.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {
                    k: (f"{v:.17g}" if isinstance(v, float) else v)
                    for k, v in row.items()
                }
            )
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row["sigma_z"], row["ell"]), []).append(row)
    aggregate = {
        "schema": SCHEMA,
        "groups": [
            {
                "sigma_z": key[0],
                "ell": key[1],
                "count": len(grp),
                "mean_weak": float(np.mean([r["weak"] for r in grp])),
                "mean_strong": float(np.mean([r["strong"] for r in grp])),
                "mean_psi": float(np.mean([r["psi"] for r in grp])),
            }
            for key, grp in sorted(groups.items())
        ],
    }
    write_json(out / "aggregate.json", aggregate)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sparse-aa",
        description="Sparse archetypal analysis: generate, fit, evaluate.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("synth", help="generate a synthetic instance")
    ps.add_argument("--m", type=int, required=True)
    ps.add_argument("--n", type=int, required=True)
    ps.add_argument("--k", type=int, required=True)
    ps.add_argument("--sigma-z", dest="sigma_z", type=float, default=0.1)
    ps.add_argument("--zero-frac", dest="zero_frac", type=float, default=0.2)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=cmd_synth)

    pf = sub.add_parser("fit", help="run the fitting pipeline on a CSV matrix")
    pf.add_argument("--data", required=True, help="input X as headerless CSV")
    pf.add_argument("--k", type=int, required=True)
    pf.add_argument("--ell", type=int, required=True)
    pf.add_argument(
        "--lambda",
        dest="lam",
        default="log:30:1:8",
        help="penalty value or log:hi:lo:n schedule (default log:30:1:8)",
    )
    pf.add_argument("--eps-safeguard", dest="eps_safeguard", type=float, default=1e-6)
    pf.add_argument("--tol-objective", dest="tol_objective", type=float, default=1e-8)
    pf.add_argument("--tol-stationary", dest="tol_stationary", type=float, default=1e-7)
    pf.add_argument("--max-iter", dest="max_iter", type=int, default=10_000)
    pf.add_argument("--seed", type=int, default=0)
    pf.add_argument("--init", choices=["zero", "mip"], default="mip")
    pf.add_argument("--local-search", dest="local_search", choices=["on", "off"], default="off")
    pf.add_argument("--max-swaps", dest="max_swaps", type=int, default=100)
    pf.add_argument("--oa-rounds", dest="oa_rounds", type=int, default=50)
    pf.add_argument("--oa-tol-gap", dest="oa_tol_gap", type=float, default=1e-6)
    pf.add_argument("--oa-node-cap", dest="oa_node_cap", type=int, default=None)
    pf.add_argument(
        "--time-budget",
        dest="time_budget",
        type=float,
        default=None,
        help="outer-approximation wall-clock budget in seconds",
    )
    pf.add_argument("--out", required=True)
    pf.set_defaults(func=cmd_fit)

    pe = sub.add_parser("eval", help="evaluate fits against ground truth")
    pe.add_argument("--truth", required=True, help="directory from `synth`")
    pe.add_argument("--fit", action="append", required=True, help="directory from `fit`")
    pe.add_argument("--labels", default=None, help="optional true labels, one per line")
    pe.add_argument("--out", required=True)
    pe.set_defaults(func=cmd_eval)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
