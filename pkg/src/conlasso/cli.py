"""Batch command-line interface.

Subcommands ``synth``, ``solve``, ``path``, ``cv``, ``stabsel`` and
``plotdata``. Run settings come from an optional JSON ``--config`` whose keys
are the long flag names with dashes replaced by underscores; explicit flags
override the file.

Exit codes: 0 ok, 2 usage, 3 I/O, 4 solver did not converge, 5 missing
inputs for ``plotdata``.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from typing import Optional

import numpy as np

from . import data as dio
from .errors import (ConlassoError, FoldTooSmall, IncompatibleMethodError, MaxIterExceeded,
                     ProblemValidationError, SubsampleTooSmall)
from .problem import Formulation, Kind, ProblemData, Solution
from .selection import (CVPlan, FixedLambdaPlan, PathPlan, StabSelPlan, run_cv,
                        run_fixed_lambda, run_path, run_stability_selection)
from .solvers import Method, SolverConfig, compute_lambda_max, kkt_residual

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NOCONV, EXIT_MISSING = 0, 2, 3, 4, 5

DEFAULTS = dict(
    formulation="R3", rho=1.345, rho_class=-1.0, method=None, lam=None, rescaled=False,
    lam_min_ratio=1e-2, folds=5, rule="1se", mode="first-q", q=10, B=50, threshold=0.7,
    seed=0, threads=None, out="results", x=None, y=None, c=None, features=None,
    response=None, response_file=None, compositional=None, pseudocount=0.5,
    max_iter=100000, tol=1e-8, grid_size=80, num_grid=40, subsample_fraction=0.5,
)

METHOD_FLAGS = {"path-alg": Method.PATH_ALG, "dr": Method.DR, "p-pds": Method.PPDS,
                "pf-pds": Method.PFPDS}
MODE_FLAGS = {"fixed-lam": "FixedLam", "first-q": "FirstQ", "max-coef": "MaxCoef"}
RULE_FLAGS = {"min": "MinMSE", "1se": "OneSE"}


class UsageError(Exception):
    pass


# --- argument parsing -----------------------------------------------------------------

def _shared(p: argparse.ArgumentParser):
    g = p.add_argument_group("data")
    g.add_argument("--x", help="design matrix CSV (header row, one column per feature)")
    g.add_argument("--y", help="response CSV (single column with header)")
    g.add_argument("--c", help="constraint matrix CSV (one row per constraint)")
    g.add_argument("--features", help="feature table CSV with named columns")
    g.add_argument("--response", help="response column name in --features or --response-file")
    g.add_argument("--response-file", dest="response_file", help="separate CSV holding --response")
    g.add_argument("--compositional",
                   help="comma-separated compositional column names of --features "
                        "(pseudocount, closure, log, zero-sum row)")
    g.add_argument("--pseudocount", type=float, help="added to compositional counts (default 0.5)")
    g.add_argument("--config", help="JSON run configuration; flags override its values")
    g.add_argument("--out", help="output directory (default ./results)")
    g.add_argument("--seed", type=int, help="seed for folds and subsamples (default 0)")
    g.add_argument("--threads", type=int, help="worker threads for folds/subsamples")
    f = p.add_argument_group("formulation and solver")
    f.add_argument("--formulation", choices=[k.value for k in Kind], help="problem kind (default R3)")
    f.add_argument("--rho", type=float, help="Huber threshold for R2/R4 (default 1.345)")
    f.add_argument("--rho-class", dest="rho_class", type=float,
                   help="knee of the huberized hinge for C2 (default -1)")
    f.add_argument("--method", choices=sorted(METHOD_FLAGS), help="override the automatic solver")
    f.add_argument("--max-iter", dest="max_iter", type=int, help="iteration cap (default 100000)")
    f.add_argument("--tol", type=float, help="iterate-change tolerance (default 1e-8)")
    m = p.add_argument_group("model selection")
    m.add_argument("--lam", help="penalty level, a proportion with --rescaled, or 'theory'")
    m.add_argument("--rescaled", action="store_true", default=None,
                   help="interpret --lam as a fraction of lambda max")
    m.add_argument("--lam-min-ratio", dest="lam_min_ratio", type=float,
                   help="path end as a fraction of lambda max (default 0.01)")
    m.add_argument("--folds", type=int, help="cross-validation folds (default 5)")
    m.add_argument("--rule", choices=sorted(RULE_FLAGS), help="CV selection rule (default 1se)")
    m.add_argument("--mode", choices=sorted(MODE_FLAGS), help="stability selection mode (default first-q)")
    m.add_argument("--q", type=int, help="features per subsample in path modes (default 10)")
    m.add_argument("--B", type=int, help="number of subsamples (default 50)")
    m.add_argument("--threshold", type=float, help="selection frequency threshold (default 0.7)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conlasso",
                                description="Sparse regression and classification under C beta = 0.")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("synth", help="write a synthetic instance")
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--d", type=int, default=100)
    s.add_argument("--nonzero", type=int, default=5)
    s.add_argument("--k", type=int, default=1)
    s.add_argument("--sigma", type=float, default=0.5)
    s.add_argument("--zerosum", action="store_true")
    s.add_argument("--magnitude", type=float, default=dio.SyntheticSpec.magnitude,
                   help="scale of the planted coefficients")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    for name, text in [("solve", "fixed-lambda solve"), ("path", "regularization path"),
                       ("cv", "cross-validation"), ("stabsel", "stability selection")]:
        _shared(sub.add_parser(name, help=text))
    pd = sub.add_parser("plotdata", help="long-format CSV for plotting a result directory")
    pd.add_argument("result_dir")
    pd.add_argument("--kind", required=True,
                    choices=["coefficients", "path", "stabsel-profile", "cv-curve"])
    pd.add_argument("--out", help="output CSV (default <result_dir>/plot_<kind>.csv)")
    return p


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except OSError as exc:
            raise OSError(f"cannot read config {args.config}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config} is not valid JSON: {exc}") from None
        unknown = set(file_cfg) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    return cfg


# --- data and plans ----------------------------------------------------------------------

def load_problem(cfg: dict):
    """``(ProblemData, feature names)`` from the configured source."""
    if cfg["features"]:
        if not cfg["response"]:
            raise UsageError("--features needs --response")
        comp = cfg["compositional"] or ()
        if isinstance(comp, str):
            comp = [c.strip() for c in comp.split(",") if c.strip()]
        ds = dio.load_dataset(cfg["features"], cfg["response"],
                              dio.DatasetOptions(compositional=tuple(comp),
                                                 pseudocount=float(cfg["pseudocount"])),
                              response_file=cfg["response_file"])
        return ProblemData(ds.X, ds.y, ds.C), ds.feature_names
    if not (cfg["x"] and cfg["y"]):
        raise UsageError("a data source is required: --x/--y[/--c] or --features/--response")
    hx, X = dio.read_table(cfg["x"])
    _, Y = dio.read_table(cfg["y"])
    if Y.ndim != 2 or Y.shape[1] != 1:
        raise dio.DataFormatError(f"{cfg['y']}: expected a single response column")
    C = None
    if cfg["c"]:
        _, C = dio.read_table(cfg["c"])
        if C.shape[0] == 0:
            C = None
    return ProblemData(X, Y[:, 0], C), hx


def formulation_of(cfg) -> Formulation:
    return Formulation(Kind(cfg["formulation"]), rho=float(cfg["rho"]),
                       rho_class=float(cfg["rho_class"]))


def solver_config(cfg) -> SolverConfig:
    m = cfg["method"]
    method = None if m is None else METHOD_FLAGS.get(m, m)
    return SolverConfig(method=method, max_iter=int(cfg["max_iter"]), tol=float(cfg["tol"]),
                        path_lambda_min_ratio=float(cfg["lam_min_ratio"]))


def lam_setting(cfg):
    lam = cfg["lam"]
    if lam is None:
        return 0.1, True
    if lam == "theory":
        return "theory", True
    try:
        return float(lam), bool(cfg["rescaled"])
    except (TypeError, ValueError):
        raise UsageError(f"--lam must be a number or 'theory', got {lam!r}") from None


def _threads(cfg):
    return cfg["threads"] if cfg["threads"] is not None else (os.cpu_count() or 1)


# --- reporting --------------------------------------------------------------------------

def report(title: str, elapsed: float, selected=None, extra=()):
    print(f" {title} : ")
    if selected is not None:
        print("   Selected variables : " + "".join(f" {int(j)}    " for j in selected))
    for line in extra:
        print(f"   {line}")
    print(f"   Running time : {elapsed:.3f}s")
    print()


def selected_of(beta):
    return [int(j) for j in np.flatnonzero(np.abs(beta) > 1e-8)]


def summary_for(task, cfg, form, method, lam, lam_max, sol: Optional[Solution], selected,
                runtime, kkt=None, **extra):
    s = dict(task=task, formulation=form.kind.value, method=method,
             **{"lambda": dio._num(lam)}, lambda_max=dio._num(lam_max),
             objective=dio._num(sol.objective) if sol is not None else None,
             sigma=dio._num(sol.sigma) if sol is not None and sol.sigma is not None else None,
             selected=[int(j) for j in selected], runtime_seconds=float(runtime),
             iterations=(int(sol.diagnostics["iterations"]) if sol is not None
                         and sol.diagnostics.get("iterations") is not None else None),
             kkt_residual=dio._num(kkt), seed=int(cfg["seed"]))
    s.update(extra)
    return s


def _warn_unconverged(count):
    if count:
        print(f"warning: {count} inner solves stopped at --max-iter; their last iterates were used",
              file=sys.stderr)


def _kkt(problem, form, sol):
    try:
        return kkt_residual(problem, form, sol.beta, sol.lam, sol.sigma)[0]
    except Exception:  # a certificate failure must not abort the run
        return None


# --- commands --------------------------------------------------------------------------------

def cmd_synth(args) -> int:
    spec = dio.SyntheticSpec(n=args.n, d=args.d, d_nonzero=args.nonzero, k=args.k,
                             sigma=args.sigma, zerosum=args.zerosum, seed=args.seed,
                             magnitude=args.magnitude)
    X, C, y, beta = dio.random_data(spec)
    os.makedirs(args.out, exist_ok=True)
    names = [f"x{j}" for j in range(spec.d)]
    dio.write_matrix(os.path.join(args.out, "X.csv"), X, names)
    dio.write_matrix(os.path.join(args.out, "y.csv"), y[:, None], ["y"])
    with open(os.path.join(args.out, "C.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in C:
            w.writerow([dio.fmt(v) for v in row])
    truth = dict(support=[int(j) for j in np.flatnonzero(beta)],
                 beta=[float(v) for v in beta], spec=spec.__dict__)
    with open(os.path.join(args.out, "truth.json"), "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=2)
        fh.write("\n")
    print(f"Relevant variables  : {truth['support']}")
    return EXIT_OK


def cmd_solve(cfg) -> int:
    problem, names = load_problem(cfg)
    form = formulation_of(cfg)
    lam, rescaled = lam_setting(cfg)
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        sol = run_fixed_lambda(problem, form, FixedLambdaPlan(lam, rescaled), solver_config(cfg))
    except MaxIterExceeded as exc:
        sol, code = exc.solution, EXIT_NOCONV
        sol.diagnostics.setdefault("lambda_max", compute_lambda_max(problem, form))
    elapsed = time.perf_counter() - t0
    sel = selected_of(sol.beta)
    summ = summary_for("solve", cfg, form, sol.diagnostics.get("method", sol.diagnostics.get("solver")),
                       sol.lam, sol.diagnostics.get("lambda_max"), sol, sel, elapsed,
                       _kkt(problem, form, sol), converged=bool(sol.diagnostics.get("converged")),
                       lam_ratio=sol.diagnostics.get("lam_ratio"),
                       feasibility=sol.diagnostics.get("feasibility"))
    dio.save_results(sol, cfg["out"], summ, names)
    report("LAMBDA FIXED", elapsed, sel)
    return code


def cmd_path(cfg) -> int:
    problem, names = load_problem(cfg)
    form = formulation_of(cfg)
    t0 = time.perf_counter()
    pth = run_path(problem, form, PathPlan(float(cfg["lam_min_ratio"]), int(cfg["num_grid"])),
                   solver_config(cfg))
    elapsed = time.perf_counter() - t0
    summ = summary_for("path", cfg, form, pth.method, None, pth.lambda_max, None,
                       selected_of(pth.betas[:, -1]), elapsed, converged=True,
                       breakpoints=int(len(pth)), lambda_min=float(pth.lambdas[-1]))
    dio.save_results(pth, cfg["out"], summ, names)
    report("PATH COMPUTATION", elapsed)
    return EXIT_OK


def cmd_cv(cfg) -> int:
    problem, names = load_problem(cfg)
    form = formulation_of(cfg)
    plan = CVPlan(folds=int(cfg["folds"]), grid_size=int(cfg["grid_size"]),
                  rule=RULE_FLAGS.get(cfg["rule"], cfg["rule"]), seed=int(cfg["seed"]),
                  lambda_min_ratio=float(cfg["lam_min_ratio"]))
    t0 = time.perf_counter()
    res = run_cv(problem, form, plan, solver_config(cfg), threads=_threads(cfg))
    elapsed = time.perf_counter() - t0
    sol = res.solution
    sel = selected_of(sol.beta)
    summ = summary_for("cv", cfg, form, sol.diagnostics.get("method"), res.lambda_chosen,
                       res.lambda_max, sol, sel, elapsed, _kkt(problem, form, sol),
                       converged=bool(sol.diagnostics.get("converged")), rule=res.rule.value,
                       lambda_min_error=res.lambda_min, lambda_1se=res.lambda_1se,
                       folds=plan.folds, unconverged_solves=res.diagnostics["unconverged"])
    _warn_unconverged(res.diagnostics["unconverged"])
    dio.save_results(res, cfg["out"], summ, names)
    report("CROSS VALIDATION", elapsed, sel,
           [f"Selected lambda : {res.lambda_chosen:.6g} ({res.rule.value})"])
    return EXIT_OK


def cmd_stabsel(cfg) -> int:
    problem, names = load_problem(cfg)
    form = formulation_of(cfg)
    lam, rescaled = lam_setting(cfg)
    plan = StabSelPlan(mode=MODE_FLAGS.get(cfg["mode"], cfg["mode"]), q=int(cfg["q"]),
                       B=int(cfg["B"]), subsample_fraction=float(cfg["subsample_fraction"]),
                       threshold=float(cfg["threshold"]), seed=int(cfg["seed"]), lam=lam,
                       rescaled=rescaled, lambda_min_ratio=float(cfg["lam_min_ratio"]))
    t0 = time.perf_counter()
    res = run_stability_selection(problem, form, plan, solver_config(cfg), threads=_threads(cfg))
    elapsed = time.perf_counter() - t0
    summ = summary_for("stabsel", cfg, form, res.diagnostics.get("method"), res.lam,
                       compute_lambda_max(problem, form), None, res.selected, elapsed,
                       converged=True, mode=res.mode.value, threshold=res.threshold,
                       q=plan.q, B=plan.B, unconverged_solves=res.diagnostics["unconverged"])
    _warn_unconverged(res.diagnostics["unconverged"])
    dio.save_results(res, cfg["out"], summ, names)
    report("STABILITY SELECTION", elapsed, res.selected)
    return EXIT_OK


def _plot_rows(result_dir, kind):
    need = {"coefficients": "beta.csv", "path": "path.csv", "stabsel-profile": "stabsel.csv",
            "cv-curve": "cv.csv"}[kind]
    if not os.path.exists(os.path.join(result_dir, need)):
        return None, need
    rows = []
    if kind == "coefficients":
        beta, names = dio.read_beta(result_dir)
        rows = [("beta", j, v, nm) for j, (v, nm) in enumerate(zip(beta, names))]
    elif kind == "path":
        lams, betas, _, names = dio.read_path(result_dir)
        rows = [(f"feature_{j}", lam, betas[j, i], names[j])
                for j in range(betas.shape[0]) for i, lam in enumerate(lams)]
    elif kind == "stabsel-profile":
        freq, sel, names = dio.read_stabsel(result_dir)
        rows = [("frequency", j, f, names[j]) for j, f in enumerate(freq)]
        thr = None
        if os.path.exists(os.path.join(result_dir, "summary.json")):
            thr = dio.read_summary(result_dir).get("threshold")
        if thr is not None:
            rows.append(("threshold", "", thr, "threshold"))
    else:
        lams, mean, se = dio.read_cv(result_dir)
        rows = [("mean_error", l, m, "") for l, m in zip(lams, mean)]
        rows += [("mean_plus_se", l, m + s, "") for l, m, s in zip(lams, mean, se)]
        rows += [("mean_minus_se", l, m - s, "") for l, m, s in zip(lams, mean, se)]
        if os.path.exists(os.path.join(result_dir, "summary.json")):
            summ = dio.read_summary(result_dir)
            for key, label in (("lambda_min_error", "lambda_min"), ("lambda_1se", "lambda_1se")):
                lv = summ.get(key)
                if lv is not None:
                    i = int(np.argmin(np.abs(lams - lv)))
                    rows.append(("marker", lams[i], mean[i], label))
    return rows, need


def cmd_plotdata(args) -> int:
    rows, need = _plot_rows(args.result_dir, args.kind)
    if rows is None:
        print(f"error: {args.kind} needs {need} in {args.result_dir}", file=sys.stderr)
        return EXIT_MISSING
    out = args.out or os.path.join(args.result_dir, f"plot_{args.kind.replace('-', '_')}.csv")
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", "x", "y", "label"])
        for series, x, y, label in rows:
            xs = dio.fmt(x) if isinstance(x, (float, np.floating)) else x
            w.writerow([series, xs, dio.fmt(y), label])
    print(out)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "path": cmd_path, "cv": cmd_cv, "stabsel": cmd_stabsel}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on bad usage
    try:
        if args.command == "synth":
            return cmd_synth(args)
        if args.command == "plotdata":
            return cmd_plotdata(args)
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except (UsageError, ProblemValidationError, IncompatibleMethodError, FoldTooSmall,
            SubsampleTooSmall) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MaxIterExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except (OSError, dio.DataFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ConlassoError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
