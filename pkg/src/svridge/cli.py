"""Command-line interface: ``svridge {fit,simulate,scan,basis-dump}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .basis import design_matrix, make_basis
from .core import FitError, SvridgeError, default_output_dir, load_dataset
from .gic import approx_gic, default_gamma_grid, gamma_select
from .ridge import RidgeConfig, ridge_fit, ridge_gic, ridge_select
from .simlab import FUNCTIONS, METHODS, SimConfig, run_benchmark, run_trial, true_function
from .svreg import BOUNDARY_MODES, SvrOptions, svr_fit

log = logging.getLogger("svridge")

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2
GRID_1D = 512
GRID_2D = 64


class UsageError(SvridgeError):
    pass


def _floats(text):
    """Comma list ``a,b,c`` or log-spaced range ``lo:hi:k``."""
    try:
        if ":" in text:
            lo, hi, k = text.split(":")
            lo, hi, k = float(lo), float(hi), int(k)
            if lo <= 0 or hi <= 0 or k < 1:
                raise ValueError
            return [float(v) for v in np.logspace(np.log10(lo), np.log10(hi), k)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated numbers or lo:hi:k, got {text!r}") from None


class _HelpFormatter(argparse.HelpFormatter):
    # append the default unless the help text already explains it
    def _get_help_string(self, action):
        text = action.help or ""
        default = action.default
        if "(default" in text or default is None or default is False or default == argparse.SUPPRESS \
                or action.required:
            return text
        if isinstance(default, (list, tuple)):
            default = ",".join(map(str, default))
        return f"{text} (default: {default})"


def _domain(text):
    # "lo:hi" per dimension, dimensions separated by commas
    try:
        dom = [tuple(float(v) for v in part.split(":")) for part in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad domain {text!r}; use lo:hi[,lo:hi]") from None
    if any(len(d) != 2 or not d[0] < d[1] for d in dom):
        raise argparse.ArgumentTypeError(f"bad domain {text!r}; use lo:hi[,lo:hi] with lo < hi")
    return dom


def _fmt(v):
    return repr(float(v))


def _write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_csv(path, header, rows):
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _eval_grid(domain):
    if len(domain) == 1:
        return np.linspace(domain[0][0], domain[0][1], GRID_1D)[:, None]
    axes = [np.linspace(lo, hi, GRID_2D) for lo, hi in domain]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([a.ravel() for a in mesh])


def _curve_rows(spec, beta, truth_id=None):
    grid = _eval_grid(spec.domain)
    fitted = spec.evaluate(grid) @ beta
    cols = [grid[:, j] for j in range(grid.shape[1])] + [fitted]
    if truth_id is not None:
        cols.append(true_function(truth_id, grid))
    return [[_fmt(v) for v in row] for row in zip(*cols)]


def _curve_header(dims, truth=False):
    return [f"x{j + 1}" for j in range(dims)] + ["fitted"] + (["truth"] if truth else [])


def _outdir(args):
    out = Path(args.out) if args.out else default_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise UsageError(f"output directory not writable: {out}")
    return out


def _threads(args):
    return args.threads if args.threads else (os.cpu_count() or 1)


def _load(args):
    ds = load_dataset(args.dataset, args.x_columns, args.y_column, args.domain)
    spec = make_basis(ds.domain, args.m, args.width_scale)
    return ds, spec, design_matrix(spec, ds)


def _svr_options(args, g1=1.0, g2=1.0):
    return SvrOptions(g1, g2, tol=args.tol, max_iter=args.max_iter, boundary_mode=args.boundary_mode)


def run_fit(args):
    out = _outdir(args)
    ds, spec, dm = _load(args)
    notes = []
    if args.method == "ridge":
        if args.lam is None or args.select:
            lam, fit = ridge_select(dm, ds.ys, args.lambda_grid)
            notes.append(f"lambda selected by GIC: {lam!r}")
        else:
            fit = ridge_fit(dm, ds.ys, RidgeConfig(args.lam))
        if fit.gic is None or fit.gic.mode != args.gic_mode:
            fit = fit.with_gic(ridge_gic(dm, ds.ys, fit, args.gic_mode))
    else:
        if args.gamma1 is None or args.gamma2 is None or args.select:
            grid = _gamma_grid(args)
            gam, fit = gamma_select(dm, ds.ys, grid, _svr_options(args), n_jobs=_threads(args))
            notes.append(f"no gamma given: scanned {len(grid)} grid points, selected {list(gam)}")
        else:
            fit = svr_fit(dm, ds.ys, _svr_options(args, args.gamma1, args.gamma2))
        if fit.gic is None or fit.gic.mode != args.gic_mode:
            fit = fit.with_gic(approx_gic(dm, ds.ys, fit, mode=args.gic_mode))
    for msg in notes:
        print(msg, file=sys.stderr)
    doc = fit.to_dict()
    doc["basis"] = spec.to_dict()
    doc["notes"] = notes
    _write_json(out / "fit.json", doc)
    _write_json(out / "gic.json", fit.gic.to_dict())
    _write_csv(out / "curve.csv", _curve_header(spec.dims), _curve_rows(spec, fit.beta))
    print(json.dumps({"status": "ok", "out": str(out), "converged": fit.converged,
                      "gic": fit.gic.total}))
    return EXIT_OK


def _gamma_grid(args):
    if args.gamma1_grid is None and args.gamma2_grid is None:
        return default_gamma_grid()
    g1 = args.gamma1_grid or sorted({pair[0] for pair in default_gamma_grid()})
    g2 = args.gamma2_grid or sorted({pair[1] for pair in default_gamma_grid()})
    return [(a, b) for a in g1 for b in g2]


def run_scan(args):
    out = _outdir(args)
    ds, spec, dm = _load(args)
    grid = _gamma_grid(args)
    gam, best, scores = gamma_select(dm, ds.ys, grid, _svr_options(args),
                                     n_jobs=_threads(args), return_scores=True)
    header = ["gamma1", "gamma2", "gic", "neg2_loglik", "bias_term", "converged", "iterations"]
    truth = None
    if args.truth is not None:
        truth = true_function(args.truth, ds.xs)
        header.append("mse")
    rows = []
    for g1, g2, fit in scores:
        if fit is None:
            row = [_fmt(g1), _fmt(g2), "nan", "nan", "nan", "", ""]
            if truth is not None:
                row.append("nan")
        else:
            row = [_fmt(g1), _fmt(g2), _fmt(fit.gic.total), _fmt(fit.gic.neg2_loglik),
                   _fmt(fit.gic.bias_term), str(fit.converged), str(fit.iterations)]
            if truth is not None:
                row.append(_fmt(float(np.mean((dm.phi @ fit.beta - truth) ** 2))))
        rows.append(row)
    _write_csv(out / "scan.csv", header, rows)
    doc = best.to_dict()
    doc["selected"] = list(gam)
    _write_json(out / "scan_best.json", doc)
    print(json.dumps({"status": "ok", "out": str(out), "selected": list(gam)}))
    return EXIT_OK


def run_simulate(args):
    out = _outdir(args)
    cfg = SimConfig(
        function_id=args.function, n=args.n, alpha=args.alpha, trials=args.trials,
        seed=args.seed, methods=tuple(args.methods), m_per_dim=args.m,
        width_scale=args.width_scale, boundary_mode=args.boundary_mode,
        tol=args.tol, max_iter=args.max_iter,
        gamma_grid=None if args.gamma1_grid is None and args.gamma2_grid is None else _gamma_grid(args),
        lambda_grid=args.lambda_grid,
    )
    report = run_benchmark(cfg, n_jobs=_threads(args))
    # wall-clock time would break byte-identical reruns, so it only goes to stderr
    print(f"runtime: {report.runtime_s:.1f}s", file=sys.stderr)
    doc = report.to_dict()
    doc.pop("runtime_s")
    _write_json(out / "report.json", doc)
    header = ["trial"] + [f"mse_{m}" for m in cfg.methods] + [f"converged_{m}" for m in cfg.methods]
    rows = [[str(t["trial"])] + [_fmt(t["mse"][m]) for m in cfg.methods]
            + [str(t["converged"][m]) for m in cfg.methods] for t in report.trials]
    _write_csv(out / "trials.csv", header, rows)
    if report.trials:
        first = report.trials[0]["trial"]
        _, fits, _ = run_trial(cfg, first, keep_fits=True)
        spec = cfg.basis()
        for method, fit in fits.items():
            _write_csv(out / f"curve_{method}.csv", _curve_header(spec.dims, truth=True),
                       _curve_rows(spec, fit.beta, cfg.function_id))
    print(json.dumps({"status": report.status, "out": str(out), "summary": report.summary}))
    return EXIT_OK if report.status == "ok" else EXIT_NUMERIC


def run_basis_dump(args):
    out = _outdir(args)
    spec = make_basis(args.domain, args.m, args.width_scale)
    header = ["index"] + [f"c{j + 1}" for j in range(spec.dims)] + ["width"]
    rows = [[str(i)] + [_fmt(v) for v in c] + [_fmt(spec.width)] for i, c in enumerate(spec.centers)]
    _write_csv(out / "basis.csv", header, rows)
    _write_json(out / "basis.json", spec.to_dict())
    print(json.dumps({"status": "ok", "out": str(out), "m": spec.m}))
    return EXIT_OK


def _common(p, dataset=True):
    if dataset:
        p.add_argument("dataset", help="CSV file with x1[,x2] and y columns")
        p.add_argument("--x-columns", type=lambda s: s.split(","), default=None,
                       help="design columns (default: every x<k> column)")
        p.add_argument("--y-column", default="y", help="response column (default: %(default)s)")
        p.add_argument("--domain", type=_domain, default=None,
                       help="basis domain lo:hi[,lo:hi] (default: data range)")
    p.add_argument("--m", type=int, default=None,
                   help="centres per dimension (default: 1-d 30, 2-d 10)")
    p.add_argument("--width-scale", type=float, default=1.0,
                   help="RBF width in grid spacings (default: %(default)s)")
    p.add_argument("--out", default=None,
                   help="output directory (default: $SVRIDGE_OUTPUT_DIR or the current directory)")


def _fitting(p):
    p.add_argument("--boundary-mode", "--boundary", dest="boundary_mode", choices=BOUNDARY_MODES, default="paper",
                   help="lambda update at edge centres (default: %(default)s)")
    p.add_argument("--tol", type=float, default=1e-6, help="convergence tolerance (default: %(default)s)")
    p.add_argument("--max-iter", type=int, default=500, help="iteration cap (default: %(default)s)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes for grid points/trials (default: all CPUs)")


GAMMA_GRID_HELP = "1e-6:1:7"
LAMBDA_GRID_HELP = "1e-8:1e2:25"


def build_parser():
    parser = argparse.ArgumentParser(prog="svridge", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a dataset with ridge or the smoothly varying ridge",
                       formatter_class=_HelpFormatter)
    _common(p)
    _fitting(p)
    p.add_argument("--method", choices=METHODS, default="svr", help="estimator")
    p.add_argument("--select", action="store_true",
                   help="choose lambda (ridge) or gamma (svr) by GIC even if values are given")
    p.add_argument("--lam", "--lambda", dest="lam", type=float, default=None,
                   help="fixed ridge lambda (default: chosen by GIC)")
    p.add_argument("--lambda-grid", type=_floats, default=None,
                   help=f"ridge lambda grid (default: {LAMBDA_GRID_HELP})")
    p.add_argument("--gamma1", type=float, default=None, help="fixed gamma1 (default: scan the grid)")
    p.add_argument("--gamma2", type=float, default=None, help="fixed gamma2 (default: scan the grid)")
    p.add_argument("--gamma1-grid", type=_floats, default=None,
                   help=f"gamma1 values to scan (default: {GAMMA_GRID_HELP})")
    p.add_argument("--gamma2-grid", type=_floats, default=None,
                   help=f"gamma2 values to scan (default: {GAMMA_GRID_HELP})")
    p.add_argument("--gic-mode", choices=("expected", "empirical"), default="expected",
                   help="GIC variant reported")
    p.set_defaults(func=run_fit)

    p = sub.add_parser("scan", help="GIC over a (gamma1, gamma2) grid",
                       formatter_class=_HelpFormatter)
    _common(p)
    _fitting(p)
    p.add_argument("--gamma1-grid", type=_floats, default=None,
                   help=f"gamma1 values (default: {GAMMA_GRID_HELP})")
    p.add_argument("--gamma2-grid", type=_floats, default=None,
                   help=f"gamma2 values (default: {GAMMA_GRID_HELP})")
    p.add_argument("--truth", choices=tuple(FUNCTIONS), default=None,
                   help="known true function; adds an mse column (default: none)")
    p.set_defaults(func=run_scan)

    p = sub.add_parser("simulate", help="Monte-Carlo comparison on a synthetic function",
                       formatter_class=_HelpFormatter)
    _common(p, dataset=False)
    _fitting(p)
    p.add_argument("--function", required=True, choices=tuple(FUNCTIONS),
                   help="true function")
    p.add_argument("--n", type=int, default=100, help="sample size")
    p.add_argument("--alpha", type=float, default=0.05, help="noise variance")
    p.add_argument("--trials", type=int, default=20, help="Monte-Carlo trials")
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--methods", type=lambda s: s.split(","), default=list(METHODS),
                   help="comma-separated subset of svr,ridge")
    p.add_argument("--lambda-grid", type=_floats, default=None,
                   help=f"ridge lambda grid (default: {LAMBDA_GRID_HELP})")
    p.add_argument("--gamma1-grid", type=_floats, default=None,
                   help=f"gamma1 values (default: {GAMMA_GRID_HELP})")
    p.add_argument("--gamma2-grid", type=_floats, default=None,
                   help=f"gamma2 values (default: {GAMMA_GRID_HELP})")
    p.set_defaults(func=run_simulate)

    p = sub.add_parser("basis-dump", help="write basis centres and width as CSV",
                       formatter_class=_HelpFormatter)
    _common(p, dataset=False)
    p.add_argument("--domain", type=_domain, required=True, help="lo:hi[,lo:hi]")
    p.set_defaults(func=run_basis_dump)
    return parser


def _fail(code, exc):
    print(json.dumps({"error": str(exc), "type": type(exc).__name__, "exit": code}), file=sys.stderr)
    return code


def _join_domain(argv):
    # "--domain -2:2" would otherwise be read as an unknown option
    out = []
    it = iter(argv)
    for tok in it:
        if tok == "--domain":
            nxt = next(it, None)
            out.append(tok if nxt is None else f"--domain={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_join_domain(argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", None) is not None and args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except FitError as exc:
        return _fail(EXIT_NUMERIC, exc)
    except (SvridgeError, ValueError, OSError) as exc:
        return _fail(EXIT_USAGE, exc)


if __name__ == "__main__":
    sys.exit(main())
