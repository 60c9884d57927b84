"""Command-line interface: ``farseer <command> ...``.

Every command writes a CSV table to stdout (preceded by ``# key: value``
summary lines) and, with ``--report PATH``, a JSON report. Exit status is 0 on
success, 1 on usage errors and 2 on data or fitting errors.
"""

from __future__ import annotations

import argparse
import math
import sys
import warnings
from dataclasses import asdict

import numpy as np

from ._version import __version__
from .analysis import (
    allocation_sweep,
    budgets_per_decade,
    differential_perspectives,
    evaluate_held_out,
    fit_law,
    robustness_curve,
    surface_compare,
)
from .core import REFERENCE_FARSEER, ChinchillaParams, FarseerParams, evaluate
from .errors import FarseerError
from .io import LawFile, format_table, grid_digest, load_grid, load_law, save_grid, save_law, write_json
from .nonlinear import MultiStartConfig
from .piecewise import FitWarning
from .synth import REFERENCE_D_LADDER, REFERENCE_N_LADDER, SurfaceSpec, generate_surface

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("expected at least one number")
    return values


def _pair(text: str) -> tuple[float, float]:
    values = _floats(text)
    if len(values) != 2:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}")
    return values[0], values[1]


def _triple(text: str) -> tuple[float, float, float]:
    values = _floats(text)
    if len(values) != 3:
        raise argparse.ArgumentTypeError(f"expected LO,HI,RATIO, got {text!r}")
    return values[0], values[1], values[2]


def _params(text: str) -> dict[str, float]:
    out = {}
    for item in text.split(","):
        if not item.strip():
            continue
        key, sep, value = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {item!r}")
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"parameter {key!r} is not a number") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="farseer", description="Fit and analyse neural scaling laws.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--report", metavar="PATH", help="write a JSON report here")
        return sp

    def multistart(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--starts", type=int, default=256)
        sp.add_argument("--objective", choices=("squared", "squared-log"), default="squared")

    f = common(sub.add_parser("fit", help="fit a law to a grid file"))
    f.add_argument("--family", choices=("farseer", "chinchilla"), default="farseer")
    f.add_argument("--method", choices=("piecewise", "nonlinear"), default="piecewise")
    f.add_argument("--grid", required=True)
    f.add_argument("--out", required=True, help="law file to write")
    f.add_argument("--lam", type=float, default=math.sqrt(2.0), help="grid ladder ratio")
    multistart(f)

    pr = common(sub.add_parser("predict", help="evaluate a saved law"))
    pr.add_argument("--law", required=True)
    pr.add_argument("--n", type=_floats, required=True, help="model size(s), comma-separated")
    pr.add_argument("--d", type=_floats, required=True, help="token count(s), comma-separated")

    e = common(sub.add_parser("eval", help="relative error of a law on a grid"))
    e.add_argument("--law", required=True)
    e.add_argument("--grid", required=True)

    r = common(sub.add_parser("robustness", help="held-out error against the fitting cap"))
    r.add_argument("--grid", required=True)
    r.add_argument("--held-out-n", type=float, required=True)
    r.add_argument("--caps", type=_floats, required=True)
    r.add_argument("--family", choices=("farseer", "chinchilla"), default="farseer")
    r.add_argument("--method", choices=("piecewise", "nonlinear"), default="piecewise")
    r.add_argument("--lam", type=float, default=math.sqrt(2.0))
    multistart(r)

    o = common(sub.add_parser("optimal", help="compute-optimal allocation sweep"))
    o.add_argument("--law", required=True)
    o.add_argument("--c-min", type=float, required=True)
    o.add_argument("--c-max", type=float, required=True)
    o.add_argument("--per-decade", type=int, default=1)
    o.add_argument("--flop-factor", type=float, default=6.0)

    dg = common(sub.add_parser("diagnose", help="differential perspectives and residuals"))
    dg.add_argument("--grid", required=True)
    dg.add_argument("--law", help="score residuals against this law instead of a fresh fit")
    dg.add_argument("--residuals", metavar="PATH", help="write the residual series here")
    dg.add_argument("--lam", type=float, default=math.sqrt(2.0))

    c = common(sub.add_parser("compare", help="relative difference of two laws on a lattice"))
    c.add_argument("--law-a", required=True)
    c.add_argument("--law-b", required=True)
    c.add_argument("--n-range", type=_pair, default=(1e8, 1e12))
    c.add_argument("--d-range", type=_pair, default=(1e9, 1e13))
    c.add_argument("--resolution", type=int, default=50)
    c.add_argument("--crossings", metavar="PATH", help="write the sign-change points here")

    s = common(sub.add_parser("synth", help="generate a synthetic grid file"))
    s.add_argument("--family", choices=("farseer", "chinchilla"), default="farseer")
    s.add_argument("--params", type=_params, default={},
                   help="NAME=VALUE overrides (farseer defaults to the published fit)")
    s.add_argument("--n-ladder", type=_triple, default=REFERENCE_N_LADDER)
    s.add_argument("--d-ladder", type=_triple, default=REFERENCE_D_LADDER)
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--noise-decay", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    return p


def _config(args) -> MultiStartConfig:
    return MultiStartConfig(starts=args.starts, seed=args.seed, objective=args.objective)


def _emit(args, out, table: str, report: dict) -> None:
    out.write(table)
    if args.report:
        write_json(report, args.report)


def cmd_fit(args, out):
    grid = load_grid(args.grid, args.lam)
    cfg = _config(args) if args.method == "nonlinear" else None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FitWarning)
        law, report = fit_law(grid, args.family, args.method, cfg)
    config = {"family": args.family, "method": args.method, "lam": args.lam}
    if cfg is not None:
        config.update(asdict(cfg))
    law_file = LawFile(law, args.method, grid_digest(grid), config, list(report.warnings))
    save_law(law_file, args.out)
    summary = {"family": args.family, "method": args.method, "points": len(grid),
               "mean_rel_err": report.mean_rel_err, "max_rel_err": report.max_rel_err, "rss": report.rss}
    rows = zip(report.n, report.d, report.actual, report.predicted, report.rel_err)
    _emit(args, out, format_table(("n", "d", "actual", "predicted", "rel_err"),
                                  ([float(v) for v in row] for row in rows), summary),
          {**summary, "law": law_file.to_dict(), "provenance": report.provenance})


def cmd_predict(args, out):
    law = load_law(args.law).law
    ns, ds = np.broadcast_arrays(np.array(args.n), np.array(args.d))
    rows = [(float(n), float(d), float(evaluate(law, float(n), float(d)))) for n, d in zip(ns, ds)]
    _emit(args, out, format_table(("n", "d", "loss"), rows),
          {"rows": [dict(zip(("n", "d", "loss"), r)) for r in rows]})


def cmd_eval(args, out):
    law = load_law(args.law).law
    grid = load_grid(args.grid)
    rep = evaluate_held_out(law, list(grid), f"all points of {args.grid}")
    summary = {"points": len(grid), "mean_rel_err": rep.mean_rel_err, "max_rel_err": rep.max_rel_err}
    _emit(args, out, format_table(("n", "d", "actual", "predicted", "rel_err"), rep.held_out, summary),
          {**summary, "rows": rep.held_out})


def cmd_robustness(args, out):
    grid = load_grid(args.grid, args.lam)
    cfg = _config(args) if args.method == "nonlinear" else None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", FitWarning)
        curve = robustness_curve(grid, args.held_out_n, args.caps, args.method, args.family, cfg)
    skipped = [str(w.message) for w in caught if issubclass(w.category, FitWarning)]
    for msg in skipped:
        print(f"warning: {msg}", file=sys.stderr)
    rows = [(cap, rep.mean_rel_err, rep.max_rel_err) for cap, rep in curve]
    _emit(args, out, format_table(("cap", "mean_rel_err", "max_rel_err"), rows,
                                  {"held_out_n": args.held_out_n, "family": args.family, "method": args.method}),
          {"held_out_n": args.held_out_n, "curve": [dict(zip(("cap", "mean_rel_err", "max_rel_err"), r))
                                                    for r in rows], "skipped": skipped})


def cmd_optimal(args, out):
    law = load_law(args.law).law
    budgets = budgets_per_decade(args.c_min, args.c_max, args.per_decade)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FitWarning)
        sweep = allocation_sweep(law, budgets, args.flop_factor)
    for pt in sweep:
        if pt.at_boundary:
            print(f"warning: optimum for C={pt.c:.3g} lies on the model-size search boundary", file=sys.stderr)
    cols = ("c", "n_star", "d_star", "ratio", "loss_at_opt", "at_boundary")
    rows = [tuple(getattr(pt, k) for k in cols) for pt in sweep]
    _emit(args, out, format_table(cols, rows, {"flop_factor": args.flop_factor}),
          {"flop_factor": args.flop_factor, "sweep": [asdict(pt) for pt in sweep]})


def cmd_diagnose(args, out):
    grid = load_grid(args.grid, args.lam)
    perspectives = differential_perspectives(grid)
    rows = [(p.name, p.available, p.mean_r2, p.series) for p in perspectives.values()]
    if args.law:
        law = load_law(args.law).law
        n, d, loss = grid.arrays()
        pred = np.asarray(evaluate(law, n, d), dtype=float)
        residuals = [(float(a), float(b), float(c - e)) for a, b, c, e in zip(n, d, loss, pred)]
        res_cols = ("n", "d", "residual")
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", FitWarning)
            _, report = fit_law(grid, "farseer", "piecewise")
        residuals = [(n, d, v) for (n, d), v in sorted(report.diagnostics.centered.items())]
        res_cols = ("n", "d", "centered_residual")
    if args.residuals:
        with open(args.residuals, "w", encoding="utf-8") as fh:
            fh.write(format_table(res_cols, residuals))
    _emit(args, out, format_table(("perspective", "available", "mean_r2", "series"), rows),
          {"perspectives": [dict(zip(("name", "available", "mean_r2", "series"), r)) for r in rows],
           "residuals": [dict(zip(res_cols, r)) for r in residuals]})


def cmd_compare(args, out):
    law_a = load_law(args.law_a).law
    law_b = load_law(args.law_b).law
    sd = surface_compare(law_a, law_b, args.n_range, args.d_range, args.resolution)
    if args.crossings:
        with open(args.crossings, "w", encoding="utf-8") as fh:
            fh.write(format_table(("n", "d"), sd.zero_crossings))
    summary = {"min_delta": float(np.min(sd.delta)), "max_delta": float(np.max(sd.delta)),
               "zero_crossings": len(sd.zero_crossings)}
    _emit(args, out, format_table(("n", "d", "delta"), sd.rows(), summary),
          {**summary, "crossings": sd.zero_crossings})


def cmd_synth(args, out):
    if args.family == "farseer":
        params = FarseerParams(**{**REFERENCE_FARSEER.as_dict(), **args.params})
    else:
        missing = set(ChinchillaParams.NAMES) - set(args.params)
        if missing:
            raise UsageError(f"chinchilla synth needs --params for {sorted(missing)}")
        params = ChinchillaParams(**args.params)
    spec = SurfaceSpec(params, tuple(args.n_ladder), tuple(args.d_ladder), args.noise, args.seed, args.noise_decay)
    grid = generate_surface(spec)
    save_grid(grid, args.out)
    summary = {"family": args.family, "points": len(grid), "model_sizes": len(grid.model_sizes),
               "sha256": grid_digest(grid)}
    _emit(args, out, format_table(("key", "value"), summary.items()),
          {**summary, "params": params.as_dict(), "noise": args.noise, "seed": args.seed})


COMMANDS = {
    "fit": cmd_fit, "predict": cmd_predict, "eval": cmd_eval, "robustness": cmd_robustness,
    "optimal": cmd_optimal, "diagnose": cmd_diagnose, "compare": cmd_compare, "synth": cmd_synth,
}


def run_cli(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "starts", 1) < 1:
            raise UsageError("--starts must be at least 1")
        COMMANDS[args.command](args, out)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:  # output piped into e.g. `head`
        return EXIT_OK
    except (FarseerError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main() -> None:  # pragma: no cover
    sys.exit(run_cli())
