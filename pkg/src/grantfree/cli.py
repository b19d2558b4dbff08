"""``grantfree`` command line: fig2, fig3, optimize, validate, rerun.

Exit codes: 0 success, 1 config error, 2 numerical failure, 3 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import tempfile
import warnings
from pathlib import Path

from . import __version__
from .amp import AmpDivergenceError, StateEvolutionError
from .bler import QuadratureError
from .config import ConfigError, load, write_manifest
from .pilot import optimize_pilot_length
from .reproduce import FIG2_COLUMNS, FIG3_COLUMNS, fig2_rows, fig3_rows, find_crossing, parse_grid
from .validation import run_validation

log = logging.getLogger("grantfree")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VALIDATION = 0, 1, 2, 3


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    return format(float(v), ".17g")


def write_csv(path, columns, rows):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def _settings(args):
    trials = 0 if getattr(args, "analytic_only", False) else getattr(args, "trials", None)
    return load(args.config, trials=trials, seed=getattr(args, "seed", None), mode=getattr(args, "mode", None))


def cmd_fig2(args, argv):
    s = _settings(args)
    k_grid = parse_grid(args.k_grid)
    l_values = parse_grid(args.l_values)
    rows = fig2_rows(s.system, k_grid, l_values, s.trials, s.seed, args.workers, args.conditional)
    write_csv(args.out, FIG2_COLUMNS, rows)
    write_manifest(args.out, "fig2", argv, s)
    if len(l_values) == 2:
        a = [r["bler_mixture_lo"] for r in rows if r["L"] == l_values[0]]
        b = [r["bler_mixture_lo"] for r in rows if r["L"] == l_values[1]]
        k_cross = find_crossing(k_grid, a, b)
        msg = "none" if k_cross is None else f"{k_cross:.2f}"
        print(f"crossing of L={l_values[0]} and L={l_values[1]} curves: K = {msg}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_fig3(args, argv):
    s = _settings(args)
    rows = fig3_rows(s.system, parse_grid(args.k_values), parse_grid(args.l_grid), s.trials, s.seed, args.workers)
    write_csv(args.out, FIG3_COLUMNS, rows)
    write_manifest(args.out, "fig3", argv, s)
    for r in rows:
        if r["is_argmin"]:
            print(f"K = {r['K']}: analytical optimum L* = {r['L']} (P_e = {r['bler_analytic']:.4e})")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_optimize(args, argv):
    s = _settings(args)
    res = optimize_pilot_length(s.system, s.mode)
    print(f"{'L':>5} {'P_e':>12} {'P_M':>12} {'P_F':>12} {'rate':>8}")
    for p in res.curve:
        mark = " *" if p.pilot_len == res.best_len else ""
        print(f"{p.pilot_len:5d} {p.p_overall:12.4e} {p.p_miss:12.4e} {p.p_false:12.4e} {p.rate:8.4f}{mark}")
    print(f"L* = {res.best_len}, P_e(L*) = {res.best.p_overall:.6e} ({res.mode} mode)")
    if args.out:
        cols = ["L", "p_overall", "p_miss", "p_false", "rate", "tau_inf_sq", "is_argmin"]
        rows = [
            {"L": p.pilot_len, "p_overall": p.p_overall, "p_miss": p.p_miss, "p_false": p.p_false,
             "rate": p.rate, "tau_inf_sq": p.tau_inf_sq, "is_argmin": int(p.pilot_len == res.best_len)}
            for p in res.curve
        ]
        write_csv(args.out, cols, rows)
        write_manifest(args.out, "optimize", argv, s)
    return EXIT_OK


def cmd_validate(args, argv):
    s = _settings(args)
    scenarios = args.trials if args.trials is not None else 20
    checks = run_validation(s.system, scenarios=scenarios, shape_offset=args.inject_shape_error,
                            snr_draws=args.snr_draws)
    report = {"passed": all(c.passed for c in checks), "checks": [c.to_dict() for c in checks]}
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK if report["passed"] else EXIT_VALIDATION


def cmd_rerun(args, argv):
    manifest = json.loads(Path(args.manifest).read_text())
    old = manifest["argv"]
    with tempfile.TemporaryDirectory() as tmp:
        cfg_path = Path(tmp) / "config.txt"
        cfg_path.write_text("".join(f"{k} = {v}\n" for k, v in manifest["config"].items()))
        new = []
        skip = False
        for tok in old:
            if skip:
                skip = False
                continue
            if tok in ("--config", "--out"):
                skip = True
                continue
            if tok.startswith(("--config=", "--out=")):
                continue
            new.append(tok)
        out = args.out or manifest["outputs"][0]
        return main(new + ["--config", str(cfg_path), "--out", out])


def _common(p, trials=True, out_required=True):
    p.add_argument("--config", help="key = value config file (reference-system defaults)")
    p.add_argument("--out", required=out_required, help="output path")
    p.add_argument("--seed", type=int, help="base seed (overrides config)")
    if trials:
        p.add_argument("--trials", type=int, help="Monte-Carlo trials per point (overrides config)")
        p.add_argument("--workers", type=int, default=1, help="worker processes")
        p.add_argument("--analytic-only", action="store_true", help="skip the Monte-Carlo columns")


def build_parser():
    ap = argparse.ArgumentParser(prog="grantfree", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fig2", help="BLER versus number of active users")
    _common(p)
    p.add_argument("--k-grid", default="60:110:5")
    p.add_argument("--l-values", default="120,160")
    p.add_argument("--conditional", choices=["closed", "numerical"], default="closed",
                   help="conditional BLER inside the mixture")
    p.add_argument("--mode", choices=["exact", "fast"], help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_fig2)

    p = sub.add_parser("fig3", help="BLER versus pilot length")
    _common(p)
    p.add_argument("--k-values", default="60,100")
    p.add_argument("--l-grid", default="100:200:1")
    p.add_argument("--mode", choices=["exact", "fast"], help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_fig3)

    p = sub.add_parser("optimize", help="optimal pilot length")
    _common(p, trials=False, out_required=False)
    p.add_argument("--mode", choices=["exact", "fast"])
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("validate", help="cross-check analysis against sampling oracles")
    p.add_argument("--config")
    p.add_argument("--out", help="write the JSON report here as well")
    p.add_argument("--trials", type=int, help="AMP scenarios per check (default 20)")
    p.add_argument("--snr-draws", type=int, default=100_000)
    p.add_argument("--inject-shape-error", type=float, default=0.0, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("rerun", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="write to this path instead of the original")
    p.set_defaults(func=cmd_rerun)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    warnings.simplefilter("default")
    try:
        return args.func(args, argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AmpDivergenceError, StateEvolutionError, QuadratureError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
