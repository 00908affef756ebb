"""Command-line front end.

Subcommands: bound, simulate, figure, sweep, selftest. Exit status is 0 on
success, 1 on bad usage or invalid parameters and 2 when a bound cannot be
satisfied (or a figure had to drop grid points for that reason).

Values from ``--config FILE`` (a JSON object keyed by option name, dashes
or underscores) fill in options not given on the command line.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import pacbounds as pb
from .core import (
    Bernoulli,
    ErrorBudget,
    ErrorKind,
    InvalidParameter,
    NonConvergence,
    PacTarget,
    RowWeight,
    Unsatisfiable,
)
from .montecarlo import (
    DECODER_KIND,
    TrialPlan,
    default_threads,
    design_for,
    empirical_rate_curve,
    run_trials,
    summaries_to_csv,
)

EXIT_OK, EXIT_USAGE, EXIT_UNSAT = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _add_common(p):
    p.add_argument("--config", help="JSON file with default option values")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gtpac", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    b = sub.add_parser("bound", help="sufficient number of tests as JSON")
    _add_common(b)
    b.add_argument("--algo", choices=["coma", "cbp", "dd"])
    b.add_argument("--n", type=int)
    b.add_argument("--k", type=int)
    b.add_argument("--eps", type=float)
    b.add_argument("--delta", type=float)
    b.add_argument("--p", type=float, help="Bernoulli parameter (CoMa, DD); default 1/k")
    b.add_argument("--s", type=float, help="row weight (CBP); default s*")
    b.add_argument("--c", type=float, help="CBP split constant; default 1/2")
    b.add_argument("--gtilde-policy", choices=["default", "grid"])
    b.add_argument("--budget", type=int, help="error budget used instead of the one derived from --eps")
    b.add_argument("--optimize-p", action="store_true", default=None, help="CoMa: use the fixed-point optimum p")

    s = sub.add_parser("simulate", help="Monte Carlo failure rate as CSV")
    _add_common(s)
    s.add_argument("--n", type=int)
    s.add_argument("--k", type=int)
    s.add_argument("--decoder", choices=["coma", "cbp", "dd"])
    s.add_argument("--m", type=int, help="number of tests")
    s.add_argument("--m-grid", help="comma-separated test counts; writes one row per value")
    s.add_argument("--design", choices=["bernoulli", "row_weight"])
    s.add_argument("--p", type=float)
    s.add_argument("--s", type=int)
    s.add_argument("--budget-kind", choices=["fp", "fn"])
    s.add_argument("--budget", type=int)
    s.add_argument("--trials", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--defectives", help="comma-separated fixed defective set; default random per trial")
    s.add_argument("--threads", type=int)
    s.add_argument("--out", help="output CSV path; default stdout")

    f = sub.add_parser("figure", help="figure data (CSV) and plot (SVG)")
    _add_common(f)
    f.add_argument("id", nargs="?")
    f.add_argument("--out", help="output directory; default current directory")
    f.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a figure parameter (JSON value)")
    f.add_argument("--threads", type=int)
    f.add_argument("--list", action="store_true", default=None, help="list figure ids")

    w = sub.add_parser("sweep", help="bounds over a cartesian parameter grid, long-format CSV")
    _add_common(w)
    w.add_argument("--var", action="append", metavar="NAME=START:STOP:STEPS[:log]")
    w.add_argument("--algo", action="append", choices=["coma", "cbp", "dd"])
    w.add_argument("--output", action="append", help="quantity to report (m_s, rho_r or an intermediate name)")
    w.add_argument("--n", type=int)
    w.add_argument("--k", type=int)
    w.add_argument("--eps", type=float)
    w.add_argument("--delta", type=float)
    w.add_argument("--budget", type=int)
    w.add_argument("--k-coefficient", type=float, help="with a beta variable, k = round(coef * n^beta)")
    w.add_argument("--out")

    t = sub.add_parser("selftest", help="quick numerical self-checks")
    _add_common(t)
    return parser


def _merge_config(args, parser_defaults: dict) -> argparse.Namespace:
    config = {}
    if getattr(args, "config", None):
        try:
            config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
    known = vars(args)
    for key, value in config.items():
        dest = key.replace("-", "_")
        if dest not in known or dest in ("command", "config"):
            raise UsageError(f"unknown config key {key!r}")
        if known[dest] is None:
            setattr(args, dest, value)
    for key, value in parser_defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    return args


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"missing required option(s): {flags}")


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


# bound


def cmd_bound(args) -> int:
    _merge_config(args, {"c": 0.5, "gtilde_policy": "default", "optimize_p": False})
    _require(args, "algo", "n", "k", "eps", "delta")
    target = PacTarget(args.eps, args.delta)
    if args.algo == "coma":
        if args.optimize_p:
            opt = pb.coma_fixed_point_opt(args.n, args.k, args.eps, args.delta)
            p = opt.p_opt
        else:
            p = args.p if args.p is not None else 1.0 / args.k
        result = pb.coma_sufficient_tests(args.n, args.k, p, target, args.budget)
        if args.optimize_p:
            result = _with(result, p_opt=p)
    elif args.algo == "cbp":
        result = pb.cbp_sufficient_tests(args.n, args.k, target, args.s, args.c, args.budget)
    else:
        p = args.p if args.p is not None else 1.0 / args.k
        result = pb.dd_sufficient_tests(args.n, args.k, p, target, args.gtilde_policy, args.budget)
    print(json.dumps(result.to_json(), indent=2, sort_keys=True))
    return EXIT_OK


def _with(result, **extra):
    from dataclasses import replace

    inter = dict(result.intermediates)
    inter.update(extra)
    return replace(result, intermediates=inter)


# simulate


def cmd_simulate(args) -> int:
    _merge_config(args, {"trials": 1000, "seed": 0, "threads": default_threads()})
    _require(args, "n", "k", "decoder")
    if args.m is None and args.m_grid is None:
        raise UsageError("one of --m or --m-grid is required")
    natural = DECODER_KIND[args.decoder]
    kind = ErrorKind(args.budget_kind) if args.budget_kind else natural
    if kind is not natural:
        raise InvalidParameter("budget_kind", f"{args.decoder} makes only {natural.value} errors")
    if args.design is None:
        design = design_for(args.decoder, args.n, args.k, args.p, args.s)
    elif args.design == "bernoulli":
        design = Bernoulli(args.p if args.p is not None else 1.0 / args.k)
    else:
        _require(args, "s")
        design = RowWeight(args.s)
    fixed = None
    if args.defectives:
        fixed = tuple(int(v) for v in str(args.defectives).split(","))
    budget = ErrorBudget(kind, args.budget if args.budget is not None else 0)
    if args.m_grid is not None:
        grid = [int(v) for v in str(args.m_grid).split(",") if v.strip()]
        template = TrialPlan(args.n, args.k, design, args.decoder, grid[0] if grid else 0, budget,
                             args.trials, args.seed, fixed)
        summaries = empirical_rate_curve(template, grid, args.threads)
    else:
        plan = TrialPlan(args.n, args.k, design, args.decoder, args.m, budget, args.trials, args.seed, fixed)
        summaries = [run_trials(plan, args.threads)]
    _emit(summaries_to_csv(summaries), args.out)
    return EXIT_OK


# figure


def _parse_sets(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def cmd_figure(args) -> int:
    from .figures import REGISTRY, build_figure

    _merge_config(args, {"out": ".", "threads": default_threads()})
    if args.list:
        for fid, fdef in REGISTRY.items():
            print(f"{fid}\tfig{fdef.number}\t{fdef.title}")
        return EXIT_OK
    _require(args, "id")
    overrides = _parse_sets(args.set)
    fdef = REGISTRY.get(args.id)
    if fdef is None:
        raise InvalidParameter("id", f"unknown figure {args.id!r}; known: {', '.join(REGISTRY)}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        data = build_figure(args.id, overrides, args.threads)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    stem = out_dir / f"fig{fdef.number}"
    stem.with_suffix(".csv").write_text(data.to_csv(), encoding="utf-8", newline="\n")
    stem.with_suffix(".svg").write_text(data.to_svg(), encoding="utf-8", newline="\n")
    print(f"wrote {stem}.csv and {stem}.svg")
    return EXIT_UNSAT if data.dropped else EXIT_OK


# sweep

SWEEP_VARS = {"n": int, "k": int, "eps": float, "delta": float, "p": float, "s": float, "c": float, "beta": float, "budget": int}


def parse_var(spec: str):
    """Parse NAME=START:STOP:STEPS[:log] into (name, values)."""
    if "=" not in spec:
        raise UsageError(f"--var expects NAME=START:STOP:STEPS, got {spec!r}")
    name, rng = spec.split("=", 1)
    if name not in SWEEP_VARS:
        raise UsageError(f"unknown sweep variable {name!r}; known: {', '.join(SWEEP_VARS)}")
    parts = rng.split(":")
    if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] != "log"):
        raise UsageError(f"malformed range {rng!r}")
    try:
        start, stop, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"malformed range {rng!r}") from None
    if steps < 0 or not (math.isfinite(start) and math.isfinite(stop)):
        raise UsageError(f"malformed range {rng!r}")
    if len(parts) == 4:
        if start <= 0 or stop <= 0:
            raise UsageError("log ranges need positive endpoints")
        values = np.geomspace(start, stop, steps) if steps else np.array([])
    else:
        values = np.linspace(start, stop, steps)
    cast = SWEEP_VARS[name]
    if cast is int:
        values = [int(round(v)) for v in values]
    else:
        values = [float(v) for v in values]
    return name, values


def cmd_sweep(args) -> int:
    from .figures import _cell

    _merge_config(args, {"algo": ["coma"], "output": ["m_s"], "eps": 0.0, "delta": 0.01, "k_coefficient": 0.95})
    variables = [parse_var(v) for v in (args.var or [])]
    names = [v[0] for v in variables]
    if len(set(names)) != len(names):
        raise UsageError("each sweep variable may appear once")
    header = names + ["algorithm", "quantity", "value"]
    lines = [",".join(header)]
    grid = itertools.product(*[v[1] for v in variables]) if variables else iter(())
    unsat = 0
    for point in grid:
        params = dict(zip(names, point))
        n = params.get("n", args.n)
        if "k" in params:
            k = params["k"]
        elif "beta" in params:
            k = max(1, int(round(args.k_coefficient * n ** params["beta"])))
        else:
            k = args.k
        if n is None or k is None:
            raise UsageError("n and k must be given as options or sweep variables")
        target = PacTarget(params.get("eps", args.eps), params.get("delta", args.delta))
        kw = {key: params[key] for key in ("p", "s", "c") if key in params}
        kw["budget"] = params.get("budget", args.budget)
        for algo in args.algo:
            try:
                r = pb.sufficient_tests(algo, n, k, target, **kw)
            except Unsatisfiable as exc:
                print(f"warning: {exc}", file=sys.stderr)
                unsat += 1
                continue
            values = {"m_s": r.m_s, "rho_r": r.rho_r, "m_real": r.m_real, "k": k,
                      "budget": r.budget.count, "saturated": r.saturated, **r.intermediates}
            for q in args.output:
                if q not in values:
                    continue
                row = [_cell(v) for v in point] + [algo, q, _cell(values[q])]
                lines.append(",".join(row))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_UNSAT if unsat else EXIT_OK


# selftest


def cmd_selftest(args) -> int:
    _merge_config(args, {})
    checks = []

    def check(name, ok):
        checks.append(ok)
        print(f"{'PASS' if ok else 'FAIL'}  {name}")

    m09 = pb.coma_sufficient_tests(2500, 50, 0.02, PacTarget(0.0, 0.09)).m_s
    check(f"CoMa n=2500 k=50 delta=0.09 -> {m09} (about 1400)", abs(m09 - 1400) <= 15)
    rho = pb.coma_sufficient_tests(2500, 50, 0.02, PacTarget(0.0, 0.1), budget=30).rho_r
    check(f"CoMa rate with 30 false positives -> {rho:.4f} (about 0.3574)", abs(rho - 0.3574) <= 0.005)
    rho = pb.cbp_sufficient_tests(2500, 50, PacTarget(0.0, 0.1), budget=30).rho_r
    check(f"CBP rate with 30 false positives -> {rho:.4f} (about 0.325)", abs(rho - 0.325) <= 0.01)
    from .coupon import SccpInstance, harmonic, sccp_expected_time

    t = sccp_expected_time(SccpInstance(10, 3))
    check(f"coupon collection w=10 g=3 -> {t:.4f}", abs(t - 10 * (harmonic(10) - harmonic(3))) < 1e-12)
    from .decoders import decode_cbp, decode_coma, decode_dd, generate_outcomes
    from .core import GroundTruth, PoolingMatrix

    A = PoolingMatrix.from_dense([[1, 1, 0, 0], [0, 0, 1, 0], [0, 1, 0, 1]])
    y = generate_outcomes(A, GroundTruth(4, (1,)))
    ok = (
        y.bits.tolist() == [True, False, True]
        and decode_coma(A, y).estimate == (0, 1, 3)
        and decode_cbp(A, y).estimate == (0, 1, 3)
        and decode_dd(A, y).estimate == ()
    )
    check("decoders on a hand-checked 3x4 instance", ok)
    return EXIT_OK if all(checks) else EXIT_USAGE


COMMANDS = {
    "bound": cmd_bound,
    "simulate": cmd_simulate,
    "figure": cmd_figure,
    "sweep": cmd_sweep,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (InvalidParameter, ValueError) as exc:
        print(f"gtpac: invalid parameter: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (Unsatisfiable, NonConvergence) as exc:
        print(f"gtpac: {exc}", file=sys.stderr)
        return EXIT_UNSAT


if __name__ == "__main__":
    sys.exit(main())
