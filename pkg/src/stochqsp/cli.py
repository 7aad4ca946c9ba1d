"""Command-line front end.

Verbs: coeffs, fit, ensemble, cost-curve, simulate, qsp-phases, verify.
Exit codes: 0 ok, 1 invariant failure, 2 bad arguments, 3 no envelope,
4 phase solver failure.
"""

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import __version__
from .chebyshev import (Parity, PolySeries, coeffs_cos, coeffs_erf, coeffs_exp_decay, coeffs_inverse,
                        coeffs_sin, detect_parity, truncate)
from .decay import select_model
from .ensemble import (build, cost_ratio, ratio_approx, ratio_bound,
                       ratio_bound_ceil, to_json)
from .errors import ArgumentError, NoEnvelopeError, SolverError, StochQspError
from .operators import (MAX_DIM, channel_experiment, exact_mixture_channel, fmt,
                        maximally_mixed, random_hermitian, realize_phases, reports_to_csv, reports_to_json,
                        sampled_mixture_channel)
from .qsp import MAX_SOLVER_DEGREE, round_trip_error, solve_target
from .verify import format_table, geometric_series, run_suite

EXIT_OK, EXIT_INVARIANT, EXIT_ARGS, EXIT_ENVELOPE, EXIT_SOLVER = 0, 1, 2, 3, 4

FUNCTIONS = ("cos", "sin", "exp_decay", "inverse", "erf", "geometric", "geometric_unit", "file")
EXTRA_LENGTH = 200


class CliError(Exception):
    def __init__(self, message, code=EXIT_ARGS):
        super().__init__(message)
        self.code = code


def parse_degrees(text):
    """'a:b:step', 'a:b' or a comma list -> sorted list of ints >= 2."""
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) == 2:
                parts.append(1)
            a, b, step = parts
            if step <= 0:
                raise ValueError
            vals = list(range(a, b + 1, step))
        else:
            vals = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad degree range {text!r}") from None
    if not vals or min(vals) < 2:
        raise argparse.ArgumentTypeError("degrees must be nonempty and each >= 2")
    return vals


def read_series_file(path):
    """CSV with columns (n, c_n), or one coefficient per line; '#' lines ignored."""
    coeffs = {}
    with open(path) as fh:
        rows = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    for k, ln in enumerate(rows):
        parts = [p.strip() for p in ln.split(",")]
        try:
            if len(parts) == 1:
                coeffs[k] = float(parts[0])
            else:
                coeffs[int(parts[0])] = float(parts[1])
        except ValueError:
            if k == 0:
                continue  # header row
            raise CliError(f"unreadable series line {ln!r}") from None
    if not coeffs:
        raise CliError("series file is empty")
    c = np.zeros(max(coeffs) + 1)
    for n, v in coeffs.items():
        c[n] = v
    parity, c = detect_parity(c)
    return PolySeries(c, parity=parity, label=f"file({path})")


def make_series(args, length):
    """Coefficients c_0..c_{length-1} (or the family's natural length) for the config."""
    f, p = args.function, args.param
    if f == "file":
        if not args.series_file:
            raise CliError("--function file needs --series-file")
        return read_series_file(args.series_file)
    if p is None and f not in ("inverse", "geometric", "geometric_unit"):
        raise CliError(f"--param is required for {f}")
    n = length - 1
    if f == "cos":
        return coeffs_cos(p, n)
    if f == "sin":
        return coeffs_sin(p, n)
    if f == "exp_decay":
        return coeffs_exp_decay(p, n)
    if f == "erf":
        return coeffs_erf(p, n)
    if f == "inverse":
        if p is None or p != int(p):
            raise CliError("inverse needs an even integer --param b")
        return coeffs_inverse(int(p))
    if f in ("geometric", "geometric_unit"):
        # c_n = e^{-q n}; the unit variant is scaled by (1 - e^{-q}) so that |F| <= 1
        q = 1.0 if p is None else p
        if not q > 0:
            raise CliError("geometric needs --param q > 0")
        return geometric_series(q, length, normalized=f == "geometric_unit")
    raise CliError(f"unknown function {f!r}")


def header(args, command):
    keys = ("function", "param", "degree", "degrees", "dim", "samples", "seed", "series_file")
    conf = " ".join(f"{k}={getattr(args, k)}" for k in keys
                    if getattr(args, k, None) is not None)
    return f"# stochqsp {__version__} {command} {conf}"


def emit(args, text):
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def rows_csv(head, columns, rows):
    buf = io.StringIO()
    buf.write(head + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def meta(args, command):
    return {"version": __version__, "command": command,
            "config": {k: v for k, v in sorted(vars(args).items())
                       if k not in ("func", "out") and v is not None}}


def _model(s):
    try:
        return select_model(s)
    except NoEnvelopeError as exc:
        raise CliError(f"no decay envelope: {exc}", EXIT_ENVELOPE) from None


def cmd_coeffs(args):
    s = make_series(args, (args.degree or 40) + 1)
    if args.format == "json":
        doc = {"meta": meta(args, "coeffs"), "parity": s.parity.value,
               "coeffs": [float(c) for c in s.coeffs]}
        emit(args, json.dumps(doc, indent=2) + "\n")
    else:
        emit(args, rows_csv(header(args, "coeffs"), ("n", "c_n"),
                            [(n, float(c)) for n, c in enumerate(s.coeffs)]))
    return EXIT_OK


def cmd_fit(args):
    s = make_series(args, (args.degree or 200) + 1)
    m = _model(s)
    doc = {"meta": meta(args, "fit"), "model": m.to_dict(), "log_c_over_q": m.log_c_over_q}
    emit(args, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def _need_degree(args):
    if args.degree is None:
        raise CliError("--degree is required")
    if args.degree < 2:
        raise CliError("--degree must be >= 2")
    return args.degree


def cmd_ensemble(args):
    d = _need_degree(args)
    s = make_series(args, d + EXTRA_LENGTH + 1)
    if len(s) <= d:
        raise CliError(f"series degree {s.degree} is below the target degree {d}")
    e = build(s, d, _model(s))
    scale = None
    if args.phases:
        if e.degenerate:
            raise CliError("deterministic fallback ensemble has no sampled terms to phase")
        if s.parity is Parity.INDEFINITE:
            raise CliError("--phases needs a definite-parity source")
        if e.d > MAX_SOLVER_DEGREE:
            raise CliError(f"member degrees exceed the solver cap {MAX_SOLVER_DEGREE}")
        e, scale, _ = realize_phases(e, seed=args.seed)
    doc = json.loads(to_json(e))
    doc["meta"] = meta(args, "ensemble")
    if scale is not None:
        doc["phase_scale"] = scale
    emit(args, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def cost_curve_rows(s, degrees):
    """(d, d_star, d_avg, ratio, bound_ratio, closed_form_ratio, approx_ratio, degenerate,
    certified); certified rows have the envelope onset at or below d* + 1."""
    m = select_model(s)
    rows = []
    for d in degrees:
        if len(s) <= d:
            raise CliError(f"series degree {s.degree} is below the target degree {d}")
        e = build(s, d, m)
        ratio = 1.0 if e.degenerate else cost_ratio(e)
        rows.append((d, e.d_star, e.d_avg, ratio, ratio_bound_ceil(m, d), ratio_bound(m, d),
                     ratio_approx(m, d), int(e.degenerate), int(e.certified)))
    return m, rows


COST_COLUMNS = ("d", "d_star", "d_avg", "ratio", "bound_ratio", "closed_form_ratio",
                "approx_ratio", "degenerate", "certified")


def cmd_cost_curve(args):
    degrees = args.degrees or ([args.degree] if args.degree else None)
    if not degrees:
        raise CliError("--degrees a:b:step is required")
    s = make_series(args, max(degrees) + EXTRA_LENGTH + 1)
    try:
        m, rows = cost_curve_rows(s, degrees)
    except NoEnvelopeError as exc:
        raise CliError(f"no decay envelope: {exc}", EXIT_ENVELOPE) from None
    if args.format == "json":
        doc = {"meta": meta(args, "cost-curve"), "model": m.to_dict(),
               "rows": [dict(zip(COST_COLUMNS, r)) for r in rows]}
        emit(args, json.dumps(doc, indent=2) + "\n")
    else:
        emit(args, rows_csv(header(args, "cost-curve"), COST_COLUMNS, rows))
    bad = [r[0] for r in rows if not r[7] and r[8] and r[3] > r[4] + 1e-9]
    if bad:
        print(f"bound violated at d={bad}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_simulate(args):
    d = _need_degree(args)
    dim = args.dim or 8
    if not 2 <= dim <= MAX_DIM:
        raise CliError(f"--dim must lie in [2, {MAX_DIM}]")
    s = make_series(args, d + EXTRA_LENGTH + 1)
    if len(s) <= d:
        raise CliError(f"series degree {s.degree} is below the target degree {d}")
    e = build(s, d, _model(s))
    a = random_hermitian(dim, args.seed)
    rho = maximally_mixed(dim)
    rep = channel_experiment(e, a, rho)
    n_samples = args.samples or 1000
    est, err = sampled_mixture_channel(e, a, rho, n_samples, args.seed)
    exact = exact_mixture_channel(e, a, rho)
    z = np.max(np.abs(est - exact) / np.maximum(np.abs(err), 1e-300))
    row = {"function": args.function, "param": args.param if args.param is not None else "",
           "d": d, "d_star": e.d_star, "d_avg": e.d_avg, "epsilon": e.epsilon, "a": rep.a,
           "b": rep.b, "bound": rep.mixing_bound, "measured": rep.measured, "seed": args.seed}
    ok = rep.bound_satisfied and rep.extra["three_eps_ok"]
    if args.format == "json":
        detail = rep.to_dict()
        detail.update({"sampled_max_abs_dev": float(np.max(np.abs(est - exact))),
                       "sampled_max_z": float(z) if np.isfinite(z) else None,
                       "n_samples": n_samples, "bound_satisfied": bool(ok)})
        emit(args, reports_to_json([row], {**meta(args, "simulate"), "report": detail}) + "\n")
    else:
        emit(args, reports_to_csv([row], header(args, "simulate")))
    return EXIT_OK if ok else EXIT_INVARIANT


def cmd_qsp_phases(args):
    d = _need_degree(args)
    if d > MAX_SOLVER_DEGREE:
        raise CliError(f"--degree must be <= {MAX_SOLVER_DEGREE}")
    s = make_series(args, max(d, 40) + EXTRA_LENGTH + 1)
    t = truncate(s, min(d, s.degree))
    peak = float(np.abs(t.coeffs).sum())
    scale = 1.0 if peak < 1.0 - 1e-8 else (1.0 - 1e-6) / peak
    t = t.with_coeffs(scale * t.coeffs)
    parts = solve_target(t, tol=args.tol, seed=args.seed)
    doc = {"meta": meta(args, "qsp-phases"), "scale": scale,
           "parts": [{"parity": part.parity.value, "degree": int(ph.degree),
                      "phases": ph.to_list(), "grid_error": round_trip_error(ph, part)}
                     for part, ph in parts]}
    emit(args, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def cmd_verify(args):
    rows = run_suite(inject=args.inject_fault)
    text = format_table(rows) + "\n"
    emit(args, f"# stochqsp {__version__} verify\n" + text)
    failed = [name for name, ok, _ in rows if not ok]
    if failed:
        print("failed: " + ", ".join(failed), file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--function", choices=FUNCTIONS, default="geometric")
    common.add_argument("--param", type=float, help="t, beta, b, k or q depending on --function")
    common.add_argument("--series-file", help="coefficient file for --function file")
    common.add_argument("--degree", type=int)
    common.add_argument("--degrees", type=parse_degrees, help="a:b:step or comma list")
    common.add_argument("--dim", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    p = argparse.ArgumentParser(prog="stochqsp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"stochqsp {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("coeffs", parents=[common], help="emit coefficients").set_defaults(func=cmd_coeffs)
    sub.add_parser("fit", parents=[common], help="fit a decay envelope").set_defaults(func=cmd_fit)
    e = sub.add_parser("ensemble", parents=[common], help="build an ensemble (JSON)")
    e.add_argument("--phases", action="store_true", help="attach QSP phases to every term")
    e.set_defaults(func=cmd_ensemble)
    sub.add_parser("cost-curve", parents=[common],
                   help="average-degree ratio over a degree range").set_defaults(func=cmd_cost_curve)
    sub.add_parser("simulate", parents=[common],
                   help="channel experiment on a random operator").set_defaults(func=cmd_simulate)
    q = sub.add_parser("qsp-phases", parents=[common], help="phases for a truncated series")
    q.add_argument("--tol", type=float, default=1e-8)
    q.set_defaults(func=cmd_qsp_phases)
    v = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    v.add_argument("--inject-fault", choices=("clenshaw",), help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except NoEnvelopeError as exc:
        print(f"error: no decay envelope: {exc}", file=sys.stderr)
        return EXIT_ENVELOPE
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ArgumentError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except StochQspError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
