"""Command-line driver: hardylab <experiment> [options]."""

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from hardylab import sharpness as sh
from hardylab.extremizers import taylor_threshold
from hardylab.functionals import HardyParams, remainder_constant, sharp_constant
from hardylab.geometry import ModelSpace

SCHEMA_VERSION = 1
EXPERIMENTS = ("constants", "sweep-sharp", "sweep-remainder", "rayleigh", "compare-jacobi",
               "check-inequalities", "verify-all")
SWEEP_COLUMNS = ("epsilon", "quotient", "envelope", "constant", "gap")


class ConfigError(ValueError):
    pass


# -- serialization -------------------------------------------------------------

def format_float(x):
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def to_json(obj, indent=0):
    """JSON text with every float written to 17 significant digits."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{to_json(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [pad + to_json(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format(float(row[c]), ".17g") if isinstance(row[c], (float, np.floating)) else row[c]
                        for c in columns])


# -- configuration -------------------------------------------------------------

def parse_ladder(text):
    """'3:12' means 2^-3 .. 2^-12; otherwise a comma-separated list of values."""
    if text is None:
        return None
    try:
        if ":" in text:
            a, b = (int(v) for v in text.split(":"))
            ladder = tuple(2.0 ** -j for j in range(a, b + 1))
        else:
            ladder = tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad --eps-ladder {text!r}") from exc
    if len(ladder) < 4 or any(not e > 0 for e in ladder):
        raise ConfigError("--eps-ladder needs at least 4 positive values")
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ConfigError("--eps-ladder must be strictly decreasing")
    return ladder


def parse_floats(text, name):
    if text is None:
        return None
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad {name} {text!r}") from exc


def build_model(args):
    rec = {"kind": args.model, "m": args.m, "n": args.n}
    if args.eta is not None:
        rec["eta"] = args.eta
    try:
        return ModelSpace.from_record(rec)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def build_params(args, model):
    k = model.k if model is not None else args.k
    if model is not None and args.k is not None and args.k != model.k:
        raise ConfigError(f"--k {args.k} disagrees with the model codimension {model.k}")
    if k is None:
        raise ConfigError("codimension k is required")
    try:
        return HardyParams(args.p, args.beta, k)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def config_echo(args):
    keys = ("experiment", "model", "m", "n", "eta", "k", "p", "beta", "alpha", "theta", "D", "eps_ladder",
            "grid", "tol", "seed")
    echo = {k: getattr(args, k) for k in keys}
    echo["rng"] = sh.RNG_NAME
    return echo


# -- experiments ---------------------------------------------------------------

class Run:
    def __init__(self, args):
        self.args = args
        self.results = []
        self.verdicts = {}
        self.tables = {}
        self.lines = []

    def record(self, name, data, verdicts=None, table=None):
        self.results.append({"experiment": name, **data})
        for k, v in (verdicts or {}).items():
            self.verdicts[f"{name}.{k}"] = v
        if table is not None:
            self.tables[name] = table

    def say(self, text):
        self.lines.append(text)
        print(text)

    def sweep(self, name, rep):
        self.record(name, rep.to_dict(), rep.verdicts, rep.rows())
        self.say(f"{name}: limit={rep.fitted_limit:.10g} constant={rep.constant:.10g} "
                 + " ".join(f"{k}={v}" for k, v in rep.verdicts.items()))


def _tol(args, default):
    return args.tol if args.tol is not None else default


def run_constants(run, model, params):
    out = {"sharp": sharp_constant(params), "flags": params.flags(), "delta": params.delta}
    text = f"sharp={out['sharp']:.17g}"
    if params.delta != 0:
        out["remainder"] = remainder_constant(params)
        tc = taylor_threshold(params)
        out.update({"a": tc.a, "frak_T": float(tc.frak_T), "cal_T": tc.cal_T})
        text += f" remainder={out['remainder']:.17g} T={tc.cal_T:.17g} (a={tc.a:.17g}, threshold={tc.frak_T:.17g})"
    run.record("constants", out)
    run.say(text)


def run_sweep_sharp(run, model, params):
    ladder = parse_ladder(run.args.eps_ladder) or sh.DEFAULT_LADDER
    run.sweep("sweep-sharp", sh.sweep_sharp_constant(model, params, ladder, rel_tol=_tol(run.args, 0.01)))


def run_sweep_remainder(run, model, params):
    args = run.args
    if params.delta == 0:
        run.say("sweep-remainder: skipped, delta = 0")
        return
    ladder = parse_ladder(args.eps_ladder) or sh.REMAINDER_LADDER
    thetas = parse_floats(args.theta, "--theta")
    rep = sh.sweep_remainder(model, params, D=args.D, theta_ladder=thetas, eps_ladder=ladder,
                             rel_tol=_tol(args, 0.05))
    run.sweep("sweep-remainder", rep)
    g = sh.gamma_test(model, params, D=args.D, eps_ladder=sh.GAMMA_LADDER)
    run.sweep("gamma-test", g)


def run_rayleigh(run, model, params):
    grid = run.args.grid or 1024
    sizes = sorted({max(64, grid // 4), max(64, grid // 2), grid})
    const = sharp_constant(params)
    rows, results = [], []
    for n in sizes:
        res = sh.rayleigh_descent(model, params, n)
        results.append(res)
        rows.append({"grid_size": n, "quotient": res.inf_estimate, "constant": const,
                     "gap": res.inf_estimate - const, "iterations": res.iterations, "converged": res.converged})
    scaled = sh.rayleigh_descent(model, params, sizes[0], scale=7.0)
    gaps = [r["gap"] for r in rows]
    tol = _tol(run.args, 0.03)
    best = results[-1].inf_estimate
    verdicts = {
        "lower_bound_confirmed": all(r.inf_estimate >= const * (1 - 1e-6) for r in results),
        "within_tolerance": abs(best - const) <= tol * const,
        "refinement_monotone": all(b <= a + 1e-3 for a, b in zip(gaps, gaps[1:])),
        "homogeneity_confirmed": abs(scaled.inf_estimate - results[0].inf_estimate) <= 1e-6 * const,
    }
    run.record("rayleigh", {"rows": rows, "scaled_quotient": scaled.inf_estimate}, verdicts)
    run.tables["rayleigh"] = rows
    run.say(f"rayleigh: inf={best:.10g} constant={const:.10g} " + " ".join(f"{k}={v}" for k, v in verdicts.items()))


def run_compare_jacobi(run, model, params):
    seed = run.args.seed
    dom = sh.dominance_trials(seed=seed)
    newton = sh.newton_trials(seed=seed)
    lap = sh.laplacian_check()
    verdicts = {
        "dominance_confirmed": dom["violations"] == 0,
        "newton_confirmed": newton["violations"] == 0,
        "laplacian_confirmed": all(r["violations"] == 0 for r in lap),
    }
    run.record("compare-jacobi", {"dominance": dom, "newton": newton, "laplacian": lap}, verdicts)
    run.say(f"compare-jacobi: worst slack={dom['worst_slack']:.3g} " + " ".join(f"{k}={v}" for k, v in verdicts.items()))


def run_check_inequalities(run, model, params):
    args = run.args
    seed = args.seed
    out, verdicts = {}, {}
    if params.delta != 0:
        bumps = sh.improved_bump_trials(model, params, D=args.D, seed=seed)
        out["improved_bumps"] = {"trials": len(bumps), "violations": sum(not r["ok"] for r in bumps),
                                 "min_slack": min(r["slack"] for r in bumps)}
        verdicts["improved_inequality_confirmed"] = out["improved_bumps"]["violations"] == 0
    taylor = sh.taylor_trials(seed=seed)
    out["taylor"] = taylor
    verdicts["taylor_confirmed"] = all(r["violations"] == 0 for r in taylor)
    if params.p >= 2:
        out["pointwise"] = sh.pointwise_trials(seed=seed)
        verdicts["pointwise_confirmed"] = out["pointwise"]["violations"] == 0
    if model.bounded and model.r_max > 1.0 and params.p == 2:
        ja = sh.j_alpha_sweep(model)
        out["j_alpha"] = {"slopes": {str(k): v for k, v in ja["slopes"].items()}, "bounded_ratio": ja["bounded_ratio"]}
        verdicts.update({f"j_alpha.{k}": v for k, v in ja["verdicts"].items()})
    run.record("check-inequalities", out, verdicts)
    run.say("check-inequalities: " + " ".join(f"{k}={v}" for k, v in verdicts.items()))
    if model.kind == "torus_subtorus" and model.k >= 2:
        alpha = args.alpha if args.alpha is not None else 1.0
        rep = sh.sweep_log_hardy(model, p=float(model.k), beta=0.0, alpha=alpha, D=args.D)
        run.sweep("log-hardy", rep)
    if model.is_flat and 1 < params.p < model.k and params.beta == -params.p:
        run.sweep("flat-case", sh.sweep_flat_case(model, params))


def run_verify_all(run, model, params):
    run_constants(run, model, params)
    run_sweep_sharp(run, model, params)
    run_sweep_remainder(run, model, params)
    if model.bounded or model.is_flat:
        run_rayleigh(run, model, params)
    run_compare_jacobi(run, model, params)
    run_check_inequalities(run, model, params)


RUNNERS = {
    "constants": run_constants,
    "sweep-sharp": run_sweep_sharp,
    "sweep-remainder": run_sweep_remainder,
    "rayleigh": run_rayleigh,
    "compare-jacobi": run_compare_jacobi,
    "check-inequalities": run_check_inequalities,
    "verify-all": run_verify_all,
}


# -- entry point -----------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="hardylab", description="Weighted Hardy inequality experiments on model manifolds.")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--model", default=None, help="torus, euclidean, subspace, section, axis or hemisphere")
    ap.add_argument("--m", type=int, default=None)
    ap.add_argument("--n", type=int, default=None)
    ap.add_argument("--eta", type=float, default=None, help="tube radius for the torus model")
    ap.add_argument("--k", type=int, default=None, help="codimension when no model is given")
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--beta", type=float, default=-2.0)
    ap.add_argument("--alpha", type=float, default=None)
    ap.add_argument("--theta", default=None, help="comma-separated theta ladder")
    ap.add_argument("--D", type=float, default=None)
    ap.add_argument("--eps-ladder", dest="eps_ladder", default=None, help="'a:b' for 2^-a..2^-b, or a list")
    ap.add_argument("--grid", type=int, default=None)
    ap.add_argument("--tol", type=float, default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None, help="output directory")
    ap.add_argument("--format", choices=("json", "csv", "both"), default="both")
    return ap


def _default_model(args):
    if args.model is None:
        if args.experiment == "constants":
            return None
        args.model, args.m, args.n = "torus", args.m or 2, args.n if args.n is not None else 1
    return build_model(args)


def emit(args, run, error=None):
    if args.out is None:
        return
    os.makedirs(args.out, exist_ok=True)
    if args.format in ("json", "both"):
        report = {"schema_version": SCHEMA_VERSION, "config": config_echo(args), "results": run.results,
                  "verdicts": run.verdicts}
        if error is not None:
            report["errors"] = [error]
        with open(os.path.join(args.out, "report.json"), "w", newline="") as fh:
            fh.write(to_json(report) + "\n")
    if args.format in ("csv", "both"):
        for name, rows in run.tables.items():
            cols = SWEEP_COLUMNS if rows and "epsilon" in rows[0] else tuple(rows[0]) if rows else SWEEP_COLUMNS
            write_csv(os.path.join(args.out, f"{name}.csv"), cols, rows)


def main(argv=None):
    args = build_parser().parse_args(argv)
    run = Run(args)
    try:
        model = _default_model(args)
        params = build_params(args, model)
        if args.grid is not None and args.grid < 64:
            raise ConfigError("--grid must be at least 64")
        if model is None and args.experiment != "constants":
            raise ConfigError("a model is required")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        emit(args, run, {"type": "config", "message": str(exc)})
        return 2
    try:
        RUNNERS[args.experiment](run, model, params)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        emit(args, run, {"type": "config", "message": str(exc)})
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        emit(args, run, {"type": type(exc).__name__, "message": str(exc)})
        return 1
    emit(args, run)
    ok = all(v is True for v in run.verdicts.values())
    print("all verdicts confirmed" if ok else "verdict failure")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
