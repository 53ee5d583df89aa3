"""Command-line entry point: ``ssnsketch {gen,fstar,run,grid,spectrum,plot}``."""

from pathlib import Path
import argparse
import json
import logging
import sys

import numpy as np

from ssnsketch.analysis import spectrum_report
from ssnsketch.data import read_libsvm, split, write_libsvm, synth_gen
from ssnsketch.harness.grid import METHODS, ExperimentSpec, run_grid
from ssnsketch.harness.plots import emit_plots
from ssnsketch.methods import (
    MethodConfig,
    NewtonSketch,
    RunTrace,
    SsnCg,
    SsnSgi,
    Svrg,
    run_method,
    run_reference_newton,
)
from ssnsketch.problem import LogisticModel
from ssnsketch.rng import derive_seed


def _add_data_args(p):
    p.add_argument("--data", required=True, help="libsvm file")
    p.add_argument("--test-data", help="separate libsvm test file (skips the random split)")
    p.add_argument("--test-frac", type=float, default=0.1)
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="defaults to 1/n")
    p.add_argument("--seed", type=int, default=0)


def _load(args):
    ds = read_libsvm(args.data)
    if args.test_data:
        return ds, read_libsvm(args.test_data, n_features=ds.d)
    sd = split(ds, args.test_frac, derive_seed(args.seed, "split"))
    return sd.train, sd.test


def cmd_gen(args):
    ds = synth_gen(args.n, args.d, args.kappa, args.seed)
    write_libsvm(ds, args.out)
    print(f"wrote {ds.n} x {ds.d} to {args.out}")


def cmd_fstar(args):
    train, _ = _load(args)
    model = LogisticModel(train, args.lam)
    w, f = run_reference_newton(model)
    out = {
        "dataset": train.name,
        "n": model.n,
        "d": model.d,
        "lambda": model.lam,
        "f_star": f,
        "grad_norm": float(np.linalg.norm(model.gradient(w))),
        "w_star": w.tolist(),
    }
    Path(args.out).write_text(json.dumps(out, indent=2))
    print(f"f_star = {f!r}")


def _variant(args, n):
    m = args.method
    if m == "ssn-cg":
        return SsnCg(args.T or max(1, n // 2), args.max_cg, args.zeta)
    if m == "newton-sketch":
        return NewtonSketch(args.m_ns or max(1, n // 2), args.max_cg, args.zeta)
    if m == "ssn-sgi":
        return SsnSgi(args.m_sgi or n, args.alpha)
    return Svrg(args.alpha, args.m_svrg or max(1, n // 2))


def cmd_run(args):
    train, test = _load(args)
    model = LogisticModel(train, args.lam)
    if args.fstar:
        f_star = json.loads(Path(args.fstar).read_text())["f_star"]
    else:
        _, f_star = run_reference_newton(model)
    cfg = MethodConfig(
        _variant(args, model.n),
        max_outer=args.max_outer,
        seed=args.seed,
        target_error=args.target_error,
        max_ege=args.max_ege,
    )
    trace = run_method(model, np.zeros(model.d), cfg, f_star=f_star, test_data=test)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trace.to_csv(out / f"{args.method}.csv")
    print(f"{args.method}: {trace.status}, {len(trace)} rows, best error {trace.best_error():.3e}")


def cmd_grid(args):
    overrides = {
        "methods": args.methods.split(",") if args.methods else None,
        "seed": args.seed,
        "out_dir": args.out,
        "budget_fractions": [float(x) for x in args.budgets.split(",")] if args.budgets else None,
        "workers": args.workers,
        "max_ege": args.max_ege,
        "test_data": args.test_data,
        "test_frac": args.test_frac,
        "lam": args.lam,
    }
    if args.config:
        spec = ExperimentSpec.from_json(args.config, data=args.data, **overrides)
    else:
        spec = ExperimentSpec(args.data, **{k: v for k, v in overrides.items() if v is not None})
    report = run_grid(spec)
    for method, cell in report.best.items():
        print(f"{method:14s} b={cell.budget:<7d} {cell.params} ege(1e-8)={cell.ege_to[1e-8]:g}")


def cmd_spectrum(args):
    train, _ = _load(args)
    model = LogisticModel(train, args.lam)
    w, _ = run_reference_newton(model)
    T = max(1, int(round(args.t_frac * model.n)))
    rep = spectrum_report(model, w, T, args.m, reps=args.reps, seed=args.seed)
    rep.to_csv(args.out)
    print(f"wrote {model.d} eigenvalue rows to {args.out}")


def cmd_plot(args):
    paths = sorted(Path(args.traces).glob("*.csv"))
    if not paths:
        raise SystemExit(f"no trace CSVs in {args.traces}")
    traces = {p.stem: RunTrace.from_csv(p) for p in paths}
    for path in emit_plots(traces, args.out, args.name):
        print(path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssnsketch", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="synthetic dataset in libsvm format")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("fstar", help="reference optimum via full Newton-CG")
    _add_data_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fstar)

    p = sub.add_parser("run", help="one method with fixed hyper-parameters")
    _add_data_args(p)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--T", type=int)
    p.add_argument("--m-ns", type=int)
    p.add_argument("--m-sgi", type=int)
    p.add_argument("--m-svrg", type=int)
    p.add_argument("--max-cg", type=int, default=10)
    p.add_argument("--zeta", type=float, default=1e-2)
    p.add_argument("--alpha", type=float, default=2.0**-6)
    p.add_argument("--max-outer", type=int, default=100)
    p.add_argument("--max-ege", type=float)
    p.add_argument("--target-error", type=float)
    p.add_argument("--fstar", help="JSON written by the fstar subcommand")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("grid", help="budget grid with per-method tuning")
    _add_data_args(p)
    p.add_argument("--config", help="JSON ExperimentSpec; flags override it")
    p.add_argument("--methods", help="comma-separated subset of " + ",".join(METHODS))
    p.add_argument("--budgets", help="comma-separated multiples of n")
    p.add_argument("--max-ege", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("spectrum", help="Hessian spectra at the optimum")
    _add_data_args(p)
    p.add_argument("--t-frac", type=float, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("plot", help="SVG charts from a directory of trace CSVs")
    p.add_argument("--traces", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--name", default="dataset")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
