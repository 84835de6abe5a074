"""Command-line front end.

Subcommands: ``solve``, ``counterexample``, ``nsp-check``, ``experiment``,
``describe``.  Exit codes: 0 success; 1 input/parameter error; 2 iteration
budget exhausted (``solve``); 3 null-space-property violation witnessed
(``nsp-check``).  Every run prints its resolved configuration.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__, io
from .experiments import (
    DEFAULTS,
    EXPERIMENT_IDS,
    SCALES,
    ExperimentSpec,
    run_experiment,
    write_report,
)
from .instances import (
    CounterexampleParams,
    build_counterexample,
    default_z_star,
    nsp_check,
    nu_critical,
    sanitize_z_star,
    scalar_recursion_oracle,
)
from .io import CsvFormatError
from .linalg import InfeasibleError, SingularSystemError
from .problems import CsInstance
from .solver import (
    DDFG,
    EPS_ZERO,
    MODIFIED,
    STEP_TOL,
    IrlsConfig,
    describe_defaults,
    run_irls_l1r,
    run_irls_cs,
)

_CONFIG_CASTS = {
    "variant": str,
    "K": int,
    "gamma": float,
    "eta": float,
    "eta_times_one_minus_gamma": float,
    "eps0": float,
    "max_iter": lambda v: int(float(v)),
    "step_tol": float,
    "seed": int,
    "store_every": int,
}


def _print_config(title: str, items: dict) -> None:
    print(f"resolved configuration ({title}):")
    for key, value in items.items():
        print(f"  {key} = {value}")


def _read_config_file(path) -> dict:
    raw = io.read_params(path)
    out = {}
    for key, value in raw.items():
        if key not in _CONFIG_CASTS:
            raise ValueError(f"{path}: unknown config key {key!r}")
        out[key] = _CONFIG_CASTS[key](value)
    return out


def _build_config(args) -> IrlsConfig:
    file_cfg = _read_config_file(args.config) if getattr(args, "config", None) else {}

    def pick(name, builtin):
        v = getattr(args, name, None)
        if v is not None:
            return v
        return file_cfg.get(name, builtin)

    kwargs = dict(
        variant=pick("variant", MODIFIED),
        K=pick("K", None),
        gamma=pick("gamma", 0.9),
        eps0=pick("eps0", 1.0),
        max_iter=int(pick("max_iter", 100_000)),
        step_tol=pick("step_tol", 1e-10),
        seed=pick("seed", 0),
        store_every=pick("store_every", 0),
    )
    product = pick("eta_times_one_minus_gamma", None)
    if product is not None:
        return IrlsConfig.from_eta_product(product, **kwargs)
    return IrlsConfig(eta=pick("eta", 0.9), **kwargs)


def cmd_solve(args) -> int:
    phi = io.read_matrix(args.phi)
    y = io.read_vector(args.y)
    config = _build_config(args)
    x_star = io.read_vector(args.xstar) if args.xstar else None
    x0 = io.read_vector(args.x0) if args.x0 else None
    instance = CsInstance(phi=phi, y=y, x_star=x_star)
    _print_config(
        "solve",
        {
            "phi": args.phi,
            "y": args.y,
            "rows": phi.shape[0],
            "cols": phi.shape[1],
            "variant": config.variant,
            "K": config.resolve_K(phi.shape[1]),
            "gamma": config.gamma,
            "eta": config.eta,
            "eps0": config.eps0,
            "max_iter": config.max_iter,
            "step_tol": config.step_tol,
            "seed": config.seed,
            "x0": args.x0 or "minimum-2-norm feasible point",
            "xstar": args.xstar or "(none)",
            "trace_out": args.trace_out or "(none)",
            "out": args.out or "(stdout)",
        },
    )
    result = run_irls_cs(instance, config, x0=x0)
    if args.trace_out:
        io.write_trace(result.trace, args.trace_out)
    if args.out:
        io.write_vector(args.out, result.x)
    else:
        for v in result.x:
            print(io.FLOAT_FMT % v)
    summary = f"status = {result.status}, iterations = {result.iterations}"
    if x_star is not None:
        summary += f", final_err2 = {io.FLOAT_FMT % result.trace.err2[-1]}"
    print(summary, file=sys.stderr)
    return 0 if result.status in (EPS_ZERO, STEP_TOL) else 2


def cmd_counterexample(args) -> int:
    k = args.k
    gamma = None if args.gamma_critical else args.gamma
    delta = args.delta if args.delta is not None else float(k * (2 * k + 1))
    if args.zstar:
        z_star = sanitize_z_star(io.read_vector(args.zstar))
    else:
        z_star = default_z_star(k, args.seed)
    params = CounterexampleParams(
        k=k,
        gamma=gamma if gamma is not None else nu_critical(k),
        delta=delta,
        z_star=z_star,
    )
    instance = build_counterexample(params, args.z0_pos)
    out_dir = Path(args.out_dir)
    io.save_counterexample(instance, out_dir, extra={"seed": args.seed})
    _print_config(
        "counterexample",
        {
            "k": k,
            "gamma": instance.gamma,
            "delta": delta,
            "z0_pos": args.z0_pos,
            "steps": args.steps,
            "eta": args.eta,
            "seed": args.seed,
            "run": args.run,
            "out_dir": out_dir,
            "alpha": instance.alpha,
            "xi": instance.xi,
            "nu": instance.nu,
            "s_star": instance.s_star,
            "limit_gap": instance.limit_gap,
        },
    )
    if args.run in ("oracle", "both", "ddfg", "modified"):
        if args.run == "oracle":
            oracle = scalar_recursion_oracle(instance, args.steps)
            with open(out_dir / "oracle.csv", "w") as fh:
                fh.write("n,s,eps,z1\n")
                for i in range(oracle.s.shape[0]):
                    fh.write(
                        f"{i},{io.FLOAT_FMT % oracle.s[i]},"
                        f"{io.FLOAT_FMT % oracle.eps[i]},{io.FLOAT_FMT % oracle.z1[i]}\n"
                    )
            print(f"oracle: s[{args.steps}] = {oracle.s[-1]!r} "
                  f"(fixed point {instance.s_star!r})", file=sys.stderr)
        else:
            variants = [DDFG, MODIFIED] if args.run == "both" else [args.run]
            reg = instance.as_regression()
            for variant in variants:
                cfg = IrlsConfig(
                    variant=variant,
                    K=k,
                    gamma=instance.gamma,
                    eta=args.eta,
                    max_iter=args.steps,
                )
                result = run_irls_l1r(reg, cfg)
                io.write_trace(
                    result.trace, out_dir / f"trace_{variant}.csv", include_ratio=True
                )
                print(
                    f"{variant}: status = {result.status}, iterations = "
                    f"{result.iterations}, final_err2 = "
                    f"{io.FLOAT_FMT % result.trace.err2[-1]}, final_s = "
                    f"{io.FLOAT_FMT % result.trace.s[-1]}",
                    file=sys.stderr,
                )
    print(f"instance written to {out_dir}", file=sys.stderr)
    return 0


def cmd_nsp_check(args) -> int:
    A = io.read_matrix(args.matrix)
    N = A.shape[0]
    if 2 * args.K >= N:
        print(
            f"warning: order K={args.K} >= N/2={N / 2:g} cannot satisfy the "
            "null-space property for any gamma < 1; proceeding anyway",
            file=sys.stderr,
        )
    _print_config(
        "nsp-check",
        {
            "matrix": args.matrix,
            "rows": N,
            "cols": A.shape[1],
            "K": args.K,
            "gamma": args.gamma,
            "samples": args.samples,
            "exhaustive_cap": args.exhaustive_cap,
            "seed": args.seed,
        },
    )
    report = nsp_check(
        A,
        K=args.K,
        gamma=args.gamma,
        samples=args.samples,
        exhaustive_cap=args.exhaustive_cap,
        seed=args.seed,
    )
    print(f"order_K = {report.order_K}")
    print(f"gamma_estimate = {io.FLOAT_FMT % report.gamma_estimate}")
    print(f"samples = {report.samples}")
    print(f"exhaustive = {report.exhaustive}")
    print(f"passes (estimate <= gamma={args.gamma:g}) = {report.passes}")
    if not report.passes:
        z_text = ",".join(io.FLOAT_FMT % v for v in report.witness_z)
        t_text = ",".join(str(int(i)) for i in report.witness_support)
        print(f"violation witness z = {z_text}")
        print(f"violation witness T = {t_text}")
        return 3
    return 0


def _parse_scalar(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    if text.lower() == "none":
        return None
    return text


def _parse_override(text: str):
    key, sep, value = text.partition("=")
    if not sep:
        raise ValueError(f"override {text!r} must have the form KEY=VALUE")
    value = value.strip()
    if "," in value:
        return key.strip(), tuple(_parse_scalar(v) for v in value.split(","))
    return key.strip(), _parse_scalar(value)


def cmd_experiment(args) -> int:
    seeds = None
    if args.seeds:
        seeds = tuple(int(s) for s in args.seeds.split(","))
    overrides = dict(_parse_override(t) for t in args.override or [])
    spec = ExperimentSpec(id=args.id, scale=args.scale, seeds=seeds, overrides=overrides)
    params = spec.resolve()
    _print_config(f"experiment {spec.id} ({spec.scale})", params)
    report = run_experiment(spec)
    out_dir = write_report(report, args.out)
    print(f"report written to {out_dir}")
    if not args.no_plots:
        from .plots import render_report

        for path in render_report(report, out_dir):
            print(f"figure written to {path}")
    for agg in report.aggregate():
        cell = ", ".join(f"{k}={agg[k]}" for k in report.cell_keys)
        print(
            f"  [{cell}] {agg['variant']}: {agg['successes']}/{agg['trials']} "
            f"recovered (rate {agg['success_rate']:.2f})"
        )
    return 0


def cmd_describe(args) -> int:
    print(f"irlslab {__version__}")
    print()
    print("solver defaults:")
    for key, value in describe_defaults().items():
        print(f"  {key} = {value}")
    print()
    print("experiment defaults:")
    for scale in SCALES:
        for exp_id in EXPERIMENT_IDS:
            print(f"  {exp_id} ({scale}):")
            for key, value in DEFAULTS[scale][exp_id].items():
                print(f"    {key} = {value}")
    print()
    print("file formats:")
    print("  matrices/vectors: headerless CSV, one row per line, 17 significant digits")
    print("  trace csv header: n,eps,J,err1,err2,step_w,status")
    print("  experiment output: <out>/<id>/<scale>/{trials.csv,aggregate.csv,metadata.txt,...}")
    print()
    print("exit codes:")
    print("  0 success (solve: stopped via EpsZero or StepTol)")
    print("  1 input or parameter error")
    print("  2 solve exhausted max_iter")
    print("  3 nsp-check found a violation witness")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irlslab",
        description="IRLS sparse recovery: solvers, failure instances, NSP checks, experiments.",
    )
    parser.add_argument("--version", action="version", version=f"irlslab {__version__}")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("solve", help="run one IRLS solve on phi/y from CSV files")
    p.add_argument("phi", help="measurement matrix CSV")
    p.add_argument("y", help="right-hand side CSV (one value per line)")
    p.add_argument("--variant", choices=[DDFG, MODIFIED], default=None)
    p.add_argument("--K", type=int, default=None, help="NSP order (default: floor(N/2))")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument(
        "--eta-times-one-minus-gamma",
        dest="eta_times_one_minus_gamma",
        type=float,
        default=None,
        help="supply the product eta*(1-gamma) instead of --eta",
    )
    p.add_argument("--eps0", type=float, default=None)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    p.add_argument("--step-tol", dest="step_tol", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--store-every", dest="store_every", type=int, default=None)
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--x0", default=None, help="initial iterate CSV")
    p.add_argument("--xstar", default=None, help="ground truth CSV for error columns")
    p.add_argument("--trace-out", dest="trace_out", default=None)
    p.add_argument("--out", default=None, help="write final x here (default: stdout)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("counterexample", help="build (and optionally run) a failure instance")
    p.add_argument("--k", type=int, required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--gamma", type=float, default=None)
    g.add_argument(
        "--gamma-critical",
        dest="gamma_critical",
        action="store_true",
        help="use the critical constant nu(k)",
    )
    p.add_argument("--delta", type=float, default=None, help="default k(2k+1)")
    p.add_argument("--z0-pos", dest="z0_pos", type=float, default=0.5)
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--eta", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zstar", default=None, help="CSV with an explicit positive z*")
    p.add_argument("--out-dir", dest="out_dir", default="counterexample")
    p.add_argument(
        "--run",
        choices=["none", "ddfg", "modified", "both", "oracle"],
        default="none",
    )
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("nsp-check", help="sample the null-space-property constant")
    p.add_argument("matrix", help="null-space basis matrix CSV")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--exhaustive-cap", dest="exhaustive_cap", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_nsp_check)

    p = sub.add_parser("experiment", help="run a numbered experiment (E1..E5)")
    p.add_argument("--id", required=True, help="one of E1..E5")
    p.add_argument("--scale", default="desk", help="desk or paper")
    p.add_argument("--seeds", default=None, help="comma-separated trial seeds")
    p.add_argument("--out", default="out")
    p.add_argument(
        "--override",
        action="append",
        default=None,
        metavar="KEY=VALUE",
        help="override an experiment parameter (repeatable)",
    )
    p.add_argument("--no-plots", dest="no_plots", action="store_true")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("describe", help="print all defaults, formats and exit codes")
    p.set_defaults(func=cmd_describe)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_help()
        return 1
    try:
        return args.func(args)
    except (CsvFormatError, OSError, ValueError, SingularSystemError, InfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except np.linalg.LinAlgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
