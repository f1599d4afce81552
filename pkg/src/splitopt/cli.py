"""Command-line interface.

Subcommands: ``run`` (experiment traces), ``certify`` (contraction
certificates), ``gen`` (synthetic datasets), ``slope`` (rate fits on an
existing CSV).  Exit codes: 0 success, 1 validation error, 2 runtime error.

Experiments are configured either entirely from flags (single solver) or
from an INI-style config file with ``[problem]``, ``[run]`` and one
``[solver.<name>]`` section per solver; every config field has a flag
override (an override applies to all solver sections).
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys

import numpy as np

from . import bench, contraction, datasets
from . import solvers as sv


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; the CLI contract wants 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def parse_schedule(text: str) -> sv.StepSchedule:
    """power:C[:p] | constant:eta | strongly_convex:mu (alias sc:mu)."""
    parts = text.split(":")
    kind = parts[0]
    try:
        if kind == "power":
            c = float(parts[1])
            p = float(parts[2]) if len(parts) > 2 else 0.5
            return sv.StepSchedule.power(c, p)
        if kind == "constant":
            return sv.StepSchedule.constant(float(parts[1]))
        if kind in ("strongly_convex", "sc"):
            return sv.StepSchedule.strongly_convex(float(parts[1]))
    except (IndexError, ValueError) as exc:
        raise ValueError(f"bad schedule spec {text!r}: {exc}") from exc
    raise ValueError(f"bad schedule spec {text!r}")


def parse_prox(text: str) -> sv.ProxMatrix:
    """zero | identity[:scale]"""
    parts = text.split(":")
    if parts[0] == "zero":
        return sv.ProxMatrix.zero()
    if parts[0] == "identity":
        scale = float(parts[1]) if len(parts) > 1 else 1.0
        return sv.ProxMatrix.identity(scale)
    raise ValueError(f"bad prox matrix spec {text!r} (zero | identity[:scale])")


def _solver_from_section(name, sec, args, default_iters=50000) -> tuple[str, sv.SolverConfig]:
    get = sec.get
    algorithm = args.algorithm or get("algorithm", "sto_spb_scprsm")
    alpha = args.alpha if args.alpha is not None else sec.getfloat("alpha", 0.9)
    gamma = args.gamma if args.gamma is not None else sec.getfloat("gamma", 0.9)
    beta = args.beta if args.beta is not None else sec.getfloat("beta", 1.0)
    seed = args.seed if args.seed is not None else sec.getint("seed", 0)
    iters = args.iters if args.iters is not None else sec.getint("iters", default_iters)
    sched_text = args.schedule or get("schedule", None)
    schedule = parse_schedule(sched_text) if sched_text else None
    kw = dict(max_iters=iters, seed=seed,
              minibatch=sec.getint("minibatch", 1),
              ergodic=get("ergodic", "paper"))
    S = parse_prox(get("s", "zero"))
    T = parse_prox(get("t", "zero"))
    if algorithm == "admm":
        cfg = sv.admm_config(beta=beta, **kw)
    elif algorithm == "prsm":
        cfg = sv.prsm_config(beta=beta, **kw)
    elif algorithm == "scprsm":
        cfg = sv.scprsm_config(alpha, beta=beta, **kw)
    elif algorithm == "spb_scprsm":
        cfg = sv.spb_scprsm_config(alpha, gamma, beta=beta, S=S, T=T, **kw)
    elif algorithm == "sto_admm":
        cfg = sv.sto_admm_config(schedule, beta=beta, **kw)
    elif algorithm == "sto_spb_scprsm":
        cfg = sv.sto_spb_scprsm_config(alpha, gamma, schedule, beta=beta, S=S, T=T, **kw)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    return name, cfg


def _build_spec(args) -> bench.ExperimentSpec:
    cp = configparser.ConfigParser()
    if args.config:
        read = cp.read(args.config)
        if not read:
            raise ValueError(f"config file {args.config!r} not found")
    problem_sec = cp["problem"] if cp.has_section("problem") else {}
    run_sec = cp["run"] if cp.has_section("run") else {}

    def pget(key, default=None):
        return problem_sec.get(key, default) if problem_sec else default

    model = args.model or pget("model", "lasso")
    dataset = args.dataset or pget("dataset")
    mu = args.mu if args.mu is not None else (
        float(pget("mu")) if pget("mu") is not None else None)
    mu_scale = pget("mu_scale")
    if mu_scale not in (None, "per_sample", "none"):
        mu_scale = float(mu_scale)
    gen_params = None
    if dataset is None:
        gen_params = {"seed": int(pget("seed", args.data_seed))}
        if model in ("lasso", "logistic"):
            gen_params["n"] = args.n if args.n is not None else int(pget("n", 200))
            gen_params["d"] = args.d if args.d is not None else int(pget("d", 400))
            default_nnz = min(100, gen_params["d"])
            gen_params["nnz"] = args.nnz if args.nnz is not None else int(
                pget("nnz", default_nnz))
        else:
            gen_params["n"] = args.n if args.n is not None else int(pget("n", 200))
            gen_params["n_groups"] = int(pget("n_groups", 10))
            gen_params["max_block"] = int(pget("max_block", 50))
            gen_params["frac_nnz"] = float(pget("frac_nnz", 0.05))
        if model != "logistic":
            gen_params["noise_var"] = float(pget("noise_var", 1e-3))
        if pget("normalize_rows") is not None:
            gen_params["normalize_rows"] = problem_sec.getboolean("normalize_rows")

    # default budgets: 50k iterations for synthetic data, 100k for files
    default_iters = 100000 if dataset is not None else 50000
    solver_sections = [s for s in cp.sections() if s.startswith("solver.")]
    solvers = []
    if solver_sections:
        for s in solver_sections:
            solvers.append(_solver_from_section(s.split(".", 1)[1], cp[s], args,
                                                default_iters=default_iters))
    else:
        ns = argparse.Namespace(**vars(args))
        sec = configparser.ConfigParser()
        sec.add_section("solver")
        if args.schedule is None and (args.algorithm or "sto_spb_scprsm").startswith("sto"):
            ns.schedule = "power:0.007:0.5"  # calibrated default, see README
        solvers.append(_solver_from_section(args.algorithm or "sto_spb_scprsm",
                                            sec["solver"], ns,
                                            default_iters=default_iters))

    rho = args.rho if args.rho is not None else float(run_sec.get("rho", 1.0) if run_sec else 1.0)
    cadence = args.cadence if args.cadence is not None else int(run_sec.get("cadence", 1) if run_sec else 1)
    out = args.out or (run_sec.get("out") if run_sec else None)
    manifest = args.manifest or (run_sec.get("manifest") if run_sec else None)
    if manifest is None and out:
        manifest = out + ".manifest.json"
    timing = run_sec.getboolean("timing", False) if run_sec else False
    return bench.ExperimentSpec(
        model=model, solvers=solvers, gen_params=gen_params, dataset_path=dataset,
        mu=mu, mu_scale=mu_scale,
        ridge=args.ridge if args.ridge is not None else float(pget("ridge", 0.0)),
        rho=rho, cadence=cadence, record_timing=timing,
        out_csv=out, out_manifest=manifest,
    )


def cmd_run(args) -> int:
    spec = _build_spec(args)
    violations = bench.validate_spec(spec)
    if violations:
        for v in violations:
            print(f"error: {v}", file=sys.stderr)
        return 1
    results, _ = bench.run_experiment(spec)
    for name, rows in results.items():
        last = rows[-1] if rows else None
        if last is None:
            print(f"{name}: no trace rows recorded")
        else:
            print(f"{name}: {len(rows)} rows, final objective {last.objective:.6g}, "
                  f"final ||r|| {last.constraint_norm:.3g}")
    if spec.out_csv:
        print(f"traces written to {spec.out_csv}")
    return 0


def cmd_gen(args) -> int:
    if args.model == "lasso":
        ds, mu = datasets.gen_lasso(n=args.n, d=args.d, nnz=args.nnz,
                                    noise_var=args.noise_var, seed=args.seed,
                                    normalize_rows=args.normalize_rows)
    elif args.model == "group-lasso":
        ds, mu = datasets.gen_group_lasso(n=args.n, n_groups=args.n_groups,
                                          max_block=args.max_block,
                                          frac_nnz=args.frac_nnz,
                                          noise_var=args.noise_var, seed=args.seed,
                                          normalize_rows=args.normalize_rows)
    else:
        ds, mu = datasets.gen_logistic(n=args.n, d=args.d, nnz=args.nnz,
                                       seed=args.seed,
                                       normalize_rows=args.normalize_rows)
    datasets.write_libsvm(ds, args.out)
    datasets.write_manifest(args.out + ".manifest.json", ds.meta)
    print(f"wrote {ds.n} x {ds.d} {args.model} dataset to {args.out} (mu={mu:.6g})")
    return 0


def cmd_certify(args) -> int:
    if args.random_b:
        rng = np.random.default_rng(args.seed)
        B = rng.standard_normal((args.b_dim, args.b_dim))
    else:
        B = -np.eye(args.b_dim)
    S = args.s_scale * np.eye(args.b_dim) if args.s_scale else None
    T = args.t_scale * np.eye(args.b_dim) if args.t_scale else None
    cert = contraction.certify(args.alpha, args.gamma, args.beta, B, S=S, T=T,
                               delta=args.delta)
    payload = contraction.certificate_summary(cert)
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0 if cert.verified else 1


def cmd_slope(args) -> int:
    traces = bench.read_trace_csv(args.csv)
    names = [args.solver] if args.solver else list(traces)
    for name in names:
        if name not in traces:
            print(f"error: solver {name!r} not in {args.csv}", file=sys.stderr)
            return 1
        slope = bench.rate_slope(traces[name], args.f_star, burn_in=args.burn_in,
                                 rho=args.rho)
        print(f"{name}: slope {slope:+.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="splitopt", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a solver-comparison experiment")
    run.add_argument("--config", help="INI config file")
    run.add_argument("--model", choices=bench.MODELS)
    run.add_argument("--dataset", help="LIBSVM file instead of a generator")
    run.add_argument("--algorithm", choices=sv.ALGORITHMS)
    run.add_argument("--alpha", type=float)
    run.add_argument("--gamma", type=float)
    run.add_argument("--beta", type=float)
    run.add_argument("--schedule", help="power:C[:p] | constant:eta | sc:mu")
    run.add_argument("--seed", type=int)
    run.add_argument("--data-seed", type=int, default=0)
    run.add_argument("--iters", type=int)
    run.add_argument("--n", type=int)
    run.add_argument("--d", type=int)
    run.add_argument("--nnz", type=int)
    run.add_argument("--mu", type=float)
    run.add_argument("--ridge", type=float)
    run.add_argument("--rho", type=float)
    run.add_argument("--cadence", type=int)
    run.add_argument("--out", help="CSV output path")
    run.add_argument("--manifest", help="manifest JSON path")
    run.set_defaults(func=cmd_run)

    gen = sub.add_parser("gen", help="generate a synthetic dataset")
    gen.add_argument("--model", choices=bench.MODELS, required=True)
    gen.add_argument("--n", type=int, default=200)
    gen.add_argument("--d", type=int, default=400)
    gen.add_argument("--nnz", type=int, default=100)
    gen.add_argument("--noise-var", type=float, default=1e-3)
    gen.add_argument("--n-groups", type=int, default=10)
    gen.add_argument("--max-block", type=int, default=50)
    gen.add_argument("--frac-nnz", type=float, default=0.05)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--normalize-rows", action="store_true")
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen)

    cert = sub.add_parser("certify", help="emit a contraction certificate")
    cert.add_argument("--alpha", type=float, required=True)
    cert.add_argument("--gamma", type=float, required=True)
    cert.add_argument("--beta", type=float, default=1.0)
    cert.add_argument("--b-dim", type=int, default=2)
    cert.add_argument("--random-b", action="store_true",
                      help="random Gaussian B instead of -I")
    cert.add_argument("--seed", type=int, default=0)
    cert.add_argument("--s-scale", type=float, default=0.0)
    cert.add_argument("--t-scale", type=float, default=0.0)
    cert.add_argument("--delta", type=float)
    cert.add_argument("--out")
    cert.set_defaults(func=cmd_certify)

    slope = sub.add_parser("slope", help="fit a rate slope on an existing CSV")
    slope.add_argument("--csv", required=True)
    slope.add_argument("--f-star", type=float, required=True)
    slope.add_argument("--burn-in", type=float, default=0.0)
    slope.add_argument("--rho", type=float, default=1.0)
    slope.add_argument("--solver")
    slope.set_defaults(func=cmd_slope)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
