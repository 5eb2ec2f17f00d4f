"""Command line harness: generate | estimate | sweep | oracle.

Data goes to stdout (or --out / --out-dir files), logs go to stderr, so
the commands compose in pipelines. Exit codes: 0 success, 1 solver or
runtime failure, 2 bad usage / unreadable or invalid input files.

Outputs are byte-deterministic for fixed inputs; pass --timing to include
measured wall-clock times instead of zeros.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import (
    GridSizeError,
    ParseError,
    SolverError,
    UnusableLinkError,
    ValidationError,
)
from .experiment import (
    ExperimentConfig,
    prepare_problem,
    run_estimate,
    run_sweep,
    write_sweep_outputs,
)
from .gamp import report_to_dict
from .oracle import GridSpec, grid_map, log_posterior
from .scenario import (
    load_dataset,
    load_scenario,
    make_canyon_scenario,
    make_free_space_scenario,
    save_dataset,
    scenario_to_dict,
    synthesize_dataset,
)

USAGE_ERROR = 2
RUNTIME_ERROR = 1


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _emit(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _solver_overrides(args) -> dict:
    overrides = {}
    if args.k_iter is not None:
        overrides["k_iter"] = args.k_iter
    if args.k_gamp is not None:
        overrides["k_gamp"] = args.k_gamp
    if args.delta_tr is not None:
        overrides["delta_tr"] = args.delta_tr
    if args.tau_w is not None:
        overrides["tau_w"] = args.tau_w
    if args.damping is not None:
        overrides["damping"] = args.damping
    return overrides


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k-iter", type=int, default=None, help="outer iterations")
    p.add_argument("--k-gamp", type=int, default=None, help="inner steps per outer")
    p.add_argument("--delta-tr", type=float, default=None, help="trust-region width")
    p.add_argument("--tau-w", type=float, default=None, help="output noise variance")
    p.add_argument("--damping", type=float, default=None, help="pseudo-residual damping")


def _load_problem(args):
    scenario = load_scenario(args.scenario)
    if args.dataset:
        dataset = load_dataset(args.dataset)
    else:
        if args.sigma is None:
            raise ValidationError("need --dataset or --sigma to obtain measurements")
        dataset = synthesize_dataset(scenario, args.sigma, args.seed)
    return scenario, dataset


def cmd_generate(args) -> int:
    if args.template == "canyon":
        scenario = make_canyon_scenario(
            n_materials=args.materials,
            n_links=args.links,
            seed=args.seed,
            length_m=args.length,
            width_m=args.width,
            wavelength_m=args.wavelength,
        )
    else:
        scenario = make_free_space_scenario(
            n_links=args.links, seed=args.seed, wavelength_m=args.wavelength
        )
    _emit(_dump(scenario_to_dict(scenario)), args.out)
    if args.dataset_out is not None:
        if args.sigma is None:
            raise ValidationError("--dataset-out needs --sigma")
        save_dataset(synthesize_dataset(scenario, args.sigma, args.seed), args.dataset_out)
        _log(f"dataset written to {args.dataset_out}")
    return 0


def cmd_estimate(args) -> int:
    scenario, dataset = _load_problem(args)
    report, info = run_estimate(
        scenario,
        dataset,
        overrides=_solver_overrides(args),
        jacobian_method=args.jacobian,
        with_oracle=args.oracle,
        grid_step=args.grid_step,
    )
    if info["dropped_links"]:
        _log(f"dropped {len(info['dropped_links'])} unusable link(s): "
             f"{info['dropped_links']}")
    payload = report_to_dict(report, include_timing=args.timing)
    payload["n_links_used"] = info["n_used"]
    payload["dropped_links"] = info["dropped_links"]
    if args.oracle:
        payload["oracle"] = info["oracle"]
    _emit(_dump(payload), args.out)
    return 0


def cmd_sweep(args) -> int:
    if args.config:
        config = ExperimentConfig.from_json(args.config)
        if args.out_dir:
            config.out_dir = args.out_dir
        config.include_timing = config.include_timing or args.timing
    else:
        if not args.scenario:
            raise ValidationError("sweep needs --config or --scenario")
        if not args.sigmas:
            raise ValidationError("sweep needs --sigmas")
        config = ExperimentConfig(
            scenario_path=args.scenario,
            sigmas=[float(s) for s in args.sigmas.split(",") if s != ""],
            n_seeds=args.seeds,
            overrides=_solver_overrides(args),
            out_dir=args.out_dir,
            include_timing=args.timing,
        )
    if not config.out_dir:
        raise ValidationError("sweep needs --out-dir (or out_dir in the config)")
    rows, summary = run_sweep(config, workers=args.workers)
    runs_path, summary_path = write_sweep_outputs(rows, summary, config.out_dir)
    n_err = sum(1 for r in rows if r["status"] != "ok")
    _log(f"sweep: {len(rows)} rows ({n_err} failed) -> {runs_path}, {summary_path}")
    return 0


def cmd_oracle(args) -> int:
    scenario, dataset = _load_problem(args)
    prob = prepare_problem(scenario, dataset)
    if prob.dropped:
        _log(f"dropped {len(prob.dropped)} unusable link(s): {prob.dropped}")
    sigma_z = float(np.sqrt(dataset.noise_var))
    eps_map = grid_map(scenario, prob.ray_cache, prob.y, sigma_z, GridSpec(args.grid_step))
    payload = {
        "eps_map": [float(v) for v in eps_map],
        "grid_step": args.grid_step,
        "log_posterior": log_posterior(scenario, prob.ray_cache, prob.y, eps_map, sigma_z),
        "n_links_used": len(prob.kept),
    }
    _emit(_dump(payload), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="permgamp",
        description="Estimate material permittivities from path-loss data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a template scenario file")
    g.add_argument("--template", choices=("canyon", "free-space"), default="canyon")
    g.add_argument("--materials", type=int, default=2)
    g.add_argument("--links", type=int, default=100)
    g.add_argument("--seed", type=int, default=7)
    g.add_argument("--length", type=float, default=50.0)
    g.add_argument("--width", type=float, default=10.0)
    g.add_argument("--wavelength", type=float, default=0.1)
    g.add_argument("--sigma", type=float, default=None)
    g.add_argument("--dataset-out", default=None, help="also synthesize a dataset")
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("estimate", help="run the solver on one dataset")
    e.add_argument("--scenario", required=True)
    e.add_argument("--dataset", default=None)
    e.add_argument("--sigma", type=float, default=None, help="synthesize with this noise")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--jacobian", choices=("analytic", "central_fd"), default="analytic")
    e.add_argument("--oracle", action="store_true", help="append grid-search comparison")
    e.add_argument("--grid-step", type=float, default=0.05)
    e.add_argument("--timing", action="store_true", help="report measured wall time")
    e.add_argument("--out", default=None)
    _add_solver_flags(e)
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("sweep", help="noise sweep emitting runs.csv and summary.csv")
    s.add_argument("--config", default=None, help="JSON experiment config")
    s.add_argument("--scenario", default=None)
    s.add_argument("--sigmas", default=None, help="comma-separated noise stds (dB)")
    s.add_argument("--seeds", type=int, default=20, help="seeds per sigma")
    s.add_argument("--out-dir", default=None)
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--timing", action="store_true")
    _add_solver_flags(s)
    s.set_defaults(func=cmd_sweep)

    o = sub.add_parser("oracle", help="brute-force grid MAP for a dataset")
    o.add_argument("--scenario", required=True)
    o.add_argument("--dataset", default=None)
    o.add_argument("--sigma", type=float, default=None)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--grid-step", type=float, default=0.05)
    o.add_argument("--out", default=None)
    o.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError, GridSizeError, FileNotFoundError) as exc:
        _log(f"error: {exc}")
        return USAGE_ERROR
    except (SolverError, UnusableLinkError, RuntimeError) as exc:
        _log(f"error: {exc}")
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
