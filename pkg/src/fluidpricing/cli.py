"""Command-line experiment runner.

Subcommands expose the library's solvers and preset experiments; outputs
are JSON (fluid-solve, dp-value) or CSV (everything else).  Exit codes:
0 success, 2 configuration/usage error, 3 model validation failure,
4 resource guard.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import experiments
from .demand import (
    MultiDemandModel,
    model_from_dict,
    validate_multi,
)
from .errors import (
    ConfigError,
    DomainError,
    ModelValidationError,
    ResourceGuardError,
    SolverError,
    UnsupportedModelError,
)
from .fluid import solve_fluid_multi, solve_fluid_single
from .policies import dp_value, resolving_policy, solve_dp, static_policy
from .sim import estimate_regret, simulate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_RESOURCE = 4


def _load_model(path: str):
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _parse_vector(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",")], dtype=float)


def _parse_t_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",")]


def cmd_fluid_solve(args) -> int:
    model = _load_model(args.model)
    inv = _parse_vector(args.inventory)
    if isinstance(model, MultiDemandModel):
        sol = solve_fluid_multi(model, inv)
    else:
        if inv.size != 1:
            raise ConfigError("single-product model takes one inventory value")
        sol = solve_fluid_single(model, float(inv[0]))
    _emit(json.dumps(sol.to_dict()), args.out)
    return EXIT_OK


def cmd_dp_value(args) -> int:
    model = _load_model(args.model)
    if args.dump_actions:
        table = solve_dp(model, args.T, args.y0)
        rows = []
        for t in range(1, args.T + 1):
            for y in range(1, args.y0 + 1):
                d = float(table.actions[t, y])
                rows.append({"t": t, "y": y, "demand_rate": d,
                             "price": model.inverse_demand(d)})
        experiments.write_csv(rows, ["t", "y", "demand_rate", "price"], args.dump_actions)
        value = table.value(args.T, args.y0)
    else:
        value = dp_value(model, args.T, args.y0)
    _emit(json.dumps({"T": args.T, "y0": args.y0, "value": value}), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = _load_model(args.model)
    if isinstance(model, MultiDemandModel):
        raise ConfigError("trace simulation via the CLI covers single-product models")
    x_T = args.y0 / args.T
    if args.policy == "static":
        policy = static_policy(model, x_T)
    elif args.policy == "resolving":
        policy = resolving_policy(model)
    elif args.policy == "dp":
        policy = solve_dp(model, args.T, args.y0).policy()
    else:
        raise ConfigError(f"unknown policy {args.policy!r}")
    trace = simulate(model, policy, args.T, args.y0, args.seed)
    text = experiments.write_csv(experiments.trace_rows(trace), experiments.TRACE_COLUMNS)
    _emit(text, args.out)
    return EXIT_OK


def cmd_estimate_regret(args) -> int:
    with open(args.config) as fh:
        config = experiments.ExperimentConfig.from_dict(json.load(fh))
    if args.replications is not None:
        config.replications = args.replications
    if args.seed is not None:
        config.base_seed = args.seed
    model = model_from_dict(config.model)
    reports = estimate_regret(
        model, config.T_list, config.y0_rule, tuple(config.policies),
        replications=config.replications, base_seed=config.base_seed,
    )
    rows = experiments.regret_report_rows(reports)
    text = experiments.write_csv(rows, experiments.REGRET_COLUMNS)
    _emit(text, args.out or config.out_path)
    return EXIT_OK


def cmd_table2(args) -> int:
    T_list = _parse_t_list(args.t_list) if args.t_list else None
    rows = experiments.run_table2(T_list=T_list, sliced_dp=args.sliced_dp,
                                  display=print if args.out else None)
    text = experiments.write_csv(rows, experiments.TABLE2_COLUMNS)
    _emit(text, args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    T_list = _parse_t_list(args.t_list) if args.t_list else [2**k for k in range(4, 13)]
    config = experiments.SweepConfig(kind=args.kind, T_list=T_list)
    rows = experiments.run_sweep(config)
    text = experiments.write_csv(rows, experiments.SWEEP_COLUMNS)
    _emit(text, args.out)
    return EXIT_OK


def cmd_ho_compare(args) -> int:
    model = _load_model(args.model)
    T_list = _parse_t_list(args.t_list)
    rows = experiments.run_ho_compare(model, T_list, args.x_t,
                                      args.replications, args.seed)
    text = experiments.write_csv(rows, experiments.HO_COLUMNS)
    _emit(text, args.out)
    return EXIT_OK


def cmd_validate_model(args) -> int:
    with open(args.model) as fh:
        obj = json.load(fh)
    model = model_from_dict(obj)  # raises ModelValidationError on bad single models
    if isinstance(model, MultiDemandModel):
        report = validate_multi(model)
        _emit(json.dumps({
            "ok": report.ok,
            "violations": list(report.violations),
            "m_prime": report.m_prime,
            "spectral_norm": report.spectral_norm,
        }), args.out)
        if not report.ok:
            return EXIT_VALIDATION
    else:
        consts = model.assumption_constants()
        _emit(json.dumps({"ok": True, "constants": vars(consts)}), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fluidpricing",
        description="Dynamic pricing simulation and regret benchmarking",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        p.add_argument("--out", default=None, help="output path ('-' or omit for stdout)")
        return p

    p = add("fluid-solve", cmd_fluid_solve, help="solve the fluid problem for a model")
    p.add_argument("--model", required=True, help="model JSON path")
    p.add_argument("--inventory", required=True, help="comma-separated normalized inventory")

    p = add("dp-value", cmd_dp_value, help="exact optimal value V(T, y0)")
    p.add_argument("--model", required=True)
    p.add_argument("-T", type=int, required=True)
    p.add_argument("--y0", type=int, required=True)
    p.add_argument("--dump-actions", default=None, help="write the action table CSV here")

    p = add("simulate", cmd_simulate, help="simulate one seeded trace to CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--policy", required=True, choices=["static", "resolving", "dp"])
    p.add_argument("-T", type=int, required=True)
    p.add_argument("--y0", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)

    p = add("estimate-regret", cmd_estimate_regret, help="run a regret estimation config")
    p.add_argument("--config", required=True, help="experiment config JSON path")
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)

    p = add("table2", cmd_table2, help="exact benchmark regret table")
    p.add_argument("--t-list", default=None, help="comma-separated horizons (default 2^6..2^15)")
    p.add_argument("--sliced-dp", action="store_true",
                   help="allow horizons above 2^15 via the sliced evaluator")

    p = add("sweep", cmd_sweep, help="regret sweeps (inventory gap or demand curvature)")
    p.add_argument("--kind", required=True, choices=["gap", "concavity"])
    p.add_argument("--t-list", default=None)

    p = add("ho-compare", cmd_ho_compare, help="hindsight benchmark vs fluid value")
    p.add_argument("--model", required=True)
    p.add_argument("--x-t", type=float, required=True)
    p.add_argument("--t-list", required=True)
    p.add_argument("--replications", type=int, default=4000)
    p.add_argument("--seed", type=int, default=0)

    p = add("validate-model", cmd_validate_model, help="check model assumptions")
    p.add_argument("--model", required=True)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, DomainError, UnsupportedModelError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelValidationError as exc:
        print(f"model validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ResourceGuardError,) as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
