"""Preset experiments and CSV emission.

The benchmark table pits the fluid value, the stationary fluid price, and
the re-solving heuristic against the exact optimal value on the standard
bernoulli instance (alpha = 3/4, beta = 1/2, prices in [0, 1], normalized
initial inventory 5/16).  Sweeps vary the inventory-to-optimum gap and the
curvature of the demand curve; the hindsight comparison bounds the gap of
the clairvoyant benchmark on additive-noise models.  All outputs are plain
CSV, full precision, deterministic for a fixed base seed.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from .demand import (
    KIND_BERNOULLI,
    DemandModel,
    model_from_dict,
    benchmark_model,
)
from .errors import ConfigError, ResourceGuardError, UnsupportedModelError
from .policies import exact_policy_values, resolving_policy, static_policy
from .sim import fluid_value, ho_inner_values, parse_y0_rule

TABLE2_T_CAP = 2**15
KNOWN_POLICIES = ("static", "resolving", "dp", "ho")

GAP_SWEEP_X_T = (0.3, 0.325, 0.35, 0.375)
CONCAVITY_SWEEP_SLOPES = (0.3, 0.5, 0.7, 0.9)
CONCAVITY_SWEEP_X_T = 0.1


@dataclass
class ExperimentConfig:
    """A named regret-estimation run over a grid of horizons."""

    name: str
    model: dict
    T_list: list[int]
    y0_rule: str = "round(5/16*T)"
    policies: list[str] = field(default_factory=lambda: ["static", "resolving"])
    replications: int = 10_000
    base_seed: int = 0
    out_path: str | None = None

    def __post_init__(self):
        if not self.T_list:
            raise ConfigError("T_list must be nonempty")
        if list(self.T_list) != sorted(self.T_list):
            raise ConfigError("T_list must be ascending")
        unknown = set(self.policies) - set(KNOWN_POLICIES)
        if unknown:
            raise ConfigError(f"unknown policies: {sorted(unknown)}")
        parse_y0_rule(self.y0_rule)
        model_from_dict(self.model)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "model": self.model,
            "T_list": list(self.T_list),
            "y0_rule": self.y0_rule,
            "policies": list(self.policies),
            "replications": self.replications,
            "base_seed": self.base_seed,
            "out_path": self.out_path,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        try:
            return cls(
                name=obj["name"],
                model=obj["model"],
                T_list=[int(t) for t in obj["T_list"]],
                y0_rule=obj.get("y0_rule", "round(5/16*T)"),
                policies=list(obj.get("policies", ["static", "resolving"])),
                replications=int(obj.get("replications", 10_000)),
                base_seed=int(obj.get("base_seed", 0)),
                out_path=obj.get("out_path"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad experiment config: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


@dataclass
class SweepConfig:
    """Regret-vs-horizon sweep; kind selects which model knob varies."""

    kind: str
    T_list: list[int]

    def __post_init__(self):
        if self.kind not in ("gap", "concavity"):
            raise ConfigError(f"sweep kind must be 'gap' or 'concavity', got {self.kind!r}")
        if not self.T_list or list(self.T_list) != sorted(self.T_list):
            raise ConfigError("T_list must be nonempty ascending")


# -- CSV helpers -------------------------------------------------------------


def write_csv(rows: list[dict], columns: list[str], path=None) -> str:
    """Serialize rows to CSV with a fixed column order; returns the text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


# -- benchmark table ----------------------------------------------------------


TABLE2_COLUMNS = ["log2_T", "T", "dp_value", "fluid_value",
                  "fluid_regret", "static_regret", "resolving_regret"]


def table2_rows(T_list=None, model: DemandModel | None = None,
                y0_rule: str = "round(5/16*T)", sliced_dp: bool = False,
                max_workers: int = 4) -> list[dict]:
    """Exact regret rows of the benchmark table, one per horizon.

    Regret is measured against the exact optimal value: positive for the
    two policies, negative for the fluid value (which upper-bounds every
    policy).  Horizons above 2**15 are refused unless sliced_dp is set.
    Cells are independent pure computations, evaluated on a bounded worker
    pool; output order follows T_list regardless.
    """
    model = model or benchmark_model()
    if model.kind != KIND_BERNOULLI:
        raise UnsupportedModelError("the benchmark table needs exact (bernoulli) evaluation")
    T_list = list(T_list) if T_list is not None else [2**k for k in range(6, 16)]
    if max(T_list) > TABLE2_T_CAP and not sliced_dp:
        raise ResourceGuardError(
            f"T above {TABLE2_T_CAP} requires the sliced evaluator; pass sliced_dp=True")
    rule = parse_y0_rule(y0_rule)

    def cell(T: int) -> dict:
        y0 = rule(T)
        x_T = y0 / T
        values = exact_policy_values(model, T, y0, {
            "static": static_policy(model, x_T),
            "resolving": resolving_policy(model),
        })
        dp = values["dp"]
        fluid = fluid_value(model, T, y0)
        return {
            "log2_T": _log2_label(T),
            "T": T,
            "dp_value": dp,
            "fluid_value": fluid,
            "fluid_regret": dp - fluid,
            "static_regret": dp - values["static"],
            "resolving_regret": dp - values["resolving"],
        }

    return _pooled(cell, T_list, max_workers)


def _pooled(fn, items, max_workers: int) -> list:
    workers = max(1, min(max_workers, len(items)))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_table2(T_list=None, out_path=None, sliced_dp: bool = False,
               display=None) -> list[dict]:
    """Compute the benchmark table, optionally writing CSV and a 2-decimal display."""
    rows = table2_rows(T_list=T_list, sliced_dp=sliced_dp)
    write_csv(rows, TABLE2_COLUMNS, out_path)
    if display is not None:
        header = "log2_T    " + "".join(f"{r['log2_T']:>8}" for r in rows)
        display(header)
        for key, label in (("fluid_regret", "fluid"), ("static_regret", "static"),
                           ("resolving_regret", "resolving")):
            display(f"{label:<10}" + "".join(f"{r[key]:8.2f}" for r in rows))
    return rows


def _log2_label(T: int):
    k = T.bit_length() - 1
    return k if 2**k == T else float(math.log2(T))


# -- sweeps -------------------------------------------------------------------


SWEEP_COLUMNS = ["sweep", "value", "T", "y0", "dp_value", "resolving_regret"]


def sweep_rows(config: SweepConfig, max_workers: int = 4) -> list[dict]:
    """Re-solving regret curves over T for each sweep value.

    The gap sweep fixes the demand curve (alpha = .75, beta = .5) and moves
    the initial inventory toward the unconstrained optimum .375; the
    curvature sweep sets alpha = beta = b with inventory rate 0.1.  Initial
    units are round(x_T * T), so the realized inventory rate can differ
    from the nominal sweep value at small T.
    """
    if config.kind == "gap":
        cases = [(x_T, benchmark_model()) for x_T in GAP_SWEEP_X_T]
    else:
        cases = [(CONCAVITY_SWEEP_X_T,
                  DemandModel.linear_bernoulli(alpha=b, beta=b, p_lo=0.0, p_hi=1.0))
                 for b in CONCAVITY_SWEEP_SLOPES]
    cells = []
    for x_T, model in cases:
        frac = Fraction(x_T).limit_denominator(10**6)
        value_label = float(x_T) if config.kind == "gap" else model.beta
        for T in config.T_list:
            cells.append((model, frac, value_label, T))

    def cell(args) -> dict:
        model, frac, value_label, T = args
        y0 = int(round(frac * T))
        values = exact_policy_values(model, T, y0, {"resolving": resolving_policy(model)})
        return {
            "sweep": config.kind,
            "value": value_label,
            "T": T,
            "y0": y0,
            "dp_value": values["dp"],
            "resolving_regret": values["dp"] - values["resolving"],
        }

    return _pooled(cell, cells, max_workers)


def boundary_regret_increasing(rows: list[dict], boundary: float = 0.375) -> bool:
    """True when the boundary-inventory regret curve increases along T."""
    curve = sorted((r["T"], r["resolving_regret"]) for r in rows
                   if r["sweep"] == "gap" and r["value"] == boundary)
    return all(b > a for (_, a), (_, b) in zip(curve, curve[1:]))


def run_sweep(config: SweepConfig, out_path=None) -> list[dict]:
    rows = sweep_rows(config)
    if config.kind == "gap" and not boundary_regret_increasing(rows):
        warnings.warn("boundary-inventory regret is not increasing across the T grid",
                      stacklevel=2)
    write_csv(rows, SWEEP_COLUMNS, out_path)
    return rows


# -- hindsight comparison ------------------------------------------------------


HO_COLUMNS = ["T", "fluid_value", "ho_value", "ci_half_width", "gap"]


def run_ho_compare(model: DemandModel, T_list, x_T: float, replications: int,
                   base_seed: int, out_path=None) -> list[dict]:
    """Gap of the clairvoyant fixed-price benchmark below the fluid value.

    Per replication the clairvoyant sees the realized mean noise and earns
    the closed-form inner expectation of its fixed price; the gap to the
    fluid value stays bounded by a constant independent of T.
    """
    if model.kind == KIND_BERNOULLI:
        raise UnsupportedModelError("hindsight comparison needs an additive-noise model")
    rows = []
    for T in T_list:
        values = ho_inner_values(model, T, x_T, base_seed, replications)
        fluid = T * float(model.revenue_rate_unchecked(min(x_T, model.x_u)))
        mean = float(values.mean())
        half = 1.959963984540054 * float(values.std(ddof=1)) / (len(values) ** 0.5)
        rows.append({
            "T": T,
            "fluid_value": fluid,
            "ho_value": mean,
            "ci_half_width": half,
            "gap": fluid - mean,
        })
    write_csv(rows, HO_COLUMNS, out_path)
    return rows


# -- regret report emission -----------------------------------------------------


REGRET_COLUMNS = ["T", "policy", "value", "ci_half_width",
                  "regret_vs_dp", "regret_vs_fluid"]


def regret_report_rows(reports) -> list[dict]:
    return [{
        "T": r.T,
        "policy": r.policy,
        "value": r.value,
        "ci_half_width": r.ci_half_width,
        "regret_vs_dp": r.regret_vs_dp,
        "regret_vs_fluid": r.regret_vs_fluid,
    } for r in reports]


# -- trace emission ---------------------------------------------------------------


TRACE_COLUMNS = ["tau_remaining", "price", "demand_rate", "xi",
                 "realized_demand", "inventory_after", "revenue"]


def trace_rows(trace) -> list[dict]:
    return [{
        "tau_remaining": int(trace.tau_remaining[i]),
        "price": float(trace.price[i]),
        "demand_rate": float(trace.demand_rate[i]),
        "xi": float(trace.xi[i]),
        "realized_demand": float(trace.realized_demand[i]),
        "inventory_after": float(trace.inventory_after[i]),
        "revenue": float(trace.revenue[i]),
    } for i in range(trace.T)]
