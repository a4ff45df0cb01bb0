"""Seeded Monte Carlo engine, trace diagnostics, and regret aggregation.

Traces follow the inventory dynamics: realized demand is the posted rate
plus noise, revenue is price times the sold (inventory-censored) quantity,
and inventory never goes negative.  Periods are recorded chronologically
with their remaining-period index tau = T .. 1.

The noise stream is counter based (see rng): replication i of base seed s
draws its period-tau noise from a fixed hash of (s, i, period), so runs are
reproducible, order independent, and two policies can share one stream for
common-random-numbers comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import rng
from .demand import KIND_BERNOULLI, DemandModel, MultiDemandModel
from .errors import DomainError, ResourceGuardError, UnsupportedModelError
from .policies import (
    MultiResolvingPolicy,
    exact_policy_values,
    resolving_policy,
    solve_dp_multi,
    static_policy,
)

_Z_VALUES = {0.90: 1.6448536269514722, 0.95: 1.959963984540054, 0.99: 2.5758293035489004}


@dataclass
class SimTrace:
    """Per-period record of one simulated trajectory.

    Arrays are chronological; tau_remaining[i] is the number of periods
    left when row i was decided.  realized_demand is pre-censoring
    (demand_rate + xi); revenue reflects the inventory-censored sale.
    """

    T: int
    y0: float
    seed: int
    tau_remaining: np.ndarray
    price: np.ndarray
    demand_rate: np.ndarray
    xi: np.ndarray
    realized_demand: np.ndarray
    inventory_after: np.ndarray
    revenue: np.ndarray

    @property
    def total_revenue(self) -> float:
        return float(self.revenue.sum())


def simulate(model, policy, T: int, y0, seed: int):
    """Run the dynamics forward under a state-feedback policy.

    Deterministic given the seed.  Dispatches on the model family; for the
    multi-product family see MultiSimTrace.
    """
    if isinstance(model, MultiDemandModel):
        return simulate_multi(model, policy, T, y0, seed)
    if T < 1 or y0 < 0:
        raise DomainError("need T >= 1 and y0 >= 0")
    u = rng.uniform_block(seed, 0, T)
    is_bernoulli = model.kind == KIND_BERNOULLI
    w = 0.0 if is_bernoulli else float(model.noise_half_width)

    tau = np.arange(T, 0, -1)
    price = np.empty(T)
    rate = np.empty(T)
    xi = np.empty(T)
    realized = np.empty(T)
    inventory = np.empty(T)
    revenue = np.empty(T)
    y = float(y0)
    for i in range(T):
        t = T - i
        try:
            dec = policy.decide(y, t)
        except DomainError as exc:
            raise DomainError(f"policy failed at remaining period {t}: {exc}") from exc
        if dec.shut_off:
            price[i], rate[i], xi[i], realized[i], revenue[i] = np.inf, 0.0, 0.0, 0.0, 0.0
            inventory[i] = y
            continue
        d = dec.demand_rate
        if is_bernoulli:
            sale = 1.0 if u[i] < d else 0.0
            xi[i] = sale - d
            realized[i] = sale
        else:
            xi[i] = (2.0 * u[i] - 1.0) * w
            realized[i] = d + xi[i]
        sold = min(realized[i], y)
        price[i], rate[i] = dec.price, d
        revenue[i] = dec.price * sold
        y = max(0.0, y - realized[i])
        inventory[i] = y
    return SimTrace(
        T=T, y0=float(y0), seed=int(seed), tau_remaining=tau, price=price,
        demand_rate=rate, xi=xi, realized_demand=realized,
        inventory_after=inventory, revenue=revenue,
    )


@dataclass
class BatchResult:
    """Aggregates of a vectorized batch of replications."""

    total_revenue: np.ndarray
    sum_xi: np.ndarray
    t_sharp: np.ndarray | None = None

    @property
    def mean(self) -> float:
        return float(self.total_revenue.mean())

    def ci_half_width(self, confidence: float = 0.95) -> float:
        z = _Z_VALUES.get(round(confidence, 2))
        if z is None:
            from scipy.stats import norm

            z = float(norm.ppf(0.5 + confidence / 2.0))
        n = self.total_revenue.size
        return z * float(self.total_revenue.std(ddof=1)) / math.sqrt(n) if n > 1 else math.inf


def simulate_batch(model: DemandModel, policy, T: int, y0, base_seed: int,
                   n_reps: int, track_t_sharp: bool = False) -> BatchResult:
    """Advance n_reps independent replications in lockstep (vectorized).

    Replication i uses the stream keyed by base_seed XOR splitmix64(i).
    With track_t_sharp the harmonic noise series is accumulated along the
    way and the stopping time recorded per replication (meaningful for
    re-solving traces).
    """
    if isinstance(model, MultiDemandModel):
        raise UnsupportedModelError("use simulate_batch_multi for the multi-product family")
    seeds = rng.replication_seed(base_seed, np.arange(n_reps))
    is_bernoulli = model.kind == KIND_BERNOULLI
    w = 0.0 if is_bernoulli else float(model.noise_half_width)
    y = np.full(n_reps, float(y0))
    total = np.zeros(n_reps)
    sum_xi = np.zeros(n_reps)
    if track_t_sharp:
        gam = gamma(model, float(y0) / T)
        harm = np.zeros(n_reps)
        t_sharp = np.full(n_reps, 2, dtype=int)
        undecided = np.ones(n_reps, dtype=bool)
    for i in range(T):
        t = T - i
        u = rng.uniforms(seeds, i)
        rates = np.asarray(policy.rates_batch(y, t), dtype=float)
        active = y > 0
        rates = np.where(active, rates, 0.0)
        prices = np.where(active, model.price_of_rate(rates), 0.0)
        if is_bernoulli:
            sale = (u < rates).astype(float)
            xi = np.where(active, sale - rates, 0.0)
            realized = np.where(active, sale, 0.0)
        else:
            xi = np.where(active, (2.0 * u - 1.0) * w, 0.0)
            realized = np.where(active, rates + xi, 0.0)
        total += prices * np.minimum(realized, y)
        sum_xi += xi
        y = np.maximum(0.0, y - realized)
        if track_t_sharp and t >= 2:
            harm += xi / (t - 1)
            exited = undecided & (np.abs(harm) > gam)
            t_sharp[exited] = t
            undecided &= ~exited
    return BatchResult(total_revenue=total, sum_xi=sum_xi,
                       t_sharp=t_sharp if track_t_sharp else None)


# -- diagnostics -------------------------------------------------------------


@dataclass
class Diagnostics:
    """Harmonic noise series, safe band, and stopping time of one trace.

    xi_bar[t] is the harmonic partial sum of noises accumulated before the
    period with t remaining (index by remaining periods; entry 0 is NaN).
    t_sharp is the first period, scanning chronologically, whose update
    pushes the series outside the band, floored at 2.
    """

    gamma: float
    t_sharp: int
    xi_bar: np.ndarray


def gamma(model: DemandModel, x_T: float) -> float:
    """Half-width of the safe band for the harmonic noise series."""
    slope = model.revenue_slope(x_T)
    curv = model.revenue_curvature(x_T)
    return min(x_T - model.d_lo, model.x_u - x_T, -slope / curv)


def harmonic_series(xi: np.ndarray, T: int) -> np.ndarray:
    """Partial sums xi_bar[t] = sum over tau > t of xi_tau / (tau - 1).

    ``xi`` is chronological (first entry is the period with T remaining).
    Returns an array indexed by remaining periods t = 0..T; entry T is 0,
    entry 0 is NaN (the series is defined down to t = 1).
    """
    out = np.full(T + 1, np.nan)
    out[T] = 0.0
    acc = 0.0
    for i in range(T):
        t = T - i
        if t >= 2:
            acc += xi[i] / (t - 1)
            out[t - 1] = acc
    return out


def diagnostics(trace: SimTrace, model: DemandModel, x_T: float | None = None) -> Diagnostics:
    """Stopping-time diagnostics of a re-solving trace."""
    if x_T is None:
        x_T = trace.y0 / trace.T
    gam = gamma(model, x_T)
    xb = harmonic_series(trace.xi, trace.T)
    t_sharp = 2
    for t in range(trace.T, 1, -1):  # chronological scan
        if abs(xb[t - 1]) > gam:
            t_sharp = t
            break
    return Diagnostics(gamma=gam, t_sharp=max(t_sharp, 2), xi_bar=xb)


def harmonic_identity_check(t_sharp: int, delta_seq, xi_r_seq, xi_star_seq) -> float:
    """Residual of the telescoping identity of harmonic correction sums.

    Sequences are indexed tau = T .. t_sharp (chronological order, first
    entry is tau = T).  With D = delta and e = xi_r - xi_star, the sum of
    [D_tau - Dbar_{->tau} + ebar_{->tau} - e_tau] over tau = t_sharp..T
    minus (t_sharp - 1) * (Dbar_{->t_sharp-1} - ebar_{->t_sharp-1})
    vanishes identically; the return value is its floating-point residual.
    """
    delta = np.asarray(delta_seq, dtype=float)
    xi_r = np.asarray(xi_r_seq, dtype=float)
    xi_star = np.asarray(xi_star_seq, dtype=float)
    if not (delta.shape == xi_r.shape == xi_star.shape):
        raise DomainError("sequences must share one length")
    n = delta.size
    T = t_sharp + n - 1
    e = xi_r - xi_star
    taus = np.arange(T, t_sharp - 1, -1)

    def tail_sums(a):
        # hbar[j] = sum_{k<j} a_k/(tau_k - 1) = harmonic sum over tau > tau_j
        contrib = a / (taus - 1.0)
        hbar = np.concatenate([[0.0], np.cumsum(contrib[:-1])])
        final = hbar[-1] + contrib[-1]  # accumulated through tau = t_sharp
        return hbar, final

    dbar, dbar_final = tail_sums(delta)
    ebar, ebar_final = tail_sums(e)
    total = float(np.sum(delta - dbar + ebar - e))
    total -= (t_sharp - 1) * (dbar_final - ebar_final)
    return total


# -- regret estimation -------------------------------------------------------


@dataclass(frozen=True)
class RegretReport:
    """One (T, policy) cell of a benchmark run.

    Exact evaluations carry ci_half_width 0 and replications 0; Monte
    Carlo cells carry the half width of the normal-approximation CI.
    regret_vs_dp is None when no exact DP value is available, with the
    reason spelled out in dp_reason.
    """

    T: int
    policy: str
    value: float
    ci_half_width: float
    replications: int
    fluid_value: float
    dp_value: float | None
    regret_vs_dp: float | None
    regret_vs_fluid: float
    base_seed: int
    dp_reason: str | None = None


def parse_y0_rule(rule):
    """Turn "round(c*T)" with rational c into a callable T -> int."""
    if callable(rule):
        return rule
    text = str(rule).replace(" ", "")
    if not (text.startswith("round(") and text.endswith("*T)")):
        raise DomainError(f"cannot parse y0 rule {rule!r}; expected 'round(c*T)'")
    c = Fraction(text[len("round("):-len("*T)")])
    return lambda T: int(round(c * T))


def fluid_value(model: DemandModel, T: int, y0: float) -> float:
    """Benchmark value T * r(min(y0/T, x_u)), computed from the model."""
    x_T = y0 / T
    return T * float(model.revenue_rate_unchecked(min(x_T, model.x_u)))


def _policy_stream_seed(base_seed: int, policy_name: str, crn: bool) -> int:
    if crn:
        return base_seed
    tag = sum((i + 1) * b for i, b in enumerate(policy_name.encode()))
    return int(rng.replication_seed(base_seed, 0x5EED + tag))


def estimate_regret(model, T_list, y0_rule, policies=("static", "resolving"),
                    replications: int = 10_000, base_seed: int = 0, *,
                    common_random_numbers: bool = False,
                    confidence: float = 0.95) -> list[RegretReport]:
    """Benchmark the given policies against the exact DP and fluid values.

    Bernoulli models are evaluated exactly (no Monte Carlo error; the
    replication count is ignored and CIs are zero).  Other families fall
    back to seeded Monte Carlo, with per-replication streams derived from
    base_seed; with common_random_numbers all policies share one stream.
    """
    rule = parse_y0_rule(y0_rule)
    if isinstance(model, MultiDemandModel):
        return _estimate_regret_multi(model, T_list, rule, policies, replications,
                                      base_seed, confidence)
    reports = []
    for T in T_list:
        y0 = rule(T)
        x_T = y0 / T
        fluid = fluid_value(model, T, y0)
        built = _build_policies(model, x_T, policies)
        if model.kind == KIND_BERNOULLI:
            values = exact_policy_values(model, T, y0, built)
            dp = values["dp"]
            for name in policies:
                val = values[name] if name != "dp" else dp
                reports.append(RegretReport(
                    T=T, policy=name, value=val, ci_half_width=0.0, replications=0,
                    fluid_value=fluid, dp_value=dp, regret_vs_dp=dp - val,
                    regret_vs_fluid=fluid - val, base_seed=base_seed,
                ))
        else:
            for name in policies:
                if name == "dp":
                    raise UnsupportedModelError("the dp policy row needs bernoulli demand")
                seed = _policy_stream_seed(base_seed, name, common_random_numbers)
                if name == "ho":
                    values = _ho_values_batch(model, T, y0, x_T, seed, replications)
                    batch = BatchResult(total_revenue=values, sum_xi=np.zeros_like(values))
                else:
                    batch = simulate_batch(model, built[name], T, y0, seed, replications)
                val = batch.mean
                reports.append(RegretReport(
                    T=T, policy=name, value=val,
                    ci_half_width=batch.ci_half_width(confidence),
                    replications=replications, fluid_value=fluid, dp_value=None,
                    regret_vs_dp=None, regret_vs_fluid=fluid - val,
                    base_seed=base_seed, dp_reason="dp-requires-bernoulli",
                ))
    return reports


def _build_policies(model: DemandModel, x_T: float, names) -> dict:
    built = {}
    for name in names:
        if name == "static":
            built[name] = static_policy(model, x_T)
        elif name == "resolving":
            built[name] = resolving_policy(model)
        elif name == "ho":
            if model.kind == KIND_BERNOULLI:
                raise UnsupportedModelError("ho policy needs additive i.i.d. noise")
            built[name] = None  # per-replication construction
        elif name == "dp":
            pass  # evaluated by the backward pass itself
        else:
            raise DomainError(f"unknown policy {name!r}")
    return {k: v for k, v in built.items() if v is not None}


def _ho_values_batch(model: DemandModel, T: int, y0, x_T: float, base_seed: int,
                     n_reps: int) -> np.ndarray:
    """Simulated revenue of the clairvoyant fixed price, one price per replication.

    Each replication reveals its own realized mean noise, prices at
    f^{-1}(clip(x_T + xi_bar)), then runs the usual censored dynamics with
    the same noises.
    """
    w = float(model.noise_half_width)
    seeds = rng.replication_seed(base_seed, np.arange(n_reps))
    xi = (2.0 * rng.uniforms(seeds[:, None], np.arange(T)[None, :]) - 1.0) * w
    xi_bar = xi.mean(axis=1)
    rates = np.clip(x_T + xi_bar, model.d_lo, model.d_hi)
    prices = model.price_of_rate(rates)
    y = np.full(n_reps, float(y0))
    total = np.zeros(n_reps)
    for i in range(T):
        active = y > 0
        realized = np.where(active, rates + xi[:, i], 0.0)
        total += np.where(active, prices, 0.0) * np.minimum(realized, y)
        y = np.maximum(0.0, y - realized)
    return total


def ho_inner_values(model: DemandModel, T: int, x_T: float, base_seed: int,
                    n_reps: int, chunk: int = 2048) -> np.ndarray:
    """Clairvoyant values with the per-period expectation taken in closed form.

    Conditional on the realized mean noise xi_bar, the fixed clairvoyant
    price earns T * r(clip(x_T + xi_bar)) in expectation (inventory
    censoring ignored, as in the benchmark's defining bound).  The noise
    mean is accumulated in counter chunks to keep memory at O(reps * chunk).
    """
    if model.kind == KIND_BERNOULLI:
        raise UnsupportedModelError("ho benchmark needs additive i.i.d. noise")
    w = float(model.noise_half_width)
    seeds = rng.replication_seed(base_seed, np.arange(n_reps))
    acc = np.zeros(n_reps)
    for start in range(0, T, chunk):
        counters = np.arange(start, min(start + chunk, T))
        acc += rng.uniforms(seeds[:, None], counters[None, :]).sum(axis=1)
    xi_bar = (2.0 * acc / T - 1.0) * w
    rates = np.clip(x_T + xi_bar, model.d_lo, model.d_hi)
    return T * model.revenue_rate_unchecked(rates)


def _estimate_regret_multi(model: MultiDemandModel, T_list, rule, policies,
                           replications, base_seed, confidence) -> list[RegretReport]:
    from .fluid import solve_fluid_multi

    reports = []
    for T in T_list:
        y0 = np.asarray(rule(T), dtype=int)
        fluid = T * solve_fluid_multi(model, y0 / T).objective
        try:
            dp = solve_dp_multi(model, T, y0)
            dp_reason = None
        except (UnsupportedModelError, ResourceGuardError) as exc:
            dp, dp_reason = None, str(exc)
        for name in policies:
            if name == "dp":
                if dp is None:
                    continue
                reports.append(RegretReport(
                    T=T, policy="dp", value=dp, ci_half_width=0.0, replications=0,
                    fluid_value=fluid, dp_value=dp, regret_vs_dp=0.0,
                    regret_vs_fluid=fluid - dp, base_seed=base_seed,
                ))
                continue
            if name != "resolving":
                raise DomainError(f"multi-product estimation supports resolving/dp, not {name!r}")
            batch = simulate_batch_multi(model, T, y0, base_seed, replications)
            val = batch.mean
            reports.append(RegretReport(
                T=T, policy=name, value=val,
                ci_half_width=batch.ci_half_width(confidence),
                replications=replications, fluid_value=fluid, dp_value=dp,
                regret_vs_dp=None if dp is None else dp - val,
                regret_vs_fluid=fluid - val, base_seed=base_seed, dp_reason=dp_reason,
            ))
    return reports


# -- multi-product simulation -------------------------------------------------


@dataclass
class MultiSimTrace:
    T: int
    y0: np.ndarray
    seed: int
    tau_remaining: np.ndarray
    prices: np.ndarray         # (T, n)
    demand_rates: np.ndarray   # (T, n)
    xi: np.ndarray             # (T, n)
    sales: np.ndarray          # (T, n)
    inventory_after: np.ndarray
    revenue: np.ndarray

    @property
    def total_revenue(self) -> float:
        return float(self.revenue.sum())


def simulate_multi(model: MultiDemandModel, policy, T: int, y0, seed: int) -> MultiSimTrace:
    """Forward dynamics for the multi-product family (unit sales per product)."""
    y0 = np.asarray(y0, dtype=float)
    n = model.n
    policy = policy or MultiResolvingPolicy(model)
    tau = np.arange(T, 0, -1)
    prices = np.zeros((T, n))
    rates = np.zeros((T, n))
    xi = np.zeros((T, n))
    sales = np.zeros((T, n))
    inventory = np.zeros((T, n))
    revenue = np.zeros(T)
    y = y0.copy()
    for i in range(T):
        t = T - i
        dec = policy.decide(y, t)
        u = rng.uniforms(np.uint64(seed), np.arange(i * n, (i + 1) * n, dtype=np.uint64))
        sale = (u < dec.demand_rates).astype(float)
        prices[i] = dec.prices
        rates[i] = dec.demand_rates
        sales[i] = sale
        xi[i] = sale - dec.demand_rates
        revenue[i] = float(dec.prices @ sale)
        y = np.maximum(0.0, y - sale)
        inventory[i] = y
    return MultiSimTrace(T=T, y0=y0, seed=int(seed), tau_remaining=tau, prices=prices,
                         demand_rates=rates, xi=xi, sales=sales,
                         inventory_after=inventory, revenue=revenue)


def simulate_batch_multi(model: MultiDemandModel, T: int, y0, base_seed: int,
                         n_reps: int) -> BatchResult:
    """Vectorized re-solving replications for the two-product model."""
    if model.n != 2:
        raise UnsupportedModelError("batch multi-product simulation is implemented for n = 2")
    policy = MultiResolvingPolicy(model)
    seeds = rng.replication_seed(base_seed, np.arange(n_reps))
    y = np.tile(np.asarray(y0, dtype=float), (n_reps, 1))
    total = np.zeros(n_reps)
    sum_xi = np.zeros(n_reps)
    for i in range(T):
        t = T - i
        rates = policy.rates_batch(y, t)
        u = np.stack([rng.uniforms(seeds, 2 * i), rng.uniforms(seeds, 2 * i + 1)], axis=1)
        sale = (u < rates).astype(float)
        prices = model.g[None, :] + 0.5 * (rates @ model.H)
        total += np.einsum("ij,ij->i", prices, sale)
        sum_xi += (sale - rates).sum(axis=1)
        y = np.maximum(0.0, y - sale)
    return BatchResult(total_revenue=total, sum_xi=sum_xi)


# -- theoretical constant ------------------------------------------------------


def constant_bound(model: DemandModel, x_T: float) -> float:
    """Theoretical constant upper-bounding re-solving regret vs the optimal policy.

    Valid for x_T strictly between the demand floor and the unconstrained
    optimum; combines the assumption constants with the stopping-time
    expectation bound E[T_sharp] <= 2 + 4 B^4 / gamma^4.
    """
    if not (model.d_lo < x_T < model.x_u):
        raise DomainError(
            f"constant bound needs x_T in ({model.d_lo}, {model.x_u}), got {x_T}")
    consts = model.assumption_constants()
    gam = gamma(model, x_T)
    curv = abs(model.revenue_curvature(x_T))
    B = consts.B_xi
    r_peak = model.revenue_rate(min(max(model.x_u, model.d_lo), model.d_hi))
    e_tsharp_minus_1 = 1.0 + 4.0 * B**4 / gam**4
    return (consts.M**2 * B**4 / (2.0 * consts.m)
            + 2.0 * (curv * consts.L * B) ** 2 / consts.m
            + 3.0 * curv * B**2
            + r_peak * e_tsharp_minus_1)
