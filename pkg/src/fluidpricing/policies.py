"""Pricing policies and exact policy evaluation.

Policies are deterministic state feedbacks: given remaining inventory y and
remaining periods t they return a price (equivalently a demand rate).  For
the bernoulli family sales are unit sized, inventory is integer, and both
the optimal policy and the value of any state-feedback policy can be
computed exactly by backward induction over the (periods x inventory)
lattice, which removes all sampling error from benchmark tables.

Time is indexed by periods REMAINING throughout: t = T is the first
decision of the horizon and t = 1 the last.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .demand import KIND_BERNOULLI, DemandModel, MultiDemandModel
from .errors import DomainError, ResourceGuardError, UnsupportedModelError
from .fluid import box_qp2_batch, solve_fluid_multi

# dense tables above this many entries must use the sliced evaluator
DENSE_TABLE_MAX_ENTRIES = 64_000_000
MULTI_STATE_CAP = 10_000_000


@dataclass(frozen=True)
class PolicyDecision:
    """One period's decision; shut_off means inventory is exhausted."""

    price: float
    demand_rate: float
    shut_off: bool = False


@dataclass(frozen=True)
class HindsightInfo:
    """Clairvoyant side information: the realized mean noise over the horizon."""

    xi_bar: float


def _effective_rate_cap(model: DemandModel) -> float:
    # the revenue maximizer, kept inside the demand interval
    return min(max(model.x_u, model.d_lo), model.d_hi)


class StaticPolicy:
    """Stationary price at the fluid optimum for the initial inventory."""

    name = "static"

    def __init__(self, model: DemandModel, x_T: float):
        self.model = model
        self.x_T = x_T
        self.rate = min(max(x_T, model.d_lo), _effective_rate_cap(model))
        self.price = model.inverse_demand(self.rate)

    def decide(self, y: float, t: int) -> PolicyDecision:
        if y <= 0:
            return PolicyDecision(price=np.inf, demand_rate=0.0, shut_off=True)
        return PolicyDecision(price=self.price, demand_rate=self.rate)

    def rates_batch(self, y: np.ndarray, t: int) -> np.ndarray:
        return np.where(np.asarray(y) > 0, self.rate, 0.0)


class ResolvingPolicy:
    """Re-solves the fluid problem each period at the current normalized inventory.

    With one product the fluid solution is closed form, so the decision is
    f^{-1}(clip(y / t, d_lo, x_u)); right-hand sides below the demand floor
    are clamped to d_lo (the highest admissible price) until inventory hits
    zero, where the policy shuts off.
    """

    name = "resolving"

    def __init__(self, model: DemandModel):
        self.model = model
        self._cap = _effective_rate_cap(model)

    def decide(self, y: float, t: int) -> PolicyDecision:
        if y <= 0:
            return PolicyDecision(price=np.inf, demand_rate=0.0, shut_off=True)
        if t < 1:
            raise DomainError("remaining periods must be >= 1")
        rate = min(max(y / t, self.model.d_lo), self._cap)
        return PolicyDecision(price=self.model.inverse_demand(rate), demand_rate=rate)

    def rates_batch(self, y: np.ndarray, t: int) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        rate = np.clip(y / t, self.model.d_lo, self._cap)
        return np.where(y > 0, rate, 0.0)


class HindsightPolicy:
    """Fixed clairvoyant price targeting the noise-corrected inventory rate."""

    name = "ho"

    def __init__(self, model: DemandModel, x_T: float, info: HindsightInfo):
        if model.kind == KIND_BERNOULLI:
            raise UnsupportedModelError(
                "hindsight benchmark needs price-independent i.i.d. noise; "
                "bernoulli noise depends on the posted price"
            )
        self.model = model
        self.x_T = x_T
        self.info = info
        self.rate = float(np.clip(x_T + info.xi_bar, model.d_lo, model.d_hi))
        self.price = model.inverse_demand(self.rate)

    def decide(self, y: float, t: int) -> PolicyDecision:
        if y <= 0:
            return PolicyDecision(price=np.inf, demand_rate=0.0, shut_off=True)
        return PolicyDecision(price=self.price, demand_rate=self.rate)

    def rates_batch(self, y: np.ndarray, t: int) -> np.ndarray:
        return np.where(np.asarray(y) > 0, self.rate, 0.0)


def static_policy(model: DemandModel, x_T: float) -> StaticPolicy:
    if x_T <= 0:
        raise DomainError("static policy needs positive initial inventory rate")
    return StaticPolicy(model, x_T)


def resolving_policy(model: DemandModel) -> ResolvingPolicy:
    return ResolvingPolicy(model)


def ho_policy(model: DemandModel, x_T: float, info: HindsightInfo) -> HindsightPolicy:
    return HindsightPolicy(model, x_T, info)


# -- exact dynamic programming (bernoulli demand) ---------------------------


@dataclass
class ValueTable:
    """Dense optimal value and action tables over (remaining periods, inventory).

    values[t, y] is the optimal expected revenue-to-go with t periods and y
    units left; actions[t, y] the maximizing demand rate.  Row t = 0 and
    column y = 0 are identically zero.
    """

    model: DemandModel
    horizon: int
    max_inventory: int
    values: np.ndarray
    actions: np.ndarray

    def value(self, t: int, y: int) -> float:
        return float(self.values[t, y])

    def policy(self) -> "DpPolicy":
        return DpPolicy(self)


class DpPolicy:
    """State feedback replaying the actions of a solved value table."""

    name = "dp"

    def __init__(self, table: ValueTable):
        self.table = table

    def decide(self, y: float, t: int) -> PolicyDecision:
        if y <= 0:
            return PolicyDecision(price=np.inf, demand_rate=0.0, shut_off=True)
        rate = float(self.table.actions[t, int(y)])
        return PolicyDecision(price=self.table.model.inverse_demand(rate), demand_rate=rate)

    def rates_batch(self, y: np.ndarray, t: int) -> np.ndarray:
        y = np.asarray(y, dtype=int)
        rates = self.table.actions[t, np.clip(y, 0, self.table.max_inventory)]
        return np.where(y > 0, rates, 0.0)


def _require_bernoulli(model: DemandModel, what: str) -> None:
    if not isinstance(model, DemandModel) or model.kind != KIND_BERNOULLI:
        raise UnsupportedModelError(f"{what} requires bernoulli (unit-sale) demand")


def solve_dp(model: DemandModel, T: int, y0: int,
             max_entries: int = DENSE_TABLE_MAX_ENTRIES) -> ValueTable:
    """Backward induction with the closed-form inner maximizer.

    The one-step objective r(d) + d*V[t-1][y-1] + (1-d)*V[t-1][y] is a
    concave quadratic in d, so the maximizer is
    clip((alpha + beta*(V[t-1][y-1] - V[t-1][y])) / 2, d_lo, d_hi).
    Memory is (T+1)*(y0+1) doubles per table; larger instances must use
    dp_value / exact_policy_values, which keep two time slices only.
    """
    _require_bernoulli(model, "exact dynamic programming")
    if T < 1 or y0 < 0:
        raise DomainError("need T >= 1 and y0 >= 0")
    entries = (T + 1) * (y0 + 1)
    if entries > max_entries:
        raise ResourceGuardError(
            f"dense value table would hold {entries} entries (> {max_entries}); "
            "use the sliced evaluator instead"
        )
    alpha, beta = model.alpha, model.beta
    d_lo, d_hi = model.d_lo, model.d_hi
    values = np.zeros((T + 1, y0 + 1))
    actions = np.zeros((T + 1, y0 + 1))
    for t in range(1, T + 1):
        prev = values[t - 1]
        dv = prev[:-1] - prev[1:]
        d = np.clip((alpha + beta * dv) / 2.0, d_lo, d_hi)
        actions[t, 1:] = d
        values[t, 1:] = d * (alpha - d) / beta + d * prev[:-1] + (1.0 - d) * prev[1:]
    return ValueTable(model=model, horizon=T, max_inventory=y0, values=values, actions=actions)


def exact_policy_values(model: DemandModel, T: int, y0: int,
                        policies: dict[str, object] | None = None) -> dict[str, float]:
    """Optimal value plus exact values of given state-feedback policies.

    One backward pass holding a single inventory slice per evaluated
    object, so memory is O(y0) regardless of T.  Policies must expose
    rates_batch(y_array, t).  Returns {"dp": V, name: value, ...}.
    """
    _require_bernoulli(model, "exact policy evaluation")
    if T < 1 or y0 < 0:
        raise DomainError("need T >= 1 and y0 >= 0")
    policies = dict(policies or {})
    alpha, beta = model.alpha, model.beta
    d_lo, d_hi = model.d_lo, model.d_hi
    V, V_next = np.zeros(y0 + 1), np.zeros(y0 + 1)
    W = {name: (np.zeros(y0 + 1), np.zeros(y0 + 1)) for name in policies}
    y_pos = np.arange(1, y0 + 1)
    for t in range(1, T + 1):
        d = np.clip((alpha + beta * (V[:-1] - V[1:])) / 2.0, d_lo, d_hi)
        V_next[1:] = d * (alpha - d) / beta + d * V[:-1] + (1.0 - d) * V[1:]
        for name, pol in policies.items():
            rates = np.asarray(pol.rates_batch(y_pos, t), dtype=float)
            prev, nxt = W[name]
            nxt[1:] = rates * (alpha - rates) / beta + rates * prev[:-1] + (1.0 - rates) * prev[1:]
            W[name] = (nxt, prev)
        V, V_next = V_next, V
    out = {"dp": float(V[y0])}
    for name, (w, _) in W.items():
        out[name] = float(w[y0])
    return out


def dp_value(model: DemandModel, T: int, y0: int) -> float:
    """V(T, y0) with O(y0) memory."""
    return exact_policy_values(model, T, y0)["dp"]


def evaluate_policy_exact(model: DemandModel, policy, T: int, y0: int) -> float:
    """Exact expected revenue of one deterministic state-feedback policy."""
    return exact_policy_values(model, T, y0, {"policy": policy})["policy"]


# -- multiple products -------------------------------------------------------


@dataclass(frozen=True)
class MultiPolicyDecision:
    prices: np.ndarray
    demand_rates: np.ndarray
    shut_off: np.ndarray  # per-product mask


class MultiResolvingPolicy:
    """Re-solving heuristic for the multi-product model."""

    name = "resolving"

    def __init__(self, model: MultiDemandModel):
        self.model = model

    def decide(self, y: np.ndarray, t: int) -> MultiPolicyDecision:
        y = np.asarray(y, dtype=float)
        sol = solve_fluid_multi(self.model, y / t)
        rates = sol.x_c
        return MultiPolicyDecision(
            prices=self.model.price_of_rate(rates),
            demand_rates=rates,
            shut_off=y <= 0,
        )

    def rates_batch(self, y: np.ndarray, t: int) -> np.ndarray:
        """Vectorized fluid re-solve for a batch of 2-product states.

        y has shape (N, 2); the fluid problem per row is a box QP solved
        exactly by stationary-candidate enumeration.
        """
        model = self.model
        if model.n != 2:
            raise UnsupportedModelError("batch re-solving is implemented for n = 2")
        y = np.asarray(y, dtype=float)
        ub = np.minimum(model.box_hi, y / t)
        x1, x2, _ = box_qp2_batch(
            model.H[0, 0], model.H[1, 1], model.H[0, 1],
            model.g[0], model.g[1], ub[:, 0], ub[:, 1],
        )
        return np.stack([x1, x2], axis=1)


def multi_resolving_policy(model: MultiDemandModel) -> MultiResolvingPolicy:
    return MultiResolvingPolicy(model)


def solve_dp_multi(model: MultiDemandModel, T: int, y0, state_cap: int = MULTI_STATE_CAP) -> float:
    """Exact optimal value for two products with per-product unit sales.

    Backward induction over the integer inventory lattice.  The one-step
    objective in the demand-rate pair is a quadratic whose diagonal
    curvature comes from H (strictly negative), so its box-constrained
    maximum is found exactly by enumerating the interior and clipped-edge
    stationary points.
    """
    if model.n != 2:
        raise UnsupportedModelError("exact multi-product DP is implemented for n = 2 only")
    y0 = np.asarray(y0, dtype=int)
    if y0.shape != (2,) or np.any(y0 < 0):
        raise DomainError("y0 must be a nonnegative integer pair")
    m1, m2 = int(y0[0]) + 1, int(y0[1]) + 1
    if T * m1 * m2 > state_cap:
        raise ResourceGuardError(f"state space {T * m1 * m2} exceeds cap {state_cap}")
    H, g, c0 = model.H, model.g, model.c
    ub1 = np.where(np.arange(m1) >= 1, model.box_hi[0], 0.0)[:, None] * np.ones((1, m2))
    ub2 = np.where(np.arange(m2) >= 1, model.box_hi[1], 0.0)[None, :] * np.ones((m1, 1))
    V = np.zeros((m1, m2))
    for _ in range(T):
        b = np.zeros_like(V)
        b[1:, :] = V[:-1, :]  # after a unit sale of product 1
        cc = np.zeros_like(V)
        cc[:, 1:] = V[:, :-1]
        dd = np.zeros_like(V)
        dd[1:, 1:] = V[:-1, :-1]
        w = V - b - cc + dd
        q1 = g[0] + b - V
        q2 = g[1] + cc - V
        x1, x2, J = box_qp2_batch(H[0, 0], H[1, 1], H[0, 1] + w, q1, q2, ub1, ub2)
        V = c0 + V + J
    return float(V[y0[0], y0[1]])
