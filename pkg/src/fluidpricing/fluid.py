"""Fluid relaxation solvers for single and multiple products.

The fluid problem maximizes the mean revenue rate subject to the demand
rate staying below the current normalized inventory (and inside the model
domain).  For one product the solution is the closed-form min rule; for
several products it is a box-constrained strictly concave quadratic
program solved by a primal active-set method.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .demand import DemandModel, MultiDemandModel
from .errors import DegeneracyWarning, DomainError, SolverError

ACTIVE_TOL = 1e-10
DUAL_TOL = 1e-10
_KKT_TOL = 1e-12


@dataclass
class FluidSolution:
    """Constrained optimum of the fluid problem.

    ``lam`` holds the duals of the inventory constraints, embedded on the
    full index range (zero off the active set).  ``active_set`` lists the
    inventory-constrained products.  ``clamped`` marks a single-product
    right-hand side below the demand floor that was lifted to d_lo;
    ``degenerate`` marks an active constraint whose dual is (near) zero,
    i.e. boundary inventory.
    """

    x_c: np.ndarray
    lam: np.ndarray
    active_set: list[int]
    objective: float
    clamped: bool = False
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "x_c": self.x_c.tolist(),
            "lambda": self.lam.tolist(),
            "active_set": self.active_set,
            "objective": self.objective,
        }


def solve_fluid_single(model: DemandModel, x: float) -> FluidSolution:
    """Closed-form fluid solution for one product: x_c = min(x, x_u).

    Right-hand sides below the demand floor d_lo arise when inventory is
    nearly depleted; they are clamped up to d_lo and flagged, matching the
    simulator's shut-off-at-zero convention.
    """
    if x < 0:
        raise DomainError(f"normalized inventory must be nonnegative, got {x}")
    x_u = model.x_u
    clamped = x < model.d_lo
    x_c = min(max(x, model.d_lo), x_u)
    active = x <= x_u + ACTIVE_TOL
    lam = model.revenue_slope(x_c) if active else 0.0
    degenerate = active and lam <= DUAL_TOL
    if degenerate:
        warnings.warn(
            f"inventory constraint active with near-zero dual at x={x} (boundary inventory)",
            DegeneracyWarning,
            stacklevel=2,
        )
    return FluidSolution(
        x_c=np.array([x_c]),
        lam=np.array([lam if active else 0.0]),
        active_set=[0] if active else [],
        objective=model.revenue_rate(x_c),
        clamped=clamped,
        degenerate=degenerate,
    )


def solve_fluid_multi(model: MultiDemandModel, x: np.ndarray) -> FluidSolution:
    """Maximize r over the box [0, min(box_hi, x)] by an active-set method.

    Starts from the clipped unconstrained Newton point and alternates
    equality-constrained solves on the working set with ratio steps onto
    blocking bounds, releasing the most negative dual until the KKT
    conditions hold.  Strict concavity makes every working-set system
    nonsingular, so failure to converge signals a bad model.
    """
    rhs = np.asarray(x, dtype=float)
    if rhs.shape != (model.n,):
        raise DomainError(f"inventory vector must have shape ({model.n},)")
    if np.any(rhs < 0):
        raise DomainError("normalized inventory must be nonnegative componentwise")
    ub = np.minimum(model.box_hi, rhs)
    x_c = _box_qp_max(model.H, model.g, np.zeros(model.n), ub)

    grad = model.revenue_grad(x_c)
    active = np.abs(x_c - rhs) <= ACTIVE_TOL
    lam = np.where(active, np.maximum(grad, 0.0), 0.0)
    active_set = [int(k) for k in np.nonzero(active)[0]]
    degenerate = any(lam[k] <= DUAL_TOL for k in active_set)
    if degenerate:
        warnings.warn(
            "active inventory constraint with near-zero dual (boundary inventory region)",
            DegeneracyWarning,
            stacklevel=2,
        )
    return FluidSolution(
        x_c=x_c,
        lam=lam,
        active_set=active_set,
        objective=model.revenue(x_c),
        degenerate=degenerate,
    )


def active_partition(model: MultiDemandModel, x: np.ndarray) -> tuple[list[int], list[int]]:
    """Split products into inventory-constrained (I) and unconstrained (U)."""
    sol = solve_fluid_multi(model, x)
    I = sol.active_set
    U = [k for k in range(model.n) if k not in I]
    return I, U


def _box_qp_max(H: np.ndarray, g: np.ndarray, lb: np.ndarray, ub: np.ndarray,
                fixed: np.ndarray | None = None) -> np.ndarray:
    """Maximize g.x + x.H.x/2 over lb <= x <= ub, H negative definite.

    ``fixed`` marks coordinates pinned at their (equal) bounds from the
    start; they are never released.  Primal active-set iteration with a
    working-set change budget of 2**n + 10.
    """
    n = g.shape[0]
    if fixed is None:
        fixed = np.zeros(n, dtype=bool)
    ub = np.maximum(ub, lb)  # guard FP dust in callers

    # start at the clipped Newton point, feasible by construction
    x = np.clip(np.linalg.solve(-H, g), lb, ub)
    at_lo = ~fixed & (x <= lb + ACTIVE_TOL)
    at_up = ~fixed & (x >= ub - ACTIVE_TOL)
    budget = 2**n + 10
    changes = 0
    while True:
        free = ~(fixed | at_lo | at_up)
        x_eq = x.copy()
        x_eq[at_lo & ~fixed] = lb[at_lo & ~fixed]
        x_eq[at_up & ~fixed] = ub[at_up & ~fixed]
        if free.any():
            rhs = -(g[free] + H[np.ix_(free, ~free)] @ x_eq[~free])
            x_eq[free] = np.linalg.solve(H[np.ix_(free, free)], rhs)
        step = x_eq - x
        if np.abs(step).max(initial=0.0) <= _KKT_TOL:
            # working-set optimum reached: check duals
            grad = g + H @ x
            release = None
            worst = -DUAL_TOL
            for k in range(n):
                if fixed[k]:
                    continue
                if at_up[k] and grad[k] < worst:
                    worst, release = grad[k], (k, "up")
                elif at_lo[k] and -grad[k] < worst:
                    worst, release = -grad[k], (k, "lo")
            if release is None:
                return np.clip(x, lb, ub)
            k, side = release
            (at_up if side == "up" else at_lo)[k] = False
            changes += 1
        else:
            # ratio test toward the equality solution
            alpha = 1.0
            blocker = None
            for k in np.nonzero(free)[0]:
                if step[k] > _KKT_TOL and x[k] + step[k] > ub[k]:
                    a = (ub[k] - x[k]) / step[k]
                    if a < alpha:
                        alpha, blocker = a, (k, "up")
                elif step[k] < -_KKT_TOL and x[k] + step[k] < lb[k]:
                    a = (lb[k] - x[k]) / step[k]
                    if a < alpha:
                        alpha, blocker = a, (k, "lo")
            x = x + alpha * step
            if blocker is not None:
                k, side = blocker
                (at_up if side == "up" else at_lo)[k] = True
                x[k] = ub[k] if side == "up" else lb[k]
                changes += 1
        if changes > budget:
            raise SolverError(
                f"active-set iteration exceeded {budget} working-set changes; "
                "is the Hessian negative definite?"
            )


def box_qp2_batch(a11, a22, a12, q1, q2, ub1, ub2):
    """Exact elementwise maximization of a two-variable quadratic over boxes.

    Maximizes q1*x1 + q2*x2 + (a11*x1^2 + a22*x2^2)/2 + a12*x1*x2 over
    0 <= x_k <= ub_k, with all arguments broadcasting elementwise.  The
    diagonal curvatures a11, a22 must be negative: then every edge
    restriction is strictly concave, so the maximum is attained either at
    the interior stationary point (when the quadratic is concave) or at a
    clipped edge-stationary point, and enumerating those five candidates
    is exact.  Returns (x1, x2, objective).
    """
    a11, a22, a12, q1, q2, ub1, ub2 = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (a11, a22, a12, q1, q2, ub1, ub2))
    )

    def value(x1, x2):
        return q1 * x1 + q2 * x2 + 0.5 * (a11 * x1 * x1 + a22 * x2 * x2) + a12 * x1 * x2

    # clipped stationary points of the four edges
    cands = []
    for v1 in (np.zeros_like(ub1), ub1):
        x2 = np.clip(-(q2 + a12 * v1) / a22, 0.0, ub2)
        cands.append((v1, x2, value(v1, x2)))
    for v2 in (np.zeros_like(ub2), ub2):
        x1 = np.clip(-(q1 + a12 * v2) / a11, 0.0, ub1)
        cands.append((x1, v2, value(x1, v2)))
    # interior stationary point, valid where the quadratic is concave
    det = a11 * a22 - a12 * a12
    with np.errstate(divide="ignore", invalid="ignore"):
        xi1 = (-a22 * q1 + a12 * q2) / det
        xi2 = (a12 * q1 - a11 * q2) / det
    ok = (det > 0) & (xi1 >= 0) & (xi1 <= ub1) & (xi2 >= 0) & (xi2 <= ub2)
    xi1 = np.where(ok, xi1, 0.0)
    xi2 = np.where(ok, xi2, 0.0)
    cands.append((xi1, xi2, np.where(ok, value(xi1, xi2), -np.inf)))

    best_x1, best_x2, best_v = cands[0]
    for x1, x2, v in cands[1:]:
        take = v > best_v
        best_x1 = np.where(take, x1, best_x1)
        best_x2 = np.where(take, x2, best_x2)
        best_v = np.where(take, v, best_v)
    return best_x1, best_x2, best_v


@dataclass
class PartialOptimum:
    """Revenue maximized over the unconstrained products with the constrained block pinned.

    ``grad`` is the envelope gradient (the revenue gradient restricted to
    the pinned block at the full solution); ``hess`` the Schur complement
    of the free block in the Hessian; ``lipschitz_z`` a bound on how fast
    the full solution moves per unit change of the pinned sub-vector.
    """

    z: np.ndarray
    value: float
    grad: np.ndarray
    hess: np.ndarray
    full_solution: np.ndarray
    lipschitz_z: float


def partial_optimum(model: MultiDemandModel, I: list[int], z) -> PartialOptimum:
    """Maximize r over x in the domain box with x[I] pinned at z."""
    I = sorted(int(k) for k in I)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (len(I),):
        raise DomainError(f"z must have one entry per pinned index, expected {len(I)}")
    if np.any(z < -ACTIVE_TOL) or np.any(z > model.box_hi[I] + ACTIVE_TOL):
        raise DomainError("z outside the projection of the domain box")

    n = model.n
    U = [k for k in range(n) if k not in I]
    lb = np.zeros(n)
    ub = model.box_hi.copy()
    fixed = np.zeros(n, dtype=bool)
    lb[I] = ub[I] = np.clip(z, 0.0, model.box_hi[I])
    fixed[I] = True
    x_star = _box_qp_max(model.H, model.g, lb, ub, fixed=fixed)

    grad_full = model.revenue_grad(x_star)
    grad = grad_full[I]
    # Schur complement over the free (interior) part of the unpinned block
    free_U = [k for k in U if lb[k] + ACTIVE_TOL < x_star[k] < ub[k] - ACTIVE_TOL]
    H = model.H
    H_II = H[np.ix_(I, I)]
    if free_U:
        H_IF = H[np.ix_(I, free_U)]
        H_FF = H[np.ix_(free_U, free_U)]
        J_u = -np.linalg.solve(H_FF, H_IF.T)  # d x_U* / d z
        hess = H_II + H_IF @ J_u
        lip = float(np.sqrt(np.linalg.eigvalsh(np.eye(len(I)) + J_u.T @ J_u).max())) if I else 1.0
    else:
        hess = H_II
        lip = 1.0
    return PartialOptimum(
        z=z,
        value=model.revenue(x_star),
        grad=grad,
        hess=hess,
        full_solution=x_star,
        lipschitz_z=lip,
    )
