"""Constrained update steps over ``{x in [lo, hi]**K : sum(x) == budget}``.

Both the log-barrier mirror step and the Euclidean projection reduce to a
one-dimensional search for the budget multiplier ``lam``: for fixed ``lam``
every coordinate has a closed-form box-constrained minimizer ``x_k(lam)``,
and ``sum_k x_k(lam)`` is continuous and non-increasing in ``lam``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .policy import ConstraintSet
from .validation import ConvergenceError, InfeasibleError, check_positive, check_rates, check_vector

MAX_DOUBLINGS = 200
MAX_BISECTIONS = 200
BUDGET_RTOL = 1e-10


@dataclass
class StepSpec:
    eta: float
    gradient: np.ndarray
    current: np.ndarray
    constraints: ConstraintSet

    def __post_init__(self):
        self.eta = check_positive(self.eta, "eta")
        self.current = check_rates(self.current, self.constraints.K, "current")
        self.gradient = check_vector(self.gradient, self.constraints.K)


@dataclass
class DualSolve:
    x: np.ndarray
    lambda_star: float
    iterations: int
    residual: float
    trace: list = None


def div_f(x, r):
    """Bregman divergence of the log barrier: ``sum(-log(x/r) + x/r - 1)``."""
    x = check_rates(x, name="x")
    r = check_rates(r, len(x))
    q = x / r
    return float(np.sum(q - 1.0 - np.log(q)))


def barrier_f(r):
    return float(-np.sum(np.log(check_rates(r))))


def dual_bisection(x_of_lam, budget, record=False):
    """Find ``lam`` with ``sum(x_of_lam(lam)) == budget``.

    ``x_of_lam`` must map a multiplier to a box-feasible vector whose sum is
    non-increasing in ``lam``. The bracket grows by doubling outward from 0,
    then is halved until the budget residual drops below ``1e-10 * budget``.
    """
    trace = [] if record else None

    def total(lam):
        x = x_of_lam(lam)
        s = float(x.sum())
        if record:
            trace.append((lam, s))
        return x, s

    tol = BUDGET_RTOL * max(budget, 1e-300)
    x0, s0 = total(0.0)
    if abs(s0 - budget) <= tol:
        return DualSolve(x0, 0.0, 0, abs(s0 - budget), trace)

    step = 1.0
    if s0 > budget:
        lo_lam, x_lo, s_lo = 0.0, x0, s0
        for _ in range(MAX_DOUBLINGS):
            x_hi, s_hi = total(step)
            if s_hi <= budget:
                hi_lam = step
                break
            lo_lam, x_lo, s_lo = step, x_hi, s_hi
            step *= 2.0
        else:
            raise ConvergenceError("could not bracket the budget multiplier")
    else:
        hi_lam, x_hi, s_hi = 0.0, x0, s0
        for _ in range(MAX_DOUBLINGS):
            x_lo, s_lo = total(-step)
            if s_lo >= budget:
                lo_lam = -step
                break
            hi_lam, x_hi, s_hi = -step, x_lo, s_lo
            step *= 2.0
        else:
            raise ConvergenceError("could not bracket the budget multiplier")

    # invariant: s_lo >= budget >= s_hi
    it = 0
    for it in range(1, MAX_BISECTIONS + 1):
        if s_lo - budget <= tol:
            return DualSolve(x_lo, lo_lam, it, s_lo - budget, trace)
        if budget - s_hi <= tol:
            return DualSolve(x_hi, hi_lam, it, budget - s_hi, trace)
        mid = 0.5 * (lo_lam + hi_lam)
        if mid == lo_lam or mid == hi_lam:
            break
        x_mid, s_mid = total(mid)
        if s_mid >= budget:
            lo_lam, x_lo, s_lo = mid, x_mid, s_mid
        else:
            hi_lam, x_hi, s_hi = mid, x_mid, s_mid
    # Bracket collapsed to adjacent floats: blend the two ends onto the plane.
    gap = s_lo - s_hi
    theta = 0.0 if gap <= 0 else (budget - s_hi) / gap
    x = x_hi + theta * (x_lo - x_hi)
    residual = abs(float(x.sum()) - budget)
    if residual > 1e-8 * max(budget, 1.0):
        raise ConvergenceError(f"dual bisection stalled with residual {residual:.3e}")
    return DualSolve(x, 0.5 * (lo_lam + hi_lam), it, residual, trace)


def _check_feasible(spec):
    c = spec.constraints
    if not c.K * c.lo <= c.budget * (1 + 1e-12) or not c.budget <= c.K * c.hi * (1 + 1e-12):
        raise InfeasibleError("constraint set is empty")


def mirror_solve(spec, record=False):
    """Log-barrier mirror step, returning the full :class:`DualSolve`.

    Coordinate-wise, ``eta*g_k*x - log(x) + x/r_k + lam*x`` has derivative
    ``d_k - 1/x`` with ``d_k = eta*g_k + 1/r_k + lam``; its minimizer over the
    box is ``clip(1/d_k, lo, hi)`` when ``d_k > 0`` and ``hi`` otherwise.
    """
    _check_feasible(spec)
    c = spec.constraints
    if c.K == 1:
        return DualSolve(np.array([c.budget]), 0.0, 0, 0.0, [] if record else None)
    base = spec.eta * spec.gradient + 1.0 / spec.current
    lo, hi = c.lo, c.hi

    def x_of_lam(lam):
        d = base + lam
        with np.errstate(divide="ignore"):
            x = np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), hi)
        return np.clip(x, lo, hi)

    return dual_bisection(x_of_lam, c.budget, record=record)


def mirror_descent_step(spec):
    """``argmin_{x in K} eta*<x, g> + div_f(x, current)``."""
    return mirror_solve(spec).x


def euclidean_solve(spec, record=False):
    """Euclidean projection of ``current - eta*g``: ``x_k = clip(y_k - lam, lo, hi)``."""
    _check_feasible(spec)
    c = spec.constraints
    if c.K == 1:
        return DualSolve(np.array([c.budget]), 0.0, 0, 0.0, [] if record else None)
    y = spec.current - spec.eta * spec.gradient
    return dual_bisection(lambda lam: np.clip(y - lam, c.lo, c.hi), c.budget, record=record)


def euclidean_projection_step(spec):
    return euclidean_solve(spec).x


def barrier_init(constraints):
    """Minimizer of ``-sum(log x)`` over the constraint set.

    Stationarity gives ``1/x_k = lam`` for every free coordinate, so the
    solution is the constant vector ``clip(1/lam, lo, hi)``; feasibility puts
    ``budget/K`` inside the box, hence the answer is ``budget/K`` everywhere.
    """
    c = constraints
    if not c.K * c.lo <= c.budget * (1 + 1e-12) or not c.budget <= c.K * c.hi * (1 + 1e-12):
        raise InfeasibleError("constraint set is empty")
    return np.full(c.K, min(max(c.budget / c.K, c.lo), c.hi))
