"""Periodic sync policies: constraint sets, policy cost, gradient and the oracle optimum.

A periodic policy syncs arm ``k`` every ``1/r_k`` time units, and its
long-run average cost is ``J(r) = (1/K) sum_k r_k * Cbar_k(1/r_k)`` where
``Cbar_k`` is the arm's expected cost accumulated over one gap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .processes import CostBank, CostProcess
from .validation import ConvergenceError, InfeasibleError, check_rates

_FEAS_TOL = 1e-12


@dataclass(frozen=True)
class ConstraintSet:
    """Box ``[lo, hi]**K`` intersected with the plane ``sum(x) == budget``."""

    lo: float
    hi: float
    budget: float
    K: int

    def __post_init__(self):
        if not self.K >= 1:
            raise InfeasibleError("K must be at least 1")
        if not 0 < self.lo <= self.hi:
            raise InfeasibleError(f"need 0 < lo <= hi, got lo={self.lo}, hi={self.hi}")
        slack = _FEAS_TOL * max(1.0, self.budget)
        if not (self.K * self.lo - slack <= self.budget <= self.K * self.hi + slack):
            raise InfeasibleError(
                f"budget {self.budget} outside [K*lo, K*hi] = "
                f"[{self.K * self.lo}, {self.K * self.hi}]"
            )

    @classmethod
    def for_instance(cls, instance, epsilon=0.0):
        """The learner's set: box ``[r_min, r_max/(1+eps)]``, budget ``B/(1+eps)``.

        ``epsilon=0`` gives the full-budget set the oracle optimizes over.
        """
        scale = 1.0 + float(epsilon)
        return cls(instance.r_min, instance.r_max / scale, instance.B / scale, instance.K)

    def contains(self, x, tol=1e-8):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.K,):
            return False
        in_box = np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol)
        return bool(in_box and abs(x.sum() - self.budget) <= tol * max(1.0, self.budget))

    def with_budget(self, budget, K=None):
        return ConstraintSet(self.lo, self.hi, float(budget), self.K if K is None else K)


@dataclass
class ProblemInstance:
    """K cost processes plus the rate constraints ``r_min``, ``r_max`` and bandwidth ``B``."""

    processes: list
    r_min: float
    r_max: float
    B: float
    U: float = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.processes = list(self.processes)
        if not self.processes:
            raise ValueError("an instance needs at least one arm")
        for p in self.processes:
            if not isinstance(p, CostProcess):
                raise TypeError(f"not a CostProcess: {p!r}")
        self.r_min, self.r_max, self.B = float(self.r_min), float(self.r_max), float(self.B)
        if self.U is None:
            self.U = max(p.cost_cap for p in self.processes)
        self.U = float(self.U)
        # raises InfeasibleError when K*r_min <= B <= K*r_max fails
        ConstraintSet.for_instance(self)

    @property
    def K(self):
        return len(self.processes)

    @cached_property
    def bank(self):
        return CostBank(self.processes)

    def constraints(self, epsilon=0.0):
        return ConstraintSet.for_instance(self, epsilon)


def policy_cost(instance, r):
    """Expected average cost ``J(r)`` of the periodic policy with sync rates ``r``."""
    r = check_rates(r, instance.K)
    return float(np.mean(r * instance.bank.mean_cumulative_cost(1.0 / r)))


def per_arm_slope(instance, r):
    """``d/dr_k [r_k Cbar_k(1/r_k)] = Cbar_k(1/r_k) - c_k(1/r_k)/r_k`` (always <= 0)."""
    r = np.asarray(r, dtype=float)
    tau = 1.0 / r
    bank = instance.bank
    return bank.mean_cumulative_cost(tau) - tau * bank.mean_cost(tau)


def analytic_gradient(instance, r):
    """Gradient of ``J`` at ``r``; each component is the arm slope divided by K."""
    r = check_rates(r, instance.K)
    return per_arm_slope(instance, r) / instance.K


def _rates_at_level(instance, level, lo, hi, iters=64):
    """Largest ``r`` in ``[lo, hi]`` with ``slope_k(r) <= level``, per arm.

    Slopes are non-decreasing in ``r`` (convexity), so a vectorized bisection
    on each coordinate finds the crossing.
    """
    K = instance.K
    s_lo = per_arm_slope(instance, np.full(K, lo))
    s_hi = per_arm_slope(instance, np.full(K, hi))
    r = np.where(s_hi <= level, hi, lo)
    mid_mask = (s_hi > level) & (s_lo <= level)
    if np.any(mid_mask):
        idx = np.flatnonzero(mid_mask)
        a = np.full(len(idx), lo)
        b = np.full(len(idx), hi)
        sub = _SubInstance(instance, idx)
        for _ in range(iters):
            m = 0.5 * (a + b)
            below = sub.slope(m) <= level
            a = np.where(below, m, a)
            b = np.where(below, b, m)
        r[idx] = a
    return r


class _SubInstance:
    def __init__(self, instance, idx):
        self.instance = instance
        self.idx = idx
        self._full = np.full(instance.K, 1.0)

    def slope(self, r_sub):
        full = self._full.copy()
        full[self.idx] = r_sub
        return per_arm_slope(self.instance, full)[self.idx]


def oracle_optimal_rates(instance, constraints=None, tol=1e-10, max_iter=200):
    """Minimize ``J`` over a constraint set using the known expectation oracles.

    KKT: every coordinate strictly inside the box shares one slope value
    ``-nu``; coordinates at ``lo`` have slope >= it and those at ``hi`` <= it.
    ``sum(r(nu))`` is monotone in ``nu``, so ``nu`` is found by bisection and
    the budget is met exactly by interpolating between the final bracket ends.
    """
    if constraints is None:
        constraints = instance.constraints(0.0)
    lo, hi, budget, K = constraints.lo, constraints.hi, constraints.budget, constraints.K
    if K != instance.K:
        raise ValueError("constraint set dimension does not match the instance")
    if K == 1:
        return np.array([budget])

    # level = -K*nu is the common per-arm slope; search it in [min slope at lo, 0]
    level_lo = float(np.min(per_arm_slope(instance, np.full(K, lo))))
    level_hi = 0.0
    r_a = _rates_at_level(instance, level_lo, lo, hi)  # sum <= budget
    r_b = _rates_at_level(instance, level_hi, lo, hi)  # sum >= budget
    if r_b.sum() < budget - tol * budget or r_a.sum() > budget + tol * budget:
        raise InfeasibleError("budget not reachable inside the box")
    for _ in range(max_iter):
        if r_b.sum() - r_a.sum() <= tol * budget:
            break
        mid = 0.5 * (level_lo + level_hi)
        if mid in (level_lo, level_hi):
            break
        r_m = _rates_at_level(instance, mid, lo, hi)
        if r_m.sum() <= budget:
            level_lo, r_a = mid, r_m
        else:
            level_hi, r_b = mid, r_m
    gap = r_b.sum() - r_a.sum()
    theta = 0.0 if gap <= 0 else (budget - r_a.sum()) / gap
    r = np.clip(r_a + theta * (r_b - r_a), lo, hi)
    if abs(r.sum() - budget) > 1e-8 * max(1.0, budget):
        raise ConvergenceError(f"oracle budget residual {abs(r.sum() - budget):.3e}")
    return r


def kkt_violation(instance, constraints, r, bound_tol=1e-9):
    """Largest KKT violation of ``r`` as a minimizer of ``J`` over ``constraints``.

    Returns the spread of gradient components over free coordinates, or the
    amount by which a clipped coordinate's gradient sits on the wrong side of
    the shared value, whichever is larger.
    """
    g = analytic_gradient(instance, r)
    at_lo = r <= constraints.lo + bound_tol
    at_hi = r >= constraints.hi - bound_tol
    free = ~(at_lo | at_hi)
    if np.any(free):
        common = float(np.median(g[free]))
        spread = float(np.max(np.abs(g[free] - common)))
    else:
        # all coordinates clipped: any value between the two groups works
        common = 0.5 * (np.min(g[at_lo], initial=np.inf) + np.max(g[at_hi], initial=-np.inf))
        if not np.isfinite(common):
            common = float(np.median(g))
        spread = 0.0
    lo_viol = float(np.max(common - g[at_lo], initial=0.0))
    hi_viol = float(np.max(g[at_hi] - common, initial=0.0))
    return max(spread, lo_viol, hi_viol)
