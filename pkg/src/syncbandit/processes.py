"""Cost-generating processes for synchronization bandits.

Every arm accrues cost continuously as a function of its staleness ``tau``
(time since its last sync-mode play). A process exposes two views:

* a stochastic one used by the simulator (``reset_at_sync`` draws the
  within-interval randomness, ``sample_cost_at`` reads the path), and
* exact expectation oracles (``mean_cost`` and ``mean_cumulative_cost``)
  used for policy cost, gradients and regret.

:class:`CostBank` stacks K processes so the simulator and the policy code
can evaluate all arms with numpy at once.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod

import numpy as np

# Below this value of lam*tau the Poisson cumulative cost is summed as a series.
_POISSON_SERIES_CUTOFF = 0.5
_POISSON_SERIES_TERMS = 24


def _as_nonneg_time(tau):
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0) or np.any(np.isnan(tau)):
        raise ValueError("staleness tau must be non-negative")
    return tau


def poly_mean_cumulative(mean_coef, exponent, tau):
    """Expected cumulative cost ``int_0^tau a * s**p ds = a * tau**(p+1) / (p+1)``."""
    tau = _as_nonneg_time(tau)
    exponent = np.asarray(exponent, dtype=float)
    out = np.asarray(mean_coef, dtype=float) * tau ** (exponent + 1.0) / (exponent + 1.0)
    return out if out.ndim else float(out)


def poly_mean_cost(mean_coef, exponent, tau):
    tau = _as_nonneg_time(tau)
    out = np.asarray(mean_coef, dtype=float) * tau ** np.asarray(exponent, dtype=float)
    return out if out.ndim else float(out)


def poisson_mean_cost(rate, tau):
    """Probability that a Poisson(rate) process fired at least once in ``tau``."""
    rate = np.asarray(rate, dtype=float)
    if np.any(rate <= 0):
        raise ValueError("Poisson rate must be positive")
    tau = _as_nonneg_time(tau)
    out = -np.expm1(-rate * tau)
    return out if out.ndim else float(out)


def poisson_mean_cumulative(rate, tau):
    """Expected cumulative indicator cost ``tau + (exp(-rate*tau) - 1) / rate``.

    ``x + expm1(-x)`` cancels catastrophically for small ``x = rate*tau``, so
    that range is evaluated from the alternating series ``sum_{n>=2} (-x)**n / n!``.
    """
    rate = np.asarray(rate, dtype=float)
    if np.any(rate <= 0):
        raise ValueError("Poisson rate must be positive")
    tau = _as_nonneg_time(tau)
    rate, tau = np.broadcast_arrays(rate, tau)
    x = rate * tau
    out = np.empty_like(x)
    small = x < _POISSON_SERIES_CUTOFF
    if np.any(small):
        xs = x[small]
        term = xs * xs / 2.0
        acc = term.copy()
        for n in range(3, _POISSON_SERIES_TERMS):
            term = -term * xs / n
            acc += term
        out[small] = acc / rate[small]
    big = ~small
    out[big] = (x[big] + np.expm1(-x[big])) / rate[big]
    return out if out.ndim else float(out)


class CostProcess(ABC):
    """One arm's cost process.

    Subclasses keep the randomness drawn at the last sync play as their only
    mutable state, so samples within one sync interval form a monotone path.
    """

    family: str = ""

    @abstractmethod
    def reset_at_sync(self, rng):
        """Draw fresh within-interval randomness; call on every sync play."""

    @abstractmethod
    def sample_cost_at(self, tau):
        """Instantaneous cost at staleness ``tau`` on the current path."""

    @abstractmethod
    def mean_cost(self, tau):
        ...

    @abstractmethod
    def mean_cumulative_cost(self, tau):
        ...

    @property
    @abstractmethod
    def cost_cap(self):
        ...

    @abstractmethod
    def get_params(self):
        """Constructor arguments, for serialization."""

    # Vectorized hooks used by CostBank. ``params`` is the dict built by
    # ``_stack`` for a group of processes of the same family.
    @classmethod
    @abstractmethod
    def _stack(cls, processes):
        ...

    @staticmethod
    @abstractmethod
    def _draw(params, idx, rng):
        ...

    @staticmethod
    @abstractmethod
    def _cost(params, idx, state, tau):
        ...

    @staticmethod
    @abstractmethod
    def _mean_cost(params, tau):
        ...

    @staticmethod
    @abstractmethod
    def _mean_cumulative(params, tau):
        ...

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"


class PolynomialProcess(CostProcess):
    """Cost ``a * tau**p`` with ``a`` redrawn uniformly around ``mean_coef`` at each sync.

    Parameters
    ----------
    mean_coef : float
        Mean coefficient; the per-interval coefficient is drawn from
        ``Uniform[mean_coef*(1-noise), mean_coef*(1+noise)]``.
    exponent : float
        Power ``p > 0``.
    noise : float
        Relative half-width of the coefficient distribution, in ``[0, 1]``.
    cap : float
        Cost bound ``U`` valid inside the instance's rate box.
    """

    family = "polynomial"

    def __init__(self, mean_coef, exponent, noise=0.1, cap=40.0):
        if mean_coef < 0:
            raise ValueError("mean_coef must be non-negative")
        if not exponent > 0:
            raise ValueError("exponent must be positive")
        if not 0 <= noise <= 1:
            raise ValueError("noise must lie in [0, 1]")
        self.mean_coef = float(mean_coef)
        self.exponent = float(exponent)
        self.noise = float(noise)
        self.cap = float(cap)
        self.a_current = self.mean_coef

    @property
    def cost_cap(self):
        return self.cap

    def get_params(self):
        return {"mean_coef": self.mean_coef, "exponent": self.exponent,
                "noise": self.noise, "cap": self.cap}

    def reset_at_sync(self, rng):
        lo = self.mean_coef * (1.0 - self.noise)
        hi = self.mean_coef * (1.0 + self.noise)
        self.a_current = float(rng.uniform(lo, hi)) if hi > lo else self.mean_coef
        return self

    def sample_cost_at(self, tau):
        if tau < 0:
            raise ValueError("staleness tau must be non-negative")
        return self.a_current * tau ** self.exponent

    def mean_cost(self, tau):
        return poly_mean_cost(self.mean_coef, self.exponent, tau)

    def mean_cumulative_cost(self, tau):
        return poly_mean_cumulative(self.mean_coef, self.exponent, tau)

    @classmethod
    def _stack(cls, processes):
        return {
            "mean_coef": np.array([p.mean_coef for p in processes]),
            "exponent": np.array([p.exponent for p in processes]),
            "noise": np.array([p.noise for p in processes]),
        }

    @staticmethod
    def _draw(params, idx, rng):
        abar = params["mean_coef"][idx]
        u = rng.random(len(idx))
        return abar * (1.0 + params["noise"][idx] * (2.0 * u - 1.0))

    @staticmethod
    def _cost(params, idx, state, tau):
        return state * tau ** params["exponent"][idx]

    @staticmethod
    def _mean_cost(params, tau):
        return params["mean_coef"] * tau ** params["exponent"]

    @staticmethod
    def _mean_cumulative(params, tau):
        p = params["exponent"]
        return params["mean_coef"] * tau ** (p + 1.0) / (p + 1.0)


class PoissonIndicatorProcess(CostProcess):
    """Cost 1 once a Poisson(rate) process has fired since the last sync, else 0.

    Only the first event time matters, so a reset draws it from
    ``Exponential(rate)`` and the path is the step function at that time.
    """

    family = "poisson"

    def __init__(self, rate):
        if not rate > 0:
            raise ValueError("Poisson rate must be positive")
        self.rate = float(rate)
        self.first_event = math.inf

    @property
    def cost_cap(self):
        return 1.0

    def get_params(self):
        return {"rate": self.rate}

    def reset_at_sync(self, rng):
        self.first_event = float(rng.exponential(1.0 / self.rate))
        return self

    def sample_cost_at(self, tau):
        if tau < 0:
            raise ValueError("staleness tau must be non-negative")
        if tau == 0:
            return 0.0
        return 1.0 if tau >= self.first_event else 0.0

    def mean_cost(self, tau):
        return poisson_mean_cost(self.rate, tau)

    def mean_cumulative_cost(self, tau):
        return poisson_mean_cumulative(self.rate, tau)

    @classmethod
    def _stack(cls, processes):
        return {"rate": np.array([p.rate for p in processes])}

    @staticmethod
    def _draw(params, idx, rng):
        return rng.exponential(1.0 / params["rate"][idx])

    @staticmethod
    def _cost(params, idx, state, tau):
        return ((tau >= state) & (tau > 0)).astype(float)

    @staticmethod
    def _mean_cost(params, tau):
        return -np.expm1(-params["rate"] * tau)

    @staticmethod
    def _mean_cumulative(params, tau):
        return poisson_mean_cumulative(params["rate"], tau)


FAMILIES = {cls.family: cls for cls in (PolynomialProcess, PoissonIndicatorProcess)}


class CostBank:
    """Vectorized view over K processes, grouped by family.

    ``draw`` and ``cost`` take an array of arm indices (repeats allowed) and
    work on an opaque per-entry state array, so one call can cover every
    sync interval of every arm in a simulation window.
    """

    def __init__(self, processes):
        self.K = len(processes)
        self._groups = []
        self._local = np.empty(self.K, dtype=np.intp)
        self._group_of = np.empty(self.K, dtype=np.intp)
        by_cls = {}
        for k, proc in enumerate(processes):
            by_cls.setdefault(type(proc), []).append(k)
        for g, (cls, arms) in enumerate(by_cls.items()):
            arms = np.array(arms, dtype=np.intp)
            params = cls._stack([processes[k] for k in arms])
            self._groups.append((cls, arms, params))
            self._local[arms] = np.arange(len(arms))
            self._group_of[arms] = g

    def _split(self, arms):
        if len(self._groups) == 1:
            cls, _, params = self._groups[0]
            yield slice(None), cls, params, self._local[arms]
            return
        gid = self._group_of[arms]
        for g, (cls, _, params) in enumerate(self._groups):
            sel = np.flatnonzero(gid == g)
            if len(sel):
                yield sel, cls, params, self._local[arms[sel]]

    def draw(self, arms, rng):
        arms = np.asarray(arms, dtype=np.intp)
        state = np.empty(len(arms))
        for sel, cls, params, local in self._split(arms):
            state[sel] = cls._draw(params, local, rng)
        return state

    def cost(self, arms, state, tau):
        arms = np.asarray(arms, dtype=np.intp)
        tau = np.asarray(tau, dtype=float)
        out = np.empty(len(arms))
        for sel, cls, params, local in self._split(arms):
            out[sel] = cls._cost(params, local, state[sel], tau[sel])
        return out

    def _full(self, method, tau):
        tau = _as_nonneg_time(tau)
        tau = np.broadcast_to(tau, (self.K,))
        out = np.empty(self.K)
        for cls, arms, params in self._groups:
            out[arms] = getattr(cls, method)(params, tau[arms])
        return out

    def mean_cost(self, tau):
        """Per-arm mean cost at staleness ``tau`` (scalar or length-K)."""
        return self._full("_mean_cost", tau)

    def mean_cumulative_cost(self, tau):
        return self._full("_mean_cumulative", tau)
