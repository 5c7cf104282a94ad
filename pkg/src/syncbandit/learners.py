"""Estimator-style wrappers around the learners.

Hyperparameters go to ``__init__`` and come back through ``get_params`` /
``set_params`` (via :class:`sklearn.base.BaseEstimator`); ``fit`` takes a
:class:`ProblemInstance` rather than a data matrix and stores fitted state
in trailing-underscore attributes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .policy import ProblemInstance, oracle_optimal_rates, policy_cost
from .simulator import run_async_mirrorsync, run_mirrorsync
from .validation import NotFittedError, check_fitted


def _check_instance(instance):
    if not isinstance(instance, ProblemInstance):
        raise TypeError(f"fit expects a ProblemInstance, got {type(instance).__name__}")
    return instance


class _SyncLearner(BaseEstimator):
    _fitted_attrs = ("rates_", "result_")

    def score(self, instance):
        """Negative policy cost of the fitted rates on ``instance`` (higher is better)."""
        check_fitted(self, self._fitted_attrs)
        return -policy_cost(instance, self.rates_)

    def _store(self, instance, result):
        self.result_ = result
        self.rates_ = result.rates
        self.cost_ = float(result.J[-1])
        self.cost_history_ = result.J
        self.n_features_in_ = instance.K
        return self


class MirrorSync(_SyncLearner):
    """Synchronous rounds of length ``1/r_min``, one mirror step per round."""

    def __init__(self, eta=2.7, epsilon=0.05, n_rounds=240, engine="vectorized",
                 random_state=None):
        self.eta = eta
        self.epsilon = epsilon
        self.n_rounds = n_rounds
        self.engine = engine
        self.random_state = random_state

    def fit(self, instance):
        instance = _check_instance(instance)
        res = run_mirrorsync(instance, self.eta, self.epsilon, self.n_rounds,
                             rng=self.random_state, engine=self.engine)
        return self._store(instance, res)


class AsyncMirrorSync(_SyncLearner):
    """Mirror steps on the arms that reported since the previous update."""

    _step = "mirror"

    def __init__(self, eta=1.6, epsilon=0.05, update_period=20.0, horizon=9600.0,
                 local_budget="conserving", normalize="active", include_unprobed=True,
                 engine="vectorized", random_state=None):
        self.eta = eta
        self.epsilon = epsilon
        self.update_period = update_period
        self.horizon = horizon
        self.local_budget = local_budget
        self.normalize = normalize
        self.include_unprobed = include_unprobed
        self.engine = engine
        self.random_state = random_state

    def fit(self, instance):
        instance = _check_instance(instance)
        res = run_async_mirrorsync(
            instance, self.eta, self.epsilon, update_period=self.update_period,
            horizon=self.horizon, rng=self.random_state, step=self._step,
            local_budget=self.local_budget, normalize=self.normalize,
            include_unprobed=self.include_unprobed, engine=self.engine)
        return self._store(instance, res)


class AsyncPSGD(AsyncMirrorSync):
    """:class:`AsyncMirrorSync` with Euclidean projected gradient steps."""

    _step = "euclidean"

    def __init__(self, eta=0.08, epsilon=0.05, update_period=20.0, horizon=9600.0,
                 local_budget="conserving", normalize="active", include_unprobed=True,
                 engine="vectorized", random_state=None):
        super().__init__(eta, epsilon, update_period, horizon, local_budget, normalize,
                         include_unprobed, engine, random_state)


class OracleScheduler(_SyncLearner):
    """Full-information optimum over the budget shrunk by ``1+epsilon``."""

    _fitted_attrs = ("rates_",)

    def __init__(self, epsilon=0.0, tol=1e-10):
        self.epsilon = epsilon
        self.tol = tol

    def fit(self, instance):
        instance = _check_instance(instance)
        self.rates_ = oracle_optimal_rates(instance, instance.constraints(self.epsilon), tol=self.tol)
        self.cost_ = policy_cost(instance, self.rates_)
        self.n_features_in_ = instance.K
        return self


__all__ = ["AsyncMirrorSync", "AsyncPSGD", "MirrorSync", "NotFittedError", "OracleScheduler"]
