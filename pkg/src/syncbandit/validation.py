"""Input validation helpers and error types shared across the package."""

import numpy as np


class InfeasibleError(ValueError):
    """The constraint set is empty (box and budget cannot both hold)."""


class ConvergenceError(RuntimeError):
    """A numerical solve hit its iteration cap without meeting tolerance."""


class NotFittedError(ValueError, AttributeError):
    pass


def check_rates(r, K=None, name="r"):
    """Return ``r`` as a 1-D float array of finite, strictly positive rates."""
    r = np.asarray(r, dtype=float)
    if r.ndim == 0:
        r = r.reshape(1)
    if r.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {r.shape}")
    if K is not None and len(r) != K:
        raise ValueError(f"{name} has {len(r)} entries, expected {K}")
    if not np.all(np.isfinite(r)):
        raise ValueError(f"{name} must be finite")
    if np.any(r <= 0):
        raise ValueError(f"{name} must be strictly positive")
    return r


def check_vector(g, K, name="gradient"):
    g = np.asarray(g, dtype=float).reshape(-1)
    if len(g) != K:
        raise ValueError(f"{name} has {len(g)} entries, expected {K}")
    if not np.all(np.isfinite(g)):
        raise ValueError(f"{name} must be finite")
    return g


def check_probability(epsilon, name="epsilon", allow_zero=True):
    epsilon = float(epsilon)
    lo_ok = epsilon >= 0 if allow_zero else epsilon > 0
    if not (lo_ok and epsilon <= 1):
        bound = "[0, 1]" if allow_zero else "(0, 1]"
        raise ValueError(f"{name} must lie in {bound}, got {epsilon}")
    return epsilon


def check_positive(value, name):
    value = float(value)
    if not (np.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a positive finite number, got {value}")
    return value


def check_fitted(estimator, attributes):
    if isinstance(attributes, str):
        attributes = [attributes]
    if not all(hasattr(estimator, a) for a in attributes):
        raise NotFittedError(
            f"This {type(estimator).__name__} instance is not fitted yet; call 'fit' first."
        )
