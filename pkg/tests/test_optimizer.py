import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from syncbandit.optimizer import (StepSpec, barrier_init, div_f, euclidean_projection_step,
                                  euclidean_solve, mirror_descent_step, mirror_solve)
from syncbandit.policy import ConstraintSet
from syncbandit.validation import InfeasibleError


def mirror_objective(spec, x):
    return spec.eta * np.dot(x, spec.gradient) + div_f(x, spec.current)


def euclid_objective(spec, x):
    return 0.5 * np.sum((x - (spec.current - spec.eta * spec.gradient)) ** 2)


def random_spec(rng, K, scale=1.0):
    lo = rng.uniform(0.01, 0.5)
    hi = lo + rng.uniform(0.5, 5.0)
    budget = rng.uniform(K * lo, K * hi)
    c = ConstraintSet(lo, hi, budget, K)
    w = rng.dirichlet(np.ones(K))
    current = np.clip(lo + w * (budget - K * lo), lo, hi)
    g = rng.normal(0, scale, K)
    return StepSpec(rng.uniform(0.05, 3.0), g, current, c)


def segment_best(spec, objective, n=100_000):
    c = spec.constraints
    a = np.linspace(max(c.lo, c.budget - c.hi), min(c.hi, c.budget - c.lo), n)
    pts = np.stack([a, c.budget - a], axis=1)
    vals = _vector_objective(spec, objective, pts)
    i = int(np.argmin(vals))
    return pts[i], vals[i]


def _vector_objective(spec, objective, pts):
    if objective is mirror_objective:
        r = spec.current
        return (spec.eta * pts @ spec.gradient
                + np.sum(-np.log(pts / r) + pts / r - 1.0, axis=1))
    y = spec.current - spec.eta * spec.gradient
    return 0.5 * np.sum((pts - y) ** 2, axis=1)


# -- divergence and init ----------------------------------------------------

def test_div_f_values():
    assert div_f(np.array([2.0]), np.array([1.0])) == pytest.approx(0.30685, abs=1e-5)
    assert div_f(np.array([0.5]), np.array([1.0])) == pytest.approx(0.19315, abs=1e-5)
    r = np.array([0.3, 1.2, 4.0])
    assert div_f(r, r) == 0.0


@pytest.mark.parametrize("lo, hi, budget, K, value", [
    (0.025, 3 / 1.05, 40 / 1.05, 100, 40 / 105),
    (0.4, 5.0, 1.0, 2, 0.5),
    (0.6, 5.0, 1.5, 2, 0.75),
])
def test_barrier_init(lo, hi, budget, K, value):
    np.testing.assert_allclose(barrier_init(ConstraintSet(lo, hi, budget, K)), value, rtol=1e-12)


# -- worked examples -------------------------------------------------------

def test_mirror_step_two_arms():
    spec = StepSpec(1.0, np.array([-0.5, 0.0]), np.array([1.0, 1.0]),
                    ConstraintSet(0.1, 1.9, 2.0, 2))
    sol = mirror_solve(spec)
    np.testing.assert_allclose(sol.x, [1.2361, 0.7639], atol=1e-4)
    assert sol.lambda_star == pytest.approx(0.309, abs=1e-3)
    best, _ = segment_best(spec, mirror_objective)
    np.testing.assert_allclose(sol.x, best, atol=1e-4)


def test_euclidean_step_two_arms():
    spec = StepSpec(1.0, np.array([-0.5, 0.5]), np.array([1.0, 1.0]),
                    ConstraintSet(1e-9, 2.0, 2.0, 2))
    np.testing.assert_allclose(euclidean_projection_step(spec), [1.5, 0.5], atol=1e-9)


@pytest.mark.parametrize("step", [mirror_descent_step, euclidean_projection_step])
def test_zero_gradient_keeps_feasible_point(step):
    c = ConstraintSet(0.1, 2.0, 3.0, 3)
    r = np.array([0.5, 1.0, 1.5])
    np.testing.assert_allclose(step(StepSpec(0.7, np.zeros(3), r, c)), r, rtol=1e-9)


@pytest.mark.parametrize("step", [mirror_descent_step, euclidean_projection_step])
def test_single_coordinate_returns_budget(step):
    c = ConstraintSet(0.1, 2.0, 1.3, 1)
    np.testing.assert_allclose(step(StepSpec(1.0, np.array([-5.0]), np.array([0.2]), c)), [1.3])


def test_step_rejects_bad_input():
    c = ConstraintSet(0.1, 2.0, 2.0, 2)
    with pytest.raises(ValueError):
        StepSpec(-1.0, np.zeros(2), np.ones(2), c)
    with pytest.raises(ValueError):
        StepSpec(1.0, np.zeros(3), np.ones(2), c)
    with pytest.raises(ValueError):
        StepSpec(1.0, np.array([np.nan, 0.0]), np.ones(2), c)
    with pytest.raises(InfeasibleError):
        ConstraintSet(0.1, 2.0, 5.0, 2)


def test_large_negative_gradient_hits_upper_bound():
    # d_k <= 0 makes the coordinate objective decrease all the way to hi
    c = ConstraintSet(0.1, 1.5, 2.0, 2)
    spec = StepSpec(10.0, np.array([-5.0, 0.0]), np.array([1.0, 1.0]), c)
    x = mirror_descent_step(spec)
    np.testing.assert_allclose(x, [1.5, 0.5], atol=1e-9)
    best, _ = segment_best(spec, mirror_objective)
    np.testing.assert_allclose(x, best, atol=1e-4)


# -- properties -------------------------------------------------------------

@pytest.mark.parametrize("objective, step", [(mirror_objective, mirror_descent_step),
                                             (euclid_objective, euclidean_projection_step)])
def test_brute_force_two_arm(objective, step):
    rng = np.random.default_rng(99)
    for _ in range(100):
        spec = random_spec(rng, 2)
        x = step(spec)
        _, best = segment_best(spec, objective)
        assert objective(spec, x) <= best + 1e-6


def test_mirror_kkt_many_arms():
    rng = np.random.default_rng(5)
    for _ in range(200):
        spec = random_spec(rng, 100, scale=0.5)
        x = mirror_descent_step(spec)
        c = spec.constraints
        free = (x > c.lo + 1e-9) & (x < c.hi - 1e-9)
        resid = spec.eta * spec.gradient + 1 / spec.current - 1 / x
        if free.sum() > 1:
            assert np.max(np.abs(resid[free] - np.median(resid[free]))) < 1e-6


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 60), st.integers(0, 2**31 - 1), st.floats(0.01, 20.0))
def test_outputs_are_feasible(K, seed, scale):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, K, scale)
    c = spec.constraints
    for step in (mirror_descent_step, euclidean_projection_step):
        x = step(spec)
        assert np.all(x >= c.lo - 1e-8) and np.all(x <= c.hi + 1e-8)
        assert abs(x.sum() - c.budget) <= 1e-8 * max(1.0, c.budget)


@pytest.mark.parametrize("solver", [mirror_solve, euclidean_solve])
def test_dual_sum_is_monotone(solver):
    rng = np.random.default_rng(8)
    for _ in range(50):
        sol = solver(random_spec(rng, 20), record=True)
        trace = sorted(sol.trace)
        sums = np.array([s for _, s in trace])
        assert np.all(np.diff(sums) <= 1e-12 * max(1.0, sums.max()))
