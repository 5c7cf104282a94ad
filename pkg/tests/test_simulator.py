import numpy as np
import pytest

from conftest import linear_instance, random_instance
from syncbandit.events import PROBE, SYNC, ArmSchedule
from syncbandit.harness import generate_poisson_instance, generate_polynomial_instance
from syncbandit.optimizer import barrier_init
from syncbandit.policy import policy_cost
from syncbandit.processes import PoissonIndicatorProcess, PolynomialProcess
from syncbandit.simulator import (LearningRateWarning, _AsyncEventSim, periodic_update_times,
                                  play_schedule, run_async_mirrorsync, run_async_psgd,
                                  run_mirrorsync, schedule_arm_plays)

pytestmark = pytest.mark.filterwarnings("ignore::syncbandit.simulator.LearningRateWarning")


# -- schedules --------------------------------------------------------------

def test_schedule_examples(rng):
    seg, last = schedule_arm_plays(0.0, 0.5, 5.0, 0.0, rng)
    assert seg.sync_times == [2.0, 4.0] and last == 4.0
    seg, last = schedule_arm_plays(0.0, 0.5, 2.0, 0.0, rng)
    assert len(seg) == 0 and last == 0.0
    seg, _ = schedule_arm_plays(0.0, 0.5, 2.0, 0.0, rng, inclusive=True)
    assert seg.sync_times == [2.0]


def test_always_probe_places_one_probe_per_gap(rng):
    for _ in range(1000):
        r = rng.uniform(0.1, 5)
        seg, _ = schedule_arm_plays(0.0, r, 10.0, 1.0, rng)
        modes = [m for _, m in seg]
        assert modes == [PROBE, SYNC] * (len(modes) // 2)
        prev = 0.0
        for (tp, _), (ts, _) in zip(seg.entries[::2], seg.entries[1::2]):
            assert prev < tp < ts
            prev = ts


def test_schedule_legality(rng):
    for _ in range(1000):
        t0, r, eps = rng.uniform(0, 5), rng.uniform(0.025, 6), rng.uniform()
        seg, _ = schedule_arm_plays(t0, r, t0 + rng.uniform(0, 50), eps, rng)
        syncs = np.array([t0] + seg.sync_times)
        np.testing.assert_allclose(np.diff(syncs), 1 / r, atol=1e-9)
        _check_probes_inside(seg, t0)


def _check_probes_inside(seg, start):
    prev, pending = start, None
    for t, mode in seg:
        if mode == PROBE:
            assert pending is None and prev < t
            pending = t
        else:
            assert pending is None or pending < t
            prev, pending = t, None
    assert pending is None


def test_arm_schedule_rejects_disorder():
    s = ArmSchedule()
    s.append(1.0, SYNC)
    with pytest.raises(ValueError):
        s.append(1.0, PROBE)
    with pytest.raises(ValueError):
        s.append(2.0, "nap")


# -- playback ---------------------------------------------------------------

def test_play_schedule_basics(rng):
    assert play_schedule([PolynomialProcess(1, 1, 0)], {}, rng) == []
    o = play_schedule([PolynomialProcess(1, 1, 0)], {0: [(0.7, SYNC)]}, rng)
    assert o[0].cost == pytest.approx(0.7) and o[0].tau == pytest.approx(0.7)


def test_play_schedule_ordering_and_monotone_pairs(rng):
    procs = [PoissonIndicatorProcess(1.0), PoissonIndicatorProcess(2.0)]
    for _ in range(200):
        for p in procs:
            p.reset_at_sync(rng)
        scheds = {0: [(0.5, PROBE), (1.0, SYNC)], 1: [(0.5, PROBE), (1.0, SYNC), (1.5, SYNC)]}
        o = play_schedule(procs, scheds, rng)
        times = [x.time for x in o]
        assert times == sorted(times)
        # probes before syncs at equal times, then by arm
        assert [(x.time, x.mode, x.arm) for x in o[:4]] == [
            (0.5, PROBE, 0), (0.5, PROBE, 1), (1.0, SYNC, 0), (1.0, SYNC, 1)]
        for k in (0, 1):
            probe, sync = [x.cost for x in o if x.arm == k][:2]
            assert probe <= sync


def test_play_schedule_until_and_last_sync(rng):
    proc = PolynomialProcess(1, 1, 0)
    last = {}
    o = play_schedule([proc], {0: [(1.0, SYNC), (3.0, SYNC)]}, rng, last_sync=last, until=2.0)
    assert len(o) == 1 and last[0] == 1.0


# -- MirrorSync -------------------------------------------------------------

def test_mirrorsync_zero_epsilon_never_moves():
    inst = generate_polynomial_instance(seed=1, K=20)
    res = run_mirrorsync(inst, 1.0, 0.0, 10, rng=0, record_rates=True)
    np.testing.assert_array_equal(res.rates_history, res.rates_history[:1].repeat(11, axis=0))
    assert np.all(res.J == res.J[0])


def test_mirrorsync_warns_outside_guarantee():
    inst = generate_polynomial_instance(seed=1, K=10, B=4.0)
    with pytest.warns(LearningRateWarning):
        run_mirrorsync(inst, 2.7, 0.05, 2, rng=0)


def test_mirrorsync_identical_arms_stay_uniform_on_average():
    inst = linear_instance(K=5, slope=0.5, r_min=0.1, r_max=3.0, B=2.5, noise=0.1)
    finals = np.array([run_mirrorsync(inst, 0.05, 0.3, 20, rng=s).rates for s in range(50)])
    mean = finals.mean(axis=0)
    assert (mean.max() - mean.min()) / mean.mean() < 0.05


@pytest.mark.parametrize("engine", ["vectorized", "event"])
def test_mirrorsync_feasible_and_deterministic(engine):
    inst = generate_polynomial_instance(seed=2, K=15, B=6.0)
    eps = 0.1
    a = run_mirrorsync(inst, 0.5, eps, 15, rng=3, engine=engine, record_rates=True)
    b = run_mirrorsync(inst, 0.5, eps, 15, rng=3, engine=engine, record_rates=True)
    np.testing.assert_array_equal(a.J, b.J)
    np.testing.assert_array_equal(a.rates_history, b.rates_history)
    c = inst.constraints(eps)
    for r in a.rates_history:
        assert c.contains(r, tol=1e-8)
        assert np.sum(r * (1 + eps)) <= inst.B + 1e-8
    np.testing.assert_allclose(a.sim_time, np.arange(16) / inst.r_min)


def test_mirrorsync_engines_agree_in_distribution():
    inst = generate_polynomial_instance(seed=5, K=10, B=4.0)
    vec = [run_mirrorsync(inst, 0.3, 0.3, 10, rng=s).J[-1] for s in range(60)]
    evt = [run_mirrorsync(inst, 0.3, 0.3, 10, rng=1000 + s, engine="event").J[-1]
           for s in range(60)]
    se = np.sqrt(np.var(vec, ddof=1) / 60 + np.var(evt, ddof=1) / 60)
    assert abs(np.mean(vec) - np.mean(evt)) <= 4 * se + 1e-12


def test_mirrorsync_small_eta_improves():
    inst = generate_polynomial_instance(seed=0)
    res = run_mirrorsync(inst, 0.5, 0.05, 60, rng=0)
    assert res.J[-1] < res.J[0]


# -- AsyncMirrorSync and PSGD -----------------------------------------------

def test_async_empty_schedule_keeps_rates():
    inst = generate_polynomial_instance(seed=1, K=10, B=4.0)
    res = run_async_mirrorsync(inst, 1.0, 0.05, update_times=[], rng=0)
    assert len(res.J) == 1
    np.testing.assert_array_equal(res.rates, barrier_init(inst.constraints(0.05)))


def test_async_single_arm_never_moves():
    inst = linear_instance(K=1, B=1.0, r_min=0.1, r_max=3.0)
    res = run_async_mirrorsync(inst, 1.0, 0.5, update_period=5.0, horizon=100.0, rng=0)
    assert np.all(res.J == res.J[0])


@pytest.mark.parametrize("runner", [run_async_mirrorsync, run_async_psgd])
def test_async_zero_epsilon_never_moves(runner):
    inst = generate_polynomial_instance(seed=3, K=10, B=4.0)
    res = runner(inst, 1.0, 0.0, update_period=10.0, horizon=200.0, rng=0)
    assert np.all(res.J == res.J[0])


@pytest.mark.parametrize("engine", ["vectorized", "event"])
@pytest.mark.parametrize("runner", [run_async_mirrorsync, run_async_psgd])
def test_async_feasible_and_deterministic(engine, runner):
    inst = generate_poisson_instance(seed=4, K=12, B=4.8)
    eps = 0.2
    kw = dict(update_period=8.0, horizon=160.0, engine=engine, record_rates=True)
    a = runner(inst, 0.5, eps, rng=7, **kw)
    b = runner(inst, 0.5, eps, rng=7, **kw)
    np.testing.assert_array_equal(a.J, b.J)
    c = inst.constraints(eps)
    for r in a.rates_history:
        assert c.contains(r, tol=1e-8)
        assert np.sum(r * (1 + eps)) <= inst.B + 1e-8
    np.testing.assert_allclose(a.sim_time[1:], periodic_update_times(8.0, 160.0))


def test_async_literal_budget_shrinks_total_rate():
    inst = generate_polynomial_instance(seed=4, K=12, B=4.8)
    res = run_async_mirrorsync(inst, 0.5, 0.2, update_period=8.0, horizon=160.0, rng=0,
                               local_budget="literal")
    assert res.rates.sum() < inst.constraints(0.2).budget - 1e-6


def test_async_engines_agree_in_distribution():
    inst = generate_polynomial_instance(seed=6, K=10, B=4.0)
    kw = dict(update_period=10.0, horizon=200.0)
    vec = [run_async_mirrorsync(inst, 0.8, 0.3, rng=s, **kw).J[-1] for s in range(60)]
    evt = [run_async_mirrorsync(inst, 0.8, 0.3, rng=500 + s, engine="event", **kw).J[-1]
           for s in range(60)]
    se = np.sqrt(np.var(vec, ddof=1) / 60 + np.var(evt, ddof=1) / 60)
    assert abs(np.mean(vec) - np.mean(evt)) <= 4 * se


def test_event_engine_schedules_are_legal():
    rng = np.random.default_rng(0)
    inst = random_instance(rng, K=8, r_min=0.2, r_max=3.0, B=6.0)
    r = barrier_init(inst.constraints(0.3))
    sim = _AsyncEventSim(inst, r, rng, 0.3, True, "active")
    t = 0.0
    for t_next in np.arange(1, 30) * 3.0:
        sim.advance(r, t, t_next)
        r = np.clip(r * rng.uniform(0.8, 1.2, inst.K), inst.r_min, 3.0)
        t = t_next
    for k in range(inst.K):
        _check_probes_inside(sim.schedules[k], 0.0)


def test_async_beats_start_on_tuned_setting():
    inst = generate_polynomial_instance(seed=0)
    res = run_async_mirrorsync(inst, 1.6, 0.05, update_period=20.0, horizon=2400.0, rng=0)
    assert res.J[-1] < res.J[0]


def test_invalid_arguments():
    inst = generate_polynomial_instance(seed=0, K=5, B=2.0)
    with pytest.raises(ValueError):
        run_mirrorsync(inst, 0.0, 0.1, 5)
    with pytest.raises(ValueError):
        run_mirrorsync(inst, 1.0, 1.5, 5)
    with pytest.raises(ValueError):
        run_mirrorsync(inst, 1.0, 0.1, 5, engine="gpu")
    with pytest.raises(ValueError):
        run_async_mirrorsync(inst, 1.0, 0.1)
    with pytest.raises(ValueError):
        run_async_mirrorsync(inst, 1.0, 0.1, update_times=[2.0, 1.0])
    with pytest.raises(ValueError):
        run_async_mirrorsync(inst, 1.0, 0.1, update_times=[1.0], local_budget="loose")


def test_reported_cost_is_exact_policy_cost():
    inst = generate_poisson_instance(seed=9, K=10, B=4.0)
    res = run_async_psgd(inst, 0.5, 0.1, update_period=10.0, horizon=100.0, rng=1,
                         record_rates=True)
    np.testing.assert_allclose(res.J, [policy_cost(inst, r) for r in res.rates_history])
