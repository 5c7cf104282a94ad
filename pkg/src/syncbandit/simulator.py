"""Continuous-time simulation of arm-play schedules and the three learners.

Two execution engines share one set of semantics:

``"event"``
    Builds explicit :class:`ArmSchedule` objects with
    :func:`schedule_arm_plays`, plays them event by event against
    per-arm :class:`CostProcess` objects and turns the observations into
    estimates with the :mod:`syncbandit.estimation` routines. Slow but a
    literal reading of the algorithms; used as the reference.

``"vectorized"``
    Generates every sync interval of every arm in an update window as numpy
    arrays and draws costs through :class:`CostBank`. Each sync interval is
    an independent draw of the process (a sync resets it), so the estimates
    have the same distribution as the event engine's. Default.

Both engines report the exact policy cost ``J(r)`` after every update.
"""

from __future__ import annotations

import copy
import heapq
import warnings
from dataclasses import dataclass, field

import numpy as np

from .estimation import collect_async_estimates, extract_round_estimates
from .events import PROBE, SYNC, ArmSchedule, CostObservation
from .optimizer import StepSpec, barrier_init, euclidean_projection_step, mirror_descent_step
from .policy import ConstraintSet, ProblemInstance, policy_cost
from .validation import check_positive, check_probability

ENGINES = ("vectorized", "event")
LOCAL_BUDGETS = ("conserving", "literal")


class LearningRateWarning(UserWarning):
    """``eta`` is outside the range where the regret guarantee applies."""


@dataclass
class TrialResult:
    """Per-update policy cost trace of one learner run.

    Row ``i`` holds the cost of the rates in force after ``i`` updates;
    row 0 is the initial (barrier-minimizing) policy at time 0.
    """

    algo: str
    update_index: np.ndarray
    sim_time: np.ndarray
    J: np.ndarray
    rates: np.ndarray
    seed: object = None
    instance_id: str = ""
    rates_history: np.ndarray = None
    info: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.J)

    def rows(self):
        return zip(self.update_index.tolist(), self.sim_time.tolist(), self.J.tolist())


def _rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


# --------------------------------------------------------------------------
# schedules and playback
# --------------------------------------------------------------------------

def _probe_offset(rng, gap):
    # uniform strictly inside (0, gap); endpoints have measure zero and are redrawn
    while True:
        off = rng.random() * gap
        if 0.0 < off < gap:
            return off


def schedule_arm_plays(t_prev, r_k, interval_end, epsilon, rng, inclusive=False):
    """Periodic sync plays after ``t_prev`` up to ``interval_end``.

    Syncs land at ``t_prev + m/r_k`` for ``m = 1, 2, ...`` while that time is
    ``< interval_end`` (``<=`` with ``inclusive``). Before each sync, with
    probability ``epsilon``, a probe is placed uniformly inside the gap.
    Returns the schedule segment and the time of its last sync (``t_prev``
    when the segment is empty).
    """
    r_k = check_positive(r_k, "r_k")
    gap = 1.0 / r_k
    segment = ArmSchedule()
    last = t_prev
    m = 1
    while True:
        t_sync = t_prev + m * gap
        if not (t_sync < interval_end or (inclusive and t_sync <= interval_end)):
            break
        if rng.random() < epsilon:
            segment.append(last + _probe_offset(rng, t_sync - last), PROBE)
        segment.append(t_sync, SYNC)
        last = t_sync
        m += 1
    return segment, last


def play_schedule(processes, schedules, rng, last_sync=None, until=None):
    """Execute schedules in time order and return the observations.

    ``schedules`` maps arm index to :class:`ArmSchedule` (or a plain list of
    ``(time, mode)``). A probe reads the current path; a sync reads it and
    then resets the process. Simultaneous events are ordered probe first,
    then by arm index. ``last_sync`` (arm -> time of the last sync, default
    0) is updated in place. Entries at or after ``until`` are left unplayed.
    """
    if isinstance(processes, ProblemInstance):
        processes = processes.processes
    if last_sync is None:
        last_sync = {}
    events = []
    for k, sched in schedules.items():
        for t, mode in sched:
            if until is not None and t >= until:
                continue
            events.append((t, 0 if mode == PROBE else 1, k, mode))
    heapq.heapify(events)
    out = []
    while events:
        t, _, k, mode = heapq.heappop(events)
        tau = t - last_sync.get(k, 0.0)
        proc = processes[k]
        cost = proc.sample_cost_at(tau)
        out.append(CostObservation(k, t, tau, mode, cost))
        if mode == SYNC:
            proc.reset_at_sync(rng)
            last_sync[k] = t
    return out


# --------------------------------------------------------------------------
# shared helpers
# --------------------------------------------------------------------------

def _step(step, eta, gradient, current, constraints):
    spec = StepSpec(eta, gradient, current, constraints)
    if step == "mirror":
        return mirror_descent_step(spec)
    return euclidean_projection_step(spec)


def _check_common(instance, eta, epsilon, engine):
    check_positive(eta, "eta")
    check_probability(epsilon)
    if engine not in ENGINES:
        raise ValueError(f"engine must be one of {ENGINES}, got {engine!r}")
    return instance.constraints(epsilon)


def periodic_update_times(period, horizon):
    """``period, 2*period, ...`` up to and including ``horizon``."""
    period = check_positive(period, "period")
    n = int(np.floor(horizon / period + 1e-9))
    return period * np.arange(1, n + 1, dtype=float)


def _result(algo, times, costs, rates, seed, instance, history, info):
    return TrialResult(
        algo=algo,
        update_index=np.arange(len(costs)),
        sim_time=np.asarray(times, dtype=float),
        J=np.asarray(costs, dtype=float),
        rates=np.asarray(rates, dtype=float).copy(),
        seed=seed,
        instance_id=instance.name,
        rates_history=None if history is None else np.asarray(history),
        info=info,
    )


# --------------------------------------------------------------------------
# MirrorSync
# --------------------------------------------------------------------------

def run_mirrorsync(instance, eta, epsilon, n_rounds, rng=None, engine="vectorized",
                   inclusive_round_end=True, record_rates=False):
    """Synchronous rounds of length ``1/r_min`` with one mirror step per round.

    Every round starts with all arms freshly synced at time 0. Each arm's
    estimate comes from the first sync interval of the round (zero when that
    interval had no probe), divided by K.

    With ``inclusive_round_end`` a sync falling exactly on the round end is
    kept, so an arm at ``r_min`` still yields one estimate per round.
    """
    constraints = _check_common(instance, eta, epsilon, engine)
    K, U = instance.K, instance.U
    if eta >= K * epsilon / (2 * U):
        warnings.warn(
            f"eta={eta} >= K*epsilon/(2U)={K * epsilon / (2 * U):.4g}; "
            "the regret guarantee does not cover this learning rate",
            LearningRateWarning, stacklevel=2)
    seed = rng if not isinstance(rng, np.random.Generator) else None
    rng = _rng(rng)
    T_round = 1.0 / instance.r_min
    r = barrier_init(constraints)
    costs, times = [policy_cost(instance, r)], [0.0]
    history = [r.copy()] if record_rates else None

    if engine == "event":
        procs = copy.deepcopy(instance.processes)
        estimate = lambda r: _mirrorsync_round_event(procs, r, epsilon, T_round, K, rng,
                                                     inclusive_round_end)
    else:
        bank = instance.bank
        estimate = lambda r: _mirrorsync_round_vec(bank, r, epsilon, T_round, K, rng,
                                                   inclusive_round_end)

    for T in range(1, int(n_rounds) + 1):
        g = estimate(r)
        r = mirror_descent_step(StepSpec(eta, g, r, constraints))
        costs.append(policy_cost(instance, r))
        times.append(T * T_round)
        if record_rates:
            history.append(r.copy())
    return _result("mirrorsync", times, costs, r, seed, instance, history,
                   {"eta": eta, "epsilon": epsilon, "engine": engine})


def _mirrorsync_round_event(procs, r, epsilon, T_round, K, rng, inclusive):
    for p in procs:
        p.reset_at_sync(rng)
    schedules = {}
    for k in range(K):
        schedules[k], _ = schedule_arm_plays(0.0, r[k], T_round, epsilon, rng, inclusive=inclusive)
    obs = play_schedule(procs, schedules, rng)
    per_arm = {k: [] for k in range(K)}
    for ob in obs:
        per_arm[ob.arm].append(ob)
    return np.array([extract_round_estimates(schedules[k], per_arm[k], r[k], epsilon, K)
                     for k in range(K)])


def _mirrorsync_round_vec(bank, r, epsilon, T_round, K, rng, inclusive):
    gap = 1.0 / r
    has = gap <= T_round if inclusive else gap < T_round
    probe = has & (rng.random(K) < epsilon)
    g = np.zeros(K)
    arms = np.flatnonzero(probe)
    if len(arms):
        u = _open_unit(rng, len(arms))
        state = bank.draw(arms, rng)
        c_probe = bank.cost(arms, state, u * gap[arms])
        c_sync = bank.cost(arms, state, gap[arms])
        g[arms] = (c_probe - c_sync) / (epsilon * r[arms] * K)
    return g


def _open_unit(rng, n):
    u = rng.random(n)
    bad = u <= 0.0
    while np.any(bad):
        u[bad] = rng.random(int(bad.sum()))
        bad = u <= 0.0
    return u


# --------------------------------------------------------------------------
# AsyncMirrorSync and its projected-SGD variant
# --------------------------------------------------------------------------

def run_async_mirrorsync(instance, eta, epsilon, update_times=None, horizon=None,
                         update_period=None, rng=None, step="mirror",
                         local_budget="conserving", normalize="active",
                         include_unprobed=True, engine="vectorized", record_rates=False):
    """Asynchronous updates on a user schedule, without free resets.

    At every update time the arms that closed at least one sync interval
    since the previous update form the active set; their interval estimates
    are averaged, scaled (``normalize``: by the active-set size or by K) and
    a mirror step (or Euclidean projection, ``step="euclidean"``) is taken
    over the active coordinates only, keeping their summed rate
    (``local_budget="conserving"``) or dividing it by ``1+epsilon``
    (``"literal"``).

    After the update each arm is re-stitched: with probability ``epsilon``
    it syncs immediately, otherwise at ``max(last_sync + 1/r_k, now)``, and
    periodic plays are scheduled from there to the next update time. An arm
    whose last scheduled sync still lies in the future keeps it.
    """
    constraints = _check_common(instance, eta, epsilon, engine)
    if step not in ("mirror", "euclidean"):
        raise ValueError(f"unknown step {step!r}")
    if local_budget not in LOCAL_BUDGETS:
        raise ValueError(f"local_budget must be one of {LOCAL_BUDGETS}")
    if update_times is None:
        if update_period is None or horizon is None:
            raise ValueError("give update_times, or update_period together with horizon")
        update_times = periodic_update_times(update_period, horizon)
    update_times = np.asarray(update_times, dtype=float)
    if len(update_times):
        if update_times[0] <= 0 or np.any(np.diff(update_times) <= 0):
            raise ValueError("update times must be positive and strictly increasing")
        if horizon is not None:
            update_times = update_times[update_times <= horizon]

    seed = rng if not isinstance(rng, np.random.Generator) else None
    rng = _rng(rng)
    r = barrier_init(constraints)
    costs, times = [policy_cost(instance, r)], [0.0]
    history = [r.copy()] if record_rates else None
    algo = "async" if step == "mirror" else "async-psgd"
    opts = dict(epsilon=epsilon, include_unprobed=include_unprobed, normalize=normalize)

    sim = (_AsyncEventSim if engine == "event" else _AsyncVecSim)(instance, r, rng, **opts)
    t_prev_update = 0.0
    for t_upd in update_times:
        sim.advance(r, t_prev_update, t_upd)
        arms, gbar = sim.collect(r)
        if len(arms):
            local = r[arms]
            budget = local.sum()
            if local_budget == "literal":
                budget /= 1.0 + epsilon
            lc = ConstraintSet(constraints.lo, constraints.hi, budget, len(arms))
            r = r.copy()
            r[arms] = _step(step, eta, gbar, local, lc)
        t_prev_update = t_upd
        costs.append(policy_cost(instance, r))
        times.append(t_upd)
        if record_rates:
            history.append(r.copy())
    return _result(algo, times, costs, r, seed, instance, history,
                   {"eta": eta, "epsilon": epsilon, "engine": engine,
                    "local_budget": local_budget, "normalize": normalize})


def run_async_psgd(instance, eta, epsilon, **kwargs):
    """:func:`run_async_mirrorsync` with Euclidean projected gradient steps."""
    return run_async_mirrorsync(instance, eta, epsilon, step="euclidean", **kwargs)


class _AsyncVecSim:
    """Window-by-window interval generation for all arms at once.

    ``last`` is the time of each arm's latest scheduled sync (its process was
    reset there) and ``pending`` the time of a stitched sync that has not
    been played yet (``inf`` if none). Probes only occur in intervals that
    start and end inside a single window, so no probe is ever split from its
    closing sync.
    """

    def __init__(self, instance, r, rng, epsilon, include_unprobed, normalize):
        self.bank = instance.bank
        self.K = instance.K
        self.rng = rng
        self.eps = epsilon
        self.include_unprobed = include_unprobed
        self.normalize = normalize
        self.last = np.zeros(self.K)
        self.pending = np.full(self.K, np.inf)
        self.first = True

    def advance(self, r, t_now, t_next):
        K, rng, eps = self.K, self.rng, self.eps
        gap = 1.0 / r
        if self.first:
            s0 = np.zeros(K)
            self.first = False
        else:
            future = self.last >= t_now
            imm = ~future & (rng.random(K) < eps)
            s0 = np.where(future, self.last, np.where(imm, t_now, np.maximum(self.last + gap, t_now)))
            self.pending = np.where(future, self.pending, s0)

        # periodic syncs s0 + m*gap < t_next, m >= 1
        M = np.floor((t_next - s0) * r).astype(np.int64)
        M = np.maximum(M, 0)
        M = np.where(s0 + M * gap >= t_next, M - 1, M)
        M = np.where(s0 + (M + 1) * gap < t_next, M + 1, M)
        M = np.maximum(M, 0)

        played_pending = (self.pending >= t_now) & (self.pending < t_next)
        total = np.zeros(K)
        n = int(M.sum())
        arm = np.repeat(np.arange(K), M)
        parm = arm[rng.random(n) < eps] if n else arm
        if len(parm):
            pg = gap[parm]
            u = _open_unit(rng, len(parm))
            state = self.bank.draw(parm, rng)
            c_probe = self.bank.cost(parm, state, u * pg)
            c_sync = self.bank.cost(parm, state, pg)
            vals = (c_probe - c_sync) / (eps * r[parm])
            total = np.bincount(parm, weights=vals, minlength=K)
        if self.include_unprobed:
            count = M + played_pending
        else:
            count = np.bincount(parm, minlength=K)

        self.pending = np.where(played_pending, np.inf, self.pending)
        self.last = s0 + M * gap
        self.count, self.total = count, total

    def collect(self, r):
        arms = np.flatnonzero(self.count > 0)
        if not len(arms):
            return arms, np.zeros(0)
        gbar = self.total[arms] / self.count[arms]
        scale = len(arms) if self.normalize == "active" else self.K
        return arms, gbar / scale


class _AsyncEventSim:
    """Reference engine: explicit schedules, event playback, estimator calls."""

    def __init__(self, instance, r, rng, epsilon, include_unprobed, normalize):
        self.procs = copy.deepcopy(instance.processes)
        self.K = instance.K
        self.rng = rng
        self.eps = epsilon
        self.include_unprobed = include_unprobed
        self.normalize = normalize
        for p in self.procs:
            p.reset_at_sync(rng)
        self.last_sync = {k: 0.0 for k in range(self.K)}
        self.last = np.zeros(self.K)
        self.queue = {k: [] for k in range(self.K)}
        self.schedules = {k: ArmSchedule() for k in range(self.K)}
        self.first = True

    def advance(self, r, t_now, t_next):
        rng, eps = self.rng, self.eps
        for k in range(self.K):
            if self.first:
                start = 0.0
            elif self.last[k] >= t_now:
                start = self.last[k]
            else:
                if rng.random() < eps:
                    start = t_now
                else:
                    start = max(self.last[k] + 1.0 / r[k], t_now)
                self.queue[k].append((start, SYNC))
            seg, self.last[k] = schedule_arm_plays(start, r[k], t_next, eps, rng)
            self.queue[k].extend(seg)
        self.first = False
        due = {}
        for k in range(self.K):
            q = self.queue[k]
            i = 0
            while i < len(q) and q[i][0] < t_next:
                i += 1
            due[k], self.queue[k] = q[:i], q[i:]
            for t, mode in due[k]:
                self.schedules[k].append(t, mode)
        obs = play_schedule(self.procs, due, rng, self.last_sync)
        self.window = {k: [] for k in range(self.K)}
        for ob in obs:
            self.window[ob.arm].append(ob)

    def collect(self, r):
        nonempty = {k: v for k, v in self.window.items() if v}
        return collect_async_estimates(nonempty, r, self.eps, K=self.K,
                                       include_unprobed=self.include_unprobed,
                                       normalize=self.normalize)
