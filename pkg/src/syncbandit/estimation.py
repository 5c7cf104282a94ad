"""Unbiased partial-derivative estimates of the policy cost from sparse cost samples.

Within one sync interval of length ``1/r_k``, a probe at a uniformly random
staleness and the closing sync observation give

    (probe_cost - sync_cost) / (epsilon * r_k)

with probability ``epsilon`` and 0 otherwise; its expectation is the arm's
slope ``Cbar(1/r) - c(1/r)/r``, i.e. ``K`` times ``dJ/dr_k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .events import PROBE, SYNC


@dataclass(frozen=True)
class GradientSample:
    arm: int
    value: float
    interval_index: int


def grad_j_sample(probe_cost, sync_cost, r_k, epsilon):
    """One interval's raw estimate; 0 when the interval had no probe."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive to form an estimate")
    if not r_k > 0:
        raise ValueError("rate must be positive")
    if probe_cost is None:
        return 0.0
    return (probe_cost - sync_cost) / (epsilon * r_k)


def interval_samples(observations, r_k, epsilon, arm=None, include_unprobed=True):
    """Split one arm's time-ordered observations into per-interval estimates.

    Each sync closes an interval. If a probe preceded it inside the same run
    of observations, the pair forms an estimate; a sync without a probe is the
    zero branch (kept only when ``include_unprobed``). Extra probes in one
    interval are ignored, and a trailing probe with no closing sync is dropped.
    """
    samples = []
    probe = None
    interval = 0
    for ob in observations:
        if ob.mode == PROBE:
            if probe is None:
                probe = ob.cost
            continue
        if ob.mode != SYNC:
            raise ValueError(f"unknown play mode {ob.mode!r}")
        if probe is not None or include_unprobed:
            value = 0.0 if probe is None else grad_j_sample(probe, ob.cost, r_k, epsilon)
            samples.append(GradientSample(ob.arm if arm is None else arm, value, interval))
        probe = None
        interval += 1
    return samples


def extract_round_estimates(schedule, observations, r_k, epsilon, K):
    """Estimate from the first sync interval of a round, divided by ``K``.

    ``observations`` are this arm's costs in schedule order (one per entry).
    A round without any entries yields 0.
    """
    entries = list(schedule)
    obs = list(observations)
    if len(obs) != len(entries):
        raise ValueError(f"{len(entries)} schedule entries but {len(obs)} observations")
    if not entries:
        return 0.0
    _, mode = entries[0]
    if mode == SYNC:
        return 0.0
    # first entry is a probe: pair it with the next sync of this round
    for (t, m), ob in zip(entries[1:], obs[1:]):
        if m == SYNC:
            if epsilon <= 0:
                return 0.0
            return grad_j_sample(obs[0].cost, ob.cost, r_k, epsilon) / K
    raise ValueError("probe without a following sync in the same round")


def collect_async_estimates(observations_by_arm, r, epsilon, K=None,
                            include_unprobed=True, normalize="active"):
    """Average each arm's interval estimates since the previous update.

    Returns ``(arms, values)``: the sorted arms that produced at least one
    estimate, and their averaged estimates scaled by ``1/len(arms)``
    (``normalize="active"``) or by ``1/K`` (``normalize="K"``).

    With ``include_unprobed`` every closed interval counts, unprobed ones as
    zeros; otherwise only probe-paired intervals count.
    """
    r = np.asarray(r, dtype=float)
    arms, means = [], []
    for k in sorted(observations_by_arm):
        obs = observations_by_arm[k]
        samples = interval_samples(obs, r[k], epsilon, arm=k,
                                   include_unprobed=include_unprobed) if epsilon > 0 else \
            _unprobed_only(obs, k, include_unprobed)
        if samples:
            arms.append(k)
            means.append(np.mean([s.value for s in samples]))
    arms = np.array(arms, dtype=np.intp)
    values = np.array(means, dtype=float)
    if len(arms):
        if normalize == "active":
            values = values / len(arms)
        elif normalize == "K":
            if K is None:
                raise ValueError("normalize='K' needs K")
            values = values / K
        else:
            raise ValueError(f"unknown normalization {normalize!r}")
    return arms, values


def _unprobed_only(observations, arm, include_unprobed):
    # epsilon == 0 never schedules probes; every interval is the zero branch
    if not include_unprobed:
        return []
    return [GradientSample(arm, 0.0, i)
            for i, ob in enumerate(o for o in observations if o.mode == SYNC)]
