"""Instance generators, regret curves, multi-trial experiments and grid search.

Seed derivation: a master seed feeds ``numpy.random.SeedSequence``; trial
``i`` uses the child sequence ``SeedSequence(master, spawn_key=(i,))``,
which is split once more into an instance stream and a run stream. Every
algorithm in an experiment therefore sees the same instance (and the same
run stream) for a given trial index.
"""

from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .formats import (parse_floats, read_keyvalue, write_aggregate_csv, write_keyvalue,
                      write_trials_csv)
from .policy import ProblemInstance, oracle_optimal_rates, policy_cost
from .processes import PoissonIndicatorProcess, PolynomialProcess
from .simulator import LearningRateWarning, run_async_mirrorsync, run_mirrorsync

ALGOS = ("mirrorsync", "async", "async-psgd")

POLYNOMIAL_DEFAULTS = {"K": 100, "r_min": 0.025, "r_max": 3.0, "B_per_arm": 0.4,
                       "noise": 0.1, "scaling": 5.0, "U": 40.0}
POISSON_DEFAULTS = {"K": 100, "r_min": 0.025, "r_max": 6.0, "B_per_arm": 0.4,
                    "rate_low": 0.005, "rate_high": 5.0}

# (eta, update period) chosen by grid search for each family; epsilon = 0.05
TUNED = {
    "polynomial": {"mirrorsync": (2.7, None), "async": (1.6, 20.0), "async-psgd": (0.08, 20.0)},
    "poisson": {"mirrorsync": (5.0, None), "async": (1.3, 8.0), "async-psgd": (0.5, 40.0)},
}
TUNED_EPSILON = 0.05
HORIZON_ROUNDS = 240
UPDATE_PERIOD_RANGE = (8.0, 40.0)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def generate_polynomial_instance(seed=None, K=100, r_min=0.025, r_max=3.0, B=None,
                                 noise=0.1, scaling=5.0, U=40.0, name=None):
    """Random instance of ``a_k * tau**p_k`` arms.

    ``mean_coef ~ Uniform[0, 1]`` and ``p = sigmoid(scaling * Uniform[0, 1])``
    per arm; ``B`` defaults to ``0.4 * K``.
    """
    rng = np.random.default_rng(seed)
    B = 0.4 * K if B is None else B
    abar = rng.uniform(0.0, 1.0, K)
    p = _sigmoid(scaling * rng.uniform(0.0, 1.0, K))
    procs = [PolynomialProcess(a, e, noise, cap=U) for a, e in zip(abar, p)]
    return ProblemInstance(procs, r_min, r_max, B, U=U,
                           name=name or f"polynomial-{_seed_label(seed)}")


def generate_poisson_instance(seed=None, K=100, r_min=0.025, r_max=6.0, B=None,
                              rate_low=0.005, rate_high=5.0, name=None):
    """Random instance of Poisson-indicator arms with ``rate ~ Uniform[rate_low, rate_high]``."""
    rng = np.random.default_rng(seed)
    B = 0.4 * K if B is None else B
    rates = rng.uniform(rate_low, rate_high, K)
    procs = [PoissonIndicatorProcess(lam) for lam in rates]
    return ProblemInstance(procs, r_min, r_max, B, U=1.0,
                           name=name or f"poisson-{_seed_label(seed)}")


GENERATORS = {"polynomial": generate_polynomial_instance, "poisson": generate_poisson_instance}


def _seed_label(seed):
    if isinstance(seed, np.random.SeedSequence):
        return "-".join(str(x) for x in (seed.entropy, *seed.spawn_key))
    return str(seed)


def corollary_hyperparams(B, r_min, K, U, T_max):
    """Learning rate, probe probability and regret bound for a horizon of ``T_max`` rounds.

    With ``L = log(B / (r_min K))``: ``epsilon = (L / T_max)**(1/3)``,
    ``eta = (K/U) * sqrt(L * epsilon / T_max)`` and the bound is
    ``3 U T_max**(2/3) L**(1/3)``. Requires ``T_max > 8 L`` and ``L > 0``.
    """
    ratio = B / (r_min * K)
    if not ratio > 1:
        raise ValueError(f"B/(r_min*K) = {ratio} must exceed 1 (no room to learn otherwise)")
    L = math.log(ratio)
    if not T_max > 8 * L:
        raise ValueError(f"T_max={T_max} must exceed 8*log(B/(r_min*K)) = {8 * L:.4g}")
    epsilon = (L / T_max) ** (1.0 / 3.0)
    eta = (K / U) * math.sqrt(L * epsilon / T_max)
    bound = 3.0 * U * T_max ** (2.0 / 3.0) * L ** (1.0 / 3.0)
    return eta, epsilon, bound


@dataclass
class RegretCurve:
    """``cumulative[u]`` is the regret accrued over the first ``u`` updates."""

    cumulative: np.ndarray
    J_star: float
    r_star: np.ndarray

    def per_round(self):
        n = np.arange(1, len(self.cumulative))
        return self.cumulative[1:] / n


def compute_regret_curve(trial, instance, constraints=None, r_star=None):
    """Cumulative ``sum_j (J(r^j) - J(r*))`` with ``r*`` the optimum over the full budget."""
    if r_star is None:
        r_star = oracle_optimal_rates(instance, constraints)
    J_star = policy_cost(instance, r_star)
    gaps = np.asarray(trial.J, dtype=float) - J_star
    cumulative = np.concatenate([[0.0], np.cumsum(gaps[:-1])])
    return RegretCurve(cumulative, J_star, np.asarray(r_star))


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    family: str = "polynomial"
    algos: tuple = ("async",)
    eta: float = None
    epsilon: float = TUNED_EPSILON
    upd_period: float = None
    trials: int = 1
    rounds: int = HORIZON_ROUNDS
    horizon_time: float = None
    seed: int = 0
    out: str = None
    workers: int = 1
    local_budget: str = "conserving"
    normalize: str = "active"
    engine: str = "vectorized"
    instance_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.algos, str):
            self.algos = tuple(a.strip() for a in self.algos.replace(",", " ").split())
        self.algos = tuple(self.algos)
        if self.family not in GENERATORS:
            raise ValueError(f"family must be one of {sorted(GENERATORS)}")
        for algo in self.algos:
            if algo not in ALGOS:
                raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGOS}")
        if int(self.trials) < 1:
            raise ValueError("trials must be >= 1")
        self.trials = int(self.trials)
        self.rounds = int(self.rounds)
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if not 0 <= float(self.epsilon) <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.eta is not None and not float(self.eta) > 0:
            raise ValueError("eta must be positive")

    def hyperparams(self, algo):
        """``(eta, update_period)`` for ``algo``, falling back to the tuned values."""
        t_eta, t_period = TUNED[self.family][algo]
        eta = t_eta if self.eta is None else float(self.eta)
        period = t_period if self.upd_period is None else float(self.upd_period)
        return eta, period

    def r_min(self):
        defaults = POLYNOMIAL_DEFAULTS if self.family == "polynomial" else POISSON_DEFAULTS
        return float(self.instance_params.get("r_min", defaults["r_min"]))

    def horizon(self):
        """Simulated time covered by every algorithm: ``rounds / r_min`` unless set."""
        if self.horizon_time is not None:
            return float(self.horizon_time)
        return self.rounds / self.r_min()

    @classmethod
    def from_file(cls, path, **overrides):
        kv = read_keyvalue(path)
        known = {f.name for f in fields(cls)}
        kwargs, inst = {}, {}
        for key, value in kv.items():
            if key in known and key != "instance_params":
                kwargs[key] = _coerce(value)
            else:
                inst[key] = _coerce(value)
        kwargs["instance_params"] = inst
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kwargs)

    def to_file(self, path):
        items = {k: v for k, v in asdict(self).items() if v is not None and k != "instance_params"}
        items["algos"] = " ".join(self.algos)
        items.update(self.instance_params)
        write_keyvalue(path, items, header="syncbandit experiment config")


def _coerce(text):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def trial_seeds(master, trial):
    """``(instance_seed, run_seed)`` SeedSequences for one trial."""
    child = np.random.SeedSequence(master, spawn_key=(trial,))
    inst_ss, run_ss = child.spawn(2)
    return inst_ss, run_ss


def make_instance(config, trial):
    inst_ss, _ = trial_seeds(config.seed, trial)
    gen = GENERATORS[config.family]
    return gen(seed=inst_ss, name=f"{config.family}-s{config.seed}-t{trial}",
               **_generator_kwargs(config))


def _generator_kwargs(config):
    p = dict(config.instance_params)
    if "B" not in p and "B_per_arm" in p:
        p["B"] = float(p.pop("B_per_arm")) * int(p.get("K", 100))
    p.pop("B_per_arm", None)
    return p


def run_algorithm(algo, instance, config, rng):
    eta, period = config.hyperparams(algo)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LearningRateWarning)
        if algo == "mirrorsync":
            horizon = config.horizon()
            n_rounds = max(1, int(math.floor(horizon * instance.r_min + 1e-9)))
            return run_mirrorsync(instance, eta, config.epsilon, n_rounds, rng=rng,
                                  engine=config.engine)
        return run_async_mirrorsync(
            instance, eta, config.epsilon, update_period=period, horizon=config.horizon(),
            rng=rng, step="mirror" if algo == "async" else "euclidean",
            local_budget=config.local_budget, normalize=config.normalize, engine=config.engine)


def run_trial(config, trial, instance=None, with_regret=True):
    """Run every configured algorithm on one trial's instance.

    Returns ``{algo: (TrialResult, RegretCurve or None)}``.
    """
    if instance is None:
        instance = make_instance(config, trial)
    _, run_ss = trial_seeds(config.seed, trial)
    r_star = oracle_optimal_rates(instance) if with_regret else None
    out = {}
    for algo in config.algos:
        rng = np.random.default_rng(run_ss)
        res = run_algorithm(algo, instance, config, rng)
        res.seed = (config.seed, trial)
        curve = compute_regret_curve(res, instance, r_star=r_star) if with_regret else None
        out[algo] = (res, curve)
    return out


def _run_trial_star(args):
    return run_trial(*args)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    trials: list  # one {algo: (TrialResult, RegretCurve)} per trial

    def trial_rows(self):
        for i, per_algo in enumerate(self.trials):
            for algo, (res, curve) in per_algo.items():
                regret = curve.cumulative if curve is not None else np.full(len(res), np.nan)
                for u, t, J, reg in zip(res.update_index, res.sim_time, res.J, regret):
                    yield {"trial": i, "algo": algo, "update_index": int(u),
                           "sim_time": float(t), "J": float(J), "regret_cum": float(reg)}

    def curves(self, algo):
        return [per_algo[algo][0] for per_algo in self.trials]

    def aggregate(self, align="time"):
        rows = []
        for algo in self.config.algos:
            rows.extend(aggregate_curves(algo, self.curves(algo), align=align))
        return rows

    def mean_curve(self, algo):
        """``(sim_time, mean J)`` across trials."""
        agg = aggregate_curves(algo, self.curves(algo))
        return (np.array([r["sim_time"] for r in agg]), np.array([r["J_mean"] for r in agg]))


def aggregate_curves(algo, results, align="time"):
    """Mean and standard error of ``J`` across trials at each aligned point.

    ``align="time"`` groups by simulated time, ``"index"`` by update index
    (``sim_time`` then reports the mean time of that update).
    """
    groups = {}
    for res in results:
        keys = res.sim_time if align == "time" else res.update_index
        for key, t, J in zip(keys.tolist(), res.sim_time.tolist(), res.J.tolist()):
            groups.setdefault(key, []).append((t, J))
    rows = []
    for key in sorted(groups):
        ts, Js = zip(*groups[key])
        Js = np.array(Js)
        n = len(Js)
        stderr = float(Js.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        t = key if align == "time" else float(np.mean(ts))
        rows.append({"algo": algo, "sim_time": float(t), "J_mean": float(Js.mean()),
                     "J_stderr": stderr, "n": n})
    return rows


def run_experiment(config, instance=None, with_regret=True, progress=None):
    """Run ``config.trials`` trials and, if ``config.out`` is set, write the CSVs.

    Each trial draws a fresh instance unless ``instance`` is given. With
    ``workers > 1`` trials run in a process pool; results are gathered in
    trial order so output does not depend on scheduling.
    """
    jobs = [(config, i, instance, with_regret) for i in range(config.trials)]
    if config.workers > 1 and config.trials > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            trials = list(pool.map(_run_trial_star, jobs))
    else:
        trials = []
        for job in jobs:
            trials.append(_run_trial_star(job))
            if progress:
                progress(len(trials), config.trials)
    result = ExperimentResult(config, trials)
    if config.out:
        write_experiment(result, config.out)
    return result


def aggregate_path(out):
    out = Path(out)
    return out.with_name(out.stem + "_aggregate" + (out.suffix or ".csv"))


def write_experiment(result, out):
    write_trials_csv(out, result.trial_rows())
    write_aggregate_csv(aggregate_path(out), result.aggregate())


# --------------------------------------------------------------------------
# grid search
# --------------------------------------------------------------------------

def trailing_std(J, fraction=0.1):
    J = np.asarray(J, dtype=float)
    n = max(2, int(math.ceil(fraction * len(J))))
    return float(np.std(J[-n:]))


def grid_search(config, etas, periods=(None,), algo=None, instance=None, penalty=1.0,
                trailing=0.1, allow_any_period=False):
    """One fixed-seed run per ``(eta, period)`` pair, ranked best first.

    Score is ``final_J + penalty * trailing_std`` where ``trailing_std`` is
    the standard deviation of ``J`` over the last ``trailing`` fraction of
    updates. Periods outside [8, 40] are skipped unless ``allow_any_period``;
    the period is ignored for MirrorSync.
    """
    algo = algo or config.algos[0]
    if instance is None:
        instance = make_instance(config, 0)
    _, run_ss = trial_seeds(config.seed, 0)
    if algo == "mirrorsync":
        periods = (None,)
    rows = []
    for eta, period in itertools.product(etas, periods):
        if period is not None and not allow_any_period:
            lo, hi = UPDATE_PERIOD_RANGE
            if not lo <= period <= hi:
                continue
        cfg = ExperimentConfig(**{**asdict(config), "algos": (algo,), "eta": eta,
                                  "upd_period": period, "trials": 1, "out": None})
        res = run_algorithm(algo, instance, cfg, np.random.default_rng(run_ss))
        final = float(res.J[-1])
        jitter = trailing_std(res.J, trailing)
        rows.append({"algo": algo, "eta": float(eta),
                     "upd_period": None if algo == "mirrorsync" else cfg.hyperparams(algo)[1],
                     "final_J": final, "trailing_std": jitter, "score": final + penalty * jitter})
    rows.sort(key=lambda r: r["score"])
    for rank, row in enumerate(rows, 1):
        row["rank"] = rank
    return rows


def parse_grid(text):
    return [float(x) for x in str(text).replace(",", " ").split()]


__all__ = [
    "ALGOS", "TUNED", "ExperimentConfig", "ExperimentResult", "RegretCurve",
    "aggregate_curves", "compute_regret_curve", "corollary_hyperparams",
    "generate_poisson_instance", "generate_polynomial_instance", "grid_search",
    "make_instance", "parse_floats", "run_experiment", "run_trial", "trial_seeds",
]
