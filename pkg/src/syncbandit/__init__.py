"""Learning periodic sync schedules for synchronization bandits."""

from .events import PROBE, SYNC, ArmSchedule, CostObservation
from .optimizer import (StepSpec, barrier_init, div_f, euclidean_projection_step,
                        mirror_descent_step)
from .policy import (ConstraintSet, ProblemInstance, analytic_gradient, oracle_optimal_rates,
                     policy_cost)
from .processes import PoissonIndicatorProcess, PolynomialProcess
from .simulator import (TrialResult, play_schedule, run_async_mirrorsync, run_async_psgd,
                        run_mirrorsync, schedule_arm_plays)
from .validation import ConvergenceError, InfeasibleError

__version__ = "0.1.0"
