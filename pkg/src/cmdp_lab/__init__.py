"""Tabular constrained-MDP laboratory: exact oracles, optimistic primal-dual
learners (UOpt-RPGPD, ablations, naive baseline) and an experiment harness."""

from .algorithms import (
    REGRET_SCHEDULE,
    EXPERIMENT_SCHEDULE,
    NAIVE,
    NO_ADJUSTMENT,
    NO_REGULARIZATION,
    NO_UPAC_BONUS,
    UOPT,
    AlgoVariant,
    PrimalDualLearner,
    Schedule,
    combined_q,
    eval_policy_optimistic,
    lagrange_step,
    policy_mirror_step,
    run_naive_primal_dual,
    run_uopt_rpgpd,
)
from .core import (
    DegenerateEntropyError,
    TabularCmdp,
    ValueTables,
    entropy_value_identity_check,
    eval_policy_exact,
    occupancy,
    uniform_policy,
    value_from_occupancy,
)
from .env import Trajectory, generate_random_cmdp, make_rng, rollout
from .estimator import EmpiricalModel, llnp, naive_bonus, update_counts, upac_bonus
from .harness import ExperimentConfig, emit_chart, run_experiment
from .metrics import RunMetrics, accumulate, compute_gaps
from .oracle import (
    brute_force_constrained_opt,
    regularized_saddle,
    slater_gap,
    solve_cmdp_lp,
    unconstrained_max,
)

__version__ = "0.1.0"
