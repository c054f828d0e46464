"""Optimistic primal-dual learners for online tabular CMDPs.

One learner class covers UOpt-RPGPD, its three ablations and the naive
primal-dual baseline; they differ only in the bonus and in how the
learning rate and entropy coefficient are scheduled.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .core import TabularCmdp, ValueTables, backward_values
from .env import make_rng, restore_rng, rng_state, rollout
from .estimator import EmpiricalModel, naive_bonus, upac_bonus

UOPT = "UOptRPGPD"
NO_REGULARIZATION = "NoRegularization"
NO_UPAC_BONUS = "NoUPACBonus"
NO_ADJUSTMENT = "NoAdjustment"
NAIVE = "NaivePrimalDual"
TAGS = (UOPT, NO_REGULARIZATION, NO_UPAC_BONUS, NO_ADJUSTMENT, NAIVE)


@dataclass(frozen=True)
class Schedule:
    """Polynomially decaying step size ``(k+3)^-alpha_eta`` and entropy
    coefficient ``(k+3)^-alpha_tau``."""

    alpha_eta: float = 0.53
    alpha_tau: float = 0.4
    delta: float = 0.1

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")

    def eta(self, k: int) -> float:
        return (k + 3.0) ** -self.alpha_eta

    def tau(self, k: int) -> float:
        return (k + 3.0) ** -self.alpha_tau

    def satisfies_theory(self) -> bool:
        return 0 < self.alpha_tau < 0.5 < self.alpha_eta < 1 and self.alpha_eta + self.alpha_tau < 1


EXPERIMENT_SCHEDULE = Schedule(0.53, 0.4)
# exponents that balance the terms of the worst-case regret bound
REGRET_SCHEDULE = Schedule(11 / 14, 1 / 7)


@dataclass(frozen=True)
class AlgoVariant:
    tag: str = UOPT
    fixed_eta: float = 0.1
    fixed_tau: float = 0.1
    K: int = 10**5
    dual_lr: float | None = None

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown algorithm {self.tag!r}; expected one of {TAGS}")
        if self.K < 1:
            raise ValueError("K must be at least 1")

    @classmethod
    def naive(cls, K: int, H: int, A: int, policy_lr: float | None = None,
              dual_lr: float | None = None) -> "AlgoVariant":
        """Fixed rates sized to the budget K unless given explicitly."""
        if policy_lr is None:
            policy_lr = math.sqrt(2.0 * math.log(A) / (H * H * K)) if A > 1 else 1.0
        if dual_lr is None:
            dual_lr = 1.0 / (H * math.sqrt(K))
        return cls(NAIVE, fixed_eta=policy_lr, fixed_tau=0.0, K=K, dual_lr=dual_lr)

    def rates(self, k: int, schedule: Schedule):
        """``(eta, tau, dual_eta)`` for episode ``k`` (1-based)."""
        if self.tag in (UOPT, NO_UPAC_BONUS):
            eta, tau = schedule.eta(k), schedule.tau(k)
            return eta, tau, eta
        if self.tag == NO_REGULARIZATION:
            eta = schedule.eta(k)
            return eta, 0.0, eta
        if self.tag == NO_ADJUSTMENT:
            return self.fixed_eta, self.fixed_tau, self.fixed_eta
        dual = self.fixed_eta if self.dual_lr is None else self.dual_lr
        return self.fixed_eta, 0.0, dual

    def uses_naive_bonus(self) -> bool:
        return self.tag in (NO_UPAC_BONUS, NAIVE)


# -- update rules -------------------------------------------------------------------


def eval_policy_optimistic(r, beta, model, policy, tau: float, log_policy=None) -> ValueTables:
    """Clipped optimistic backward pass under the empirical kernel.

    ``q_h = r_h + (1 + tau ln A) H beta_h + P_hat_h V_{h+1}``, clipped at
    ``(1 + tau ln A)(H - h)`` for 0-based ``h``, then ``V_h = pi_h (Q_h - tau ln pi_h)``.
    ``model`` is an :class:`EmpiricalModel` or a kernel array.
    """
    p_hat = getattr(model, "p_hat", model)
    policy = np.asarray(policy)
    H, X, A = policy.shape
    if np.shape(r) != (H, X, A) or np.shape(beta) != (H, X, A) or np.shape(p_hat) != (H, X, A, X):
        raise ValueError("reward, bonus, kernel and policy shapes disagree")
    if tau > 0 and log_policy is None:
        if np.any(policy <= 0):
            raise ValueError("entropy needs a strictly positive policy")
        log_policy = np.log(policy)
    coef = 1.0 + tau * math.log(A)
    V = np.zeros((H + 1, X))
    Q = np.empty((H, X, A))
    for h in range(H - 1, -1, -1):
        q = r[h] + coef * H * beta[h] + p_hat[h] @ V[h + 1]
        np.minimum(q, coef * (H - h), out=Q[h])
        if tau > 0:
            V[h] = np.einsum("xa,xa->x", policy[h], Q[h] - tau * log_policy[h])
        else:
            V[h] = np.einsum("xa,xa->x", policy[h], Q[h])
    return ValueTables(V, Q, float(tau))


def _q(t):
    return t.Q if isinstance(t, ValueTables) else np.asarray(t)


def combined_q(q0, qn: Sequence, lam) -> np.ndarray:
    """Lagrangian action values ``Q0 + sum_n lam_n Q^n``."""
    out = np.array(_q(q0), dtype=float)
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if len(qn) != lam.size:
        raise ValueError(f"{len(qn)} constraint tables for {lam.size} multipliers")
    for weight, table in zip(lam, qn):
        out += weight * _q(table)
    return out


def mirror_step_log(log_policy: np.ndarray, q: np.ndarray, eta: float, tau: float) -> np.ndarray:
    """Entropy-regularized NPG step in log space; returns new log-probabilities."""
    if eta * tau >= 1:
        raise ValueError(f"eta * tau must be < 1, got {eta * tau}")
    if not np.all(np.isfinite(q)):
        raise ValueError("action values must be finite")
    logits = (1.0 - eta * tau) * log_policy + eta * q
    logits -= logits.max(axis=-1, keepdims=True)
    # after the shift every row has a zero entry, so the sum is in [1, A]
    return logits - np.log(np.exp(logits).sum(axis=-1, keepdims=True))


def policy_mirror_step(policy, q, eta: float, tau: float) -> np.ndarray:
    policy = np.asarray(policy, dtype=float)
    if np.any(policy <= 0):
        raise ValueError("mirror ascent needs a strictly positive policy")
    return np.exp(mirror_step_log(np.log(policy), np.asarray(q, dtype=float), eta, tau))


def dual_cap(tau: float, slater_gap: float, A: int, H: int) -> float:
    return H * (1.0 + tau * math.log(A)) / slater_gap


def lagrange_step(lam, v_constraints, b, eta: float, tau: float, slater_gap: float,
                  A: int, H: int) -> np.ndarray:
    """Projected regularized gradient descent on the multipliers."""
    if slater_gap is None or slater_gap <= 0:
        raise ValueError("slater_gap must be positive")
    lam = np.asarray(lam, dtype=float)
    raw = lam + eta * (np.asarray(b) - np.asarray(v_constraints) - tau * lam)
    return np.clip(raw, 0.0, dual_cap(tau, slater_gap, A, H))


# -- the learner -------------------------------------------------------------------


class EpisodeRecord(NamedTuple):
    k: int
    policy: np.ndarray
    log_policy: np.ndarray
    lam: np.ndarray
    eta: float
    tau: float
    optimistic_values: np.ndarray  # V~^{k,n}_1(x1) for n = 0..N
    trajectory: object


@dataclass
class PrimalDualLearner:
    """State of one online run: policy, multipliers, counts and RNG.

    ``known_model=True`` replaces the empirical kernel with the true one
    and zeroes the bonus, which turns the learner into its exact-model
    planning counterpart.
    """

    cmdp: TabularCmdp
    variant: AlgoVariant = field(default_factory=AlgoVariant)
    schedule: Schedule = EXPERIMENT_SCHEDULE
    slater_gap: float | None = None
    seed: int = 0
    bonus_scale: float = 1.0
    known_model: bool = False

    def __post_init__(self):
        c = self.cmdp
        if c.N > 0 and (self.slater_gap is None or self.slater_gap <= 0):
            raise ValueError("a positive slater_gap is required when constraints exist")
        self.k = 0
        self.log_policy = np.full((c.H, c.X, c.A), -math.log(c.A))
        self.lam = np.zeros(c.N)
        self.model = EmpiricalModel(c.H, c.X, c.A)
        self.rng = make_rng(self.seed, self.variant.tag)
        self._kernel_cdf = np.cumsum(c.kernel, axis=-1)

    @property
    def policy(self) -> np.ndarray:
        return np.exp(self.log_policy)

    def bonus(self) -> np.ndarray:
        c = self.cmdp
        if self.known_model:
            return np.zeros((c.H, c.X, c.A))
        if self.variant.uses_naive_bonus():
            beta = naive_bonus(self.model, self.schedule.delta, self.variant.K)
        else:
            beta = upac_bonus(self.model, self.schedule.delta, c.X, c.A, c.H)
        # the scale shrinks confidence widths of visited cells only; a
        # never-tried cell keeps its full bonus and so saturates the clip
        return np.where(self.model.n > 0, self.bonus_scale * beta, beta)

    def step(self) -> EpisodeRecord:
        c = self.cmdp
        k = self.k + 1
        eta, tau, dual_eta = self.variant.rates(k, self.schedule)
        beta = self.bonus()
        kernel = c.kernel if self.known_model else self.model.p_hat
        policy = self.policy

        tables = [eval_policy_optimistic(c.rewards[0], beta, kernel, policy, tau, self.log_policy)]
        for n in range(1, c.N + 1):
            tables.append(eval_policy_optimistic(c.rewards[n], beta, kernel, policy, 0.0))
        q = combined_q(tables[0], tables[1:], self.lam)
        v_opt = np.array([t.V[0, c.initial_state] for t in tables])

        self.log_policy = mirror_step_log(self.log_policy, q, eta, tau)
        if c.N > 0:
            self.lam = lagrange_step(self.lam, v_opt[1:], c.thresholds, dual_eta, tau,
                                     self.slater_gap, c.A, c.H)
        new_policy = self.policy
        traj = rollout(c, new_policy, self.rng, self._kernel_cdf)
        self.model.update(traj)
        self.k = k
        return EpisodeRecord(k, new_policy, self.log_policy, self.lam.copy(), eta, tau, v_opt, traj)

    def checkpoint(self) -> dict:
        return {
            "episode": self.k,
            "policy_logits": self.log_policy.tolist(),
            "lambda": self.lam.tolist(),
            "counts": self.model.to_dict(),
            "rng_state": rng_state(self.rng),
            "variant": asdict(self.variant),
        }

    def restore(self, state: dict) -> "PrimalDualLearner":
        if AlgoVariant(**state["variant"]) != self.variant:
            raise ValueError("checkpoint belongs to a different algorithm variant")
        self.k = int(state["episode"])
        self.log_policy = np.array(state["policy_logits"], dtype=float)
        self.lam = np.array(state["lambda"], dtype=float)
        self.model = EmpiricalModel.from_dict(state["counts"])
        self.rng = restore_rng(state["rng_state"])
        return self


def _drive(learner: PrimalDualLearner, episodes: int, v_star, metrics_sink: Callable | None):
    from .metrics import RunMetrics, compute_gaps

    if v_star is None:
        from .oracle import solve_cmdp_lp

        v_star = solve_cmdp_lp(learner.cmdp)[0]
    metrics = RunMetrics()
    for _ in range(episodes):
        rec = learner.step()
        gaps = compute_gaps(learner.cmdp, v_star, rec.policy)
        metrics.accumulate(rec.k, gaps, lam=rec.lam, eta=rec.eta, tau=rec.tau)
        if metrics_sink is not None:
            metrics_sink(rec, gaps)
    return metrics


def run_uopt_rpgpd(cmdp: TabularCmdp, schedule: Schedule = EXPERIMENT_SCHEDULE,
                   slater_gap: float | None = None, episodes: int = 1000, seed: int = 0,
                   variant: AlgoVariant | None = None, metrics_sink: Callable | None = None,
                   bonus_scale: float = 1.0, v_star: float | None = None, known_model: bool = False):
    """Run UOpt-RPGPD (or one of its ablations) for ``episodes`` episodes.

    Returns ``(learner, metrics)``; ``metrics_sink(record, gaps)`` sees
    every episode as it happens.
    """
    learner = PrimalDualLearner(cmdp, variant or AlgoVariant(UOPT), schedule, slater_gap, seed,
                                bonus_scale, known_model)
    return learner, _drive(learner, episodes, v_star, metrics_sink)


def run_naive_primal_dual(cmdp: TabularCmdp, K: int, delta: float = 0.1,
                          learning_rates: tuple | None = None, slater_gap: float | None = None,
                          seed: int = 0, metrics_sink: Callable | None = None,
                          bonus_scale: float = 1.0, v_star: float | None = None):
    """Naive optimistic primal-dual baseline run for exactly ``K`` episodes.

    ``learning_rates`` is ``(policy_lr, dual_lr)``; the policy step is an
    unregularized mirror ascent on the optimistic Lagrangian and the dual
    step a projected gradient step capped at ``H / slater_gap``.
    """
    policy_lr, dual_lr = learning_rates if learning_rates is not None else (None, None)
    variant = AlgoVariant.naive(K, cmdp.H, cmdp.A, policy_lr, dual_lr)
    learner = PrimalDualLearner(cmdp, variant, Schedule(delta=delta), slater_gap, seed, bonus_scale)
    return learner, _drive(learner, K, v_star, metrics_sink)
