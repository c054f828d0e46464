"""Finite-horizon tabular CMDPs and exact (known-model) evaluation.

Arrays are dense and 0-indexed in ``(h, x, a[, y])`` order:

* kernel ``P``: shape ``(H, X, A, X)``
* rewards ``r``: shape ``(N + 1, H, X, A)``; index 0 is the objective
* policy ``pi``: shape ``(H, X, A)``, row-stochastic over the last axis
* values ``V``: shape ``(H + 1, X)`` with ``V[H] == 0``
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

PROB_TOL = 1e-9
RENORM_TOL = 1e-6


class DegenerateEntropyError(ValueError):
    """Raised when entropy is requested for a policy with a zero entry."""


def _normalize_rows(p: np.ndarray, name: str) -> np.ndarray:
    p = np.array(p, dtype=float)
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError(f"{name} has negative or non-finite entries")
    sums = p.sum(axis=-1, keepdims=True)
    drift = np.abs(sums - 1.0)
    if np.any(drift > RENORM_TOL):
        raise ValueError(f"{name} rows do not sum to 1 (max drift {drift.max():.3g})")
    # rows within float noise are left untouched so JSON round trips stay bit-exact
    if np.any(drift > 1e-12):
        p = p / sums
    return p


@dataclass(frozen=True, eq=False)
class TabularCmdp:
    kernel: np.ndarray
    rewards: np.ndarray
    thresholds: np.ndarray
    initial_state: int

    def __post_init__(self):
        kernel = _normalize_rows(self.kernel, "kernel")
        if kernel.ndim != 4 or kernel.shape[1] != kernel.shape[3]:
            raise ValueError(f"kernel must have shape (H, X, A, X), got {kernel.shape}")
        rewards = np.array(self.rewards, dtype=float)
        if rewards.ndim == 3:
            rewards = rewards[None]
        if rewards.shape[1:] != kernel.shape[:3]:
            raise ValueError(f"rewards shape {rewards.shape} does not match kernel {kernel.shape}")
        if np.any(rewards < 0) or np.any(rewards > 1):
            raise ValueError("rewards must lie in [0, 1]")
        H = kernel.shape[0]
        thresholds = np.atleast_1d(np.array(self.thresholds, dtype=float))
        if thresholds.shape != (rewards.shape[0] - 1,):
            raise ValueError(f"expected {rewards.shape[0] - 1} thresholds, got {thresholds.shape}")
        if np.any(thresholds < 0) or np.any(thresholds > H):
            raise ValueError("thresholds must lie in [0, H]")
        x1 = int(self.initial_state)
        if not 0 <= x1 < kernel.shape[1]:
            raise ValueError(f"initial state {x1} out of range")
        for arr in (kernel, rewards, thresholds):
            arr.setflags(write=False)
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "thresholds", thresholds)
        object.__setattr__(self, "initial_state", x1)

    @property
    def H(self) -> int:
        return self.kernel.shape[0]

    @property
    def X(self) -> int:
        return self.kernel.shape[1]

    @property
    def A(self) -> int:
        return self.kernel.shape[2]

    @property
    def N(self) -> int:
        return self.rewards.shape[0] - 1

    def to_dict(self) -> dict:
        return {
            "X": self.X,
            "A": self.A,
            "H": self.H,
            "N": self.N,
            "kernel": self.kernel.tolist(),
            "rewards": self.rewards.tolist(),
            "thresholds": self.thresholds.tolist(),
            "initial_state": self.initial_state,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TabularCmdp":
        cmdp = cls(
            kernel=np.array(d["kernel"], dtype=float),
            rewards=np.array(d["rewards"], dtype=float),
            thresholds=np.array(d["thresholds"], dtype=float),
            initial_state=d["initial_state"],
        )
        expected = (d["H"], d["X"], d["A"], d["N"])
        if (cmdp.H, cmdp.X, cmdp.A, cmdp.N) != expected:
            raise ValueError("declared dimensions do not match the arrays")
        return cmdp

    def to_json(self) -> str:
        # float repr is the shortest string that round-trips exactly
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "TabularCmdp":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_json())

    @classmethod
    def load(cls, path) -> "TabularCmdp":
        with open(path) as f:
            return cls.from_json(f.read())


class ValueTables(NamedTuple):
    V: np.ndarray  # (H + 1, X)
    Q: np.ndarray  # (H, X, A)
    tau: float


def uniform_policy(H: int, X: int, A: int) -> np.ndarray:
    return np.full((H, X, A), 1.0 / A)


def check_policy(policy: np.ndarray, H: int, X: int, A: int) -> np.ndarray:
    policy = np.asarray(policy, dtype=float)
    if policy.shape != (H, X, A):
        raise ValueError(f"policy shape {policy.shape} != {(H, X, A)}")
    return _normalize_rows(policy, "policy")


def policy_log(policy: np.ndarray) -> np.ndarray:
    if np.any(policy <= 0):
        raise DegenerateEntropyError("entropy needs a strictly positive policy")
    return np.log(policy)


def backward_values(kernel, reward, policy, tau=0.0, log_policy=None) -> ValueTables:
    """Regularized backward induction for one reward tensor.

    ``kernel`` may be any (sub-)stochastic tensor, which lets the same
    recursion serve the empirical model.
    """
    H, X, A = policy.shape
    V = np.zeros((H + 1, X))
    Q = np.empty((H, X, A))
    if tau > 0 and log_policy is None:
        log_policy = policy_log(policy)
    for h in range(H - 1, -1, -1):
        Q[h] = reward[h] + kernel[h] @ V[h + 1]
        if tau > 0:
            V[h] = np.einsum("xa,xa->x", policy[h], Q[h] - tau * log_policy[h])
        else:
            V[h] = np.einsum("xa,xa->x", policy[h], Q[h])
    return ValueTables(V, Q, float(tau))


def eval_policy_exact(cmdp: TabularCmdp, reward_index: int, policy, tau: float = 0.0) -> ValueTables:
    """Exact regularized V and Q of ``policy`` for reward ``reward_index``.

    With ``tau > 0`` every policy entry must be strictly positive;
    zeros raise :class:`DegenerateEntropyError` instead of being clamped.
    """
    if not 0 <= reward_index <= cmdp.N:
        raise IndexError(f"reward index {reward_index} outside 0..{cmdp.N}")
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    policy = check_policy(policy, cmdp.H, cmdp.X, cmdp.A)
    return backward_values(cmdp.kernel, cmdp.rewards[reward_index], policy, tau)


def occupancy(cmdp: TabularCmdp, policy) -> np.ndarray:
    """State-action occupancy ``w[h, x, a]`` started from the point mass at x1."""
    policy = check_policy(policy, cmdp.H, cmdp.X, cmdp.A)
    w = np.zeros((cmdp.H, cmdp.X, cmdp.A))
    state_dist = np.zeros(cmdp.X)
    state_dist[cmdp.initial_state] = 1.0
    for h in range(cmdp.H):
        w[h] = state_dist[:, None] * policy[h]
        state_dist = np.einsum("xa,xay->y", w[h], cmdp.kernel[h])
    return w


def value_from_occupancy(w: np.ndarray, r: np.ndarray) -> float:
    w = np.asarray(w)
    r = np.asarray(r)
    if w.shape != r.shape:
        raise ValueError(f"shape mismatch: occupancy {w.shape} vs reward {r.shape}")
    return float(np.sum(w * r))


def entropy_value_identity_check(cmdp: TabularCmdp, policy, reward_index: int, tau: float) -> float:
    """Residual of V[r, tau] = V[r] + tau * V[-ln pi] at x1."""
    policy = check_policy(policy, cmdp.H, cmdp.X, cmdp.A)
    x1 = cmdp.initial_state
    regularized = eval_policy_exact(cmdp, reward_index, policy, tau).V[0, x1]
    plain = eval_policy_exact(cmdp, reward_index, policy, 0.0).V[0, x1]
    if tau == 0:
        return abs(regularized - plain)
    neg_log = backward_values(cmdp.kernel, -policy_log(policy), policy, 0.0).V[0, x1]
    return abs(regularized - plain - tau * neg_log)
