"""Ground truth for known-model CMDPs.

Unconstrained DP, the occupancy-measure LP, brute-force enumeration for
tiny instances, and the entropy-regularized saddle point used by the
property tests.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .core import TabularCmdp, backward_values, check_policy, eval_policy_exact
from .simplex import InfeasibleError, LpProblem, solve_lp

__all__ = [
    "InfeasibleError",
    "NoSlaterPointError",
    "ConvergenceError",
    "SaddlePoint",
    "unconstrained_max",
    "build_occupancy_lp",
    "solve_cmdp_lp",
    "brute_force_constrained_opt",
    "slater_gap",
    "soft_best_response",
    "regularized_lagrange",
    "regularized_saddle",
]

BRUTE_FORCE_LIMIT = 10**6


class NoSlaterPointError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


def unconstrained_max(cmdp: TabularCmdp, reward_index: int = 0):
    """Optimal value at x1 and a greedy deterministic policy for one reward."""
    H, X, A = cmdp.H, cmdp.X, cmdp.A
    r = cmdp.rewards[reward_index]
    V = np.zeros((H + 1, X))
    policy = np.zeros((H, X, A))
    for h in range(H - 1, -1, -1):
        Q = r[h] + cmdp.kernel[h] @ V[h + 1]
        best = Q.argmax(axis=1)
        policy[h, np.arange(X), best] = 1.0
        V[h] = Q[np.arange(X), best]
    return float(V[0, cmdp.initial_state]), policy


def build_occupancy_lp(cmdp: TabularCmdp) -> LpProblem:
    """Occupancy LP: maximize <w, r0> subject to flow conservation and
    <w, r^n> >= b^n, written as a minimization."""
    H, X, A = cmdp.H, cmdp.X, cmdp.A
    n_vars = H * X * A
    idx = np.arange(n_vars).reshape(H, X, A)

    A_eq = np.zeros((H * X, n_vars))
    b_eq = np.zeros(H * X)
    for y in range(X):
        A_eq[y, idx[0, y]] = 1.0
    b_eq[cmdp.initial_state] = 1.0
    for h in range(1, H):
        for y in range(X):
            row = h * X + y
            A_eq[row, idx[h, y]] = 1.0
            A_eq[row, idx[h - 1].ravel()] -= cmdp.kernel[h - 1, :, :, y].ravel()

    A_ub = -cmdp.rewards[1:].reshape(cmdp.N, n_vars)
    b_ub = -cmdp.thresholds
    return LpProblem(c=-cmdp.rewards[0].ravel(), A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub)


def policy_from_occupancy(w: np.ndarray) -> np.ndarray:
    mass = w.sum(axis=2, keepdims=True)
    A = w.shape[2]
    with np.errstate(invalid="ignore", divide="ignore"):
        policy = np.where(mass > 0, w / np.where(mass > 0, mass, 1.0), 1.0 / A)
    return policy / policy.sum(axis=2, keepdims=True)


def solve_cmdp_lp(cmdp: TabularCmdp):
    """Constrained optimum via the occupancy LP.

    Returns ``(v_star, occupancy, policy)``. Raises
    :class:`InfeasibleError` when no policy meets the thresholds.
    """
    res = solve_lp(build_occupancy_lp(cmdp))
    w = np.clip(res.x.reshape(cmdp.H, cmdp.X, cmdp.A), 0.0, None)
    return -res.objective, w, policy_from_occupancy(w)


def _deterministic_values(cmdp: TabularCmdp, actions: np.ndarray) -> np.ndarray:
    """Values at x1 of every reward for a batch of deterministic policies.

    ``actions`` has shape ``(P, H, X)``; result has shape ``(N + 1, P)``.
    """
    n_pol, H, X = actions.shape
    out = np.empty((cmdp.N + 1, n_pol))
    states = np.arange(X)
    for n in range(cmdp.N + 1):
        V = np.zeros((n_pol, X))
        for h in range(H - 1, -1, -1):
            a = actions[:, h, :]
            r = cmdp.rewards[n, h][states, a]  # (P, X)
            P_next = cmdp.kernel[h][states, a]  # (P, X, X)
            V = r + np.einsum("pxy,py->px", P_next, V)
        out[n] = V[:, cmdp.initial_state]
    return out


def _enumerate_values(cmdp: TabularCmdp, batch: int = 65536) -> np.ndarray:
    count = cmdp.A ** (cmdp.H * cmdp.X)
    if count > BRUTE_FORCE_LIMIT:
        raise ValueError(f"{count} deterministic policies exceeds the brute-force limit")
    cells = cmdp.H * cmdp.X
    values = []
    all_actions = itertools.product(range(cmdp.A), repeat=cells)
    while True:
        chunk = list(itertools.islice(all_actions, batch))
        if not chunk:
            break
        acts = np.array(chunk, dtype=np.int64).reshape(-1, cmdp.H, cmdp.X)
        values.append(_deterministic_values(cmdp, acts))
    return np.concatenate(values, axis=1)


def brute_force_constrained_opt(cmdp: TabularCmdp, tol: float = 1e-12) -> float:
    """Constrained optimum by enumerating deterministic policies.

    With one constraint the optimum is a mixture of at most two
    deterministic policies, so the search covers pure feasible policies and
    every pair straddling the threshold, mixed to make the constraint tight.
    """
    if cmdp.N > 1:
        raise ValueError("brute force supports at most one constraint")
    values = _enumerate_values(cmdp)
    v = values[0]
    if cmdp.N == 0:
        return float(v.max())
    c = values[1]
    b = cmdp.thresholds[0]
    feasible = c >= b - tol
    if not feasible.any():
        raise InfeasibleError("no deterministic policy mixture meets the threshold")

    # only Pareto points in (c, v) can appear in an optimal mixture
    order = np.lexsort((-v, -c))
    pareto = []
    best_v = -np.inf
    for i in order:
        if v[i] > best_v:
            pareto.append(i)
            best_v = v[i]
    pareto = np.array(pareto)
    best = v[feasible].max()
    hi = pareto[c[pareto] > b]
    lo = pareto[c[pareto] < b]
    if hi.size and lo.size:
        ci, vi = c[hi][:, None], v[hi][:, None]
        cj, vj = c[lo][None, :], v[lo][None, :]
        theta = (b - cj) / (ci - cj)
        best = max(best, float(np.max(theta * vi + (1 - theta) * vj)))
    return float(best)


def slater_gap(cmdp: TabularCmdp) -> float:
    """Largest achievable margin of the (single) constraint."""
    if cmdp.N != 1:
        raise ValueError("slater_gap is defined here for exactly one constraint")
    best, _ = unconstrained_max(cmdp, 1)
    gap = best - cmdp.thresholds[0]
    if gap <= 0:
        raise NoSlaterPointError(f"no strictly feasible policy (margin {gap:.3g})")
    return float(gap)


# -- entropy-regularized saddle point -------------------------------------------------


@dataclass
class SaddlePoint:
    policy: np.ndarray
    lam: np.ndarray
    value: float
    iterations: int


def soft_best_response(cmdp: TabularCmdp, lam, tau: float) -> np.ndarray:
    """argmax over policies of the regularized Lagrangian at fixed ``lam``."""
    reward = cmdp.rewards[0] + np.tensordot(lam, cmdp.rewards[1:], axes=1)
    H, X, A = cmdp.H, cmdp.X, cmdp.A
    V = np.zeros(X)
    policy = np.empty((H, X, A))
    for h in range(H - 1, -1, -1):
        Q = reward[h] + cmdp.kernel[h] @ V
        V = tau * logsumexp(Q / tau, axis=1)
        policy[h] = np.exp(Q / tau - (V / tau)[:, None])
    return policy / policy.sum(axis=2, keepdims=True)


def regularized_lagrange(cmdp: TabularCmdp, policy, lam, tau: float) -> float:
    """V[r0, tau] + sum_n lam_n (V[r^n] - b^n) + tau/2 |lam|^2 at x1."""
    lam = np.asarray(lam, dtype=float)
    x1 = cmdp.initial_state
    total = eval_policy_exact(cmdp, 0, policy, tau).V[0, x1]
    for n in range(1, cmdp.N + 1):
        v_n = eval_policy_exact(cmdp, n, policy, 0.0).V[0, x1]
        total += lam[n - 1] * (v_n - cmdp.thresholds[n - 1])
    return float(total + 0.5 * tau * lam @ lam)


def _constraint_values(cmdp, policy):
    policy = check_policy(policy, cmdp.H, cmdp.X, cmdp.A)
    return np.array([
        backward_values(cmdp.kernel, cmdp.rewards[n], policy).V[0, cmdp.initial_state]
        for n in range(1, cmdp.N + 1)
    ])


def regularized_saddle(cmdp: TabularCmdp, tau: float, iterations: int = 10**6,
                       tolerance: float = 1e-8) -> SaddlePoint:
    """Saddle point of the regularized Lagrangian under the true kernel.

    The primal player responds exactly (soft backward induction), which
    leaves a tau-strongly convex dual over ``lam >= 0`` whose gradient is
    ``V[r^n] - b^n + tau lam``. With one constraint that gradient is a
    continuous increasing scalar function, solved by bracketing and Brent's
    method. Several constraints use projected gradient steps with the step
    backtracked against a gradient Lipschitz estimate.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    b = cmdp.thresholds

    def respond(lam):
        pi = soft_best_response(cmdp, lam, tau)
        return pi, _constraint_values(cmdp, pi) - b + tau * lam

    def done(pi, lam, it):
        return SaddlePoint(pi, lam, regularized_lagrange(cmdp, pi, lam, tau), it)

    lam = np.zeros(cmdp.N)
    pi, grad = respond(lam)
    if cmdp.N == 0 or np.all(grad >= 0):
        return done(pi, lam, 1)

    if cmdp.N == 1:
        def slope(x):
            return float(respond(np.array([x]))[1][0])

        # slope(0) < 0 and slope grows at least like tau * x
        hi = 1.0
        while slope(hi) < 0:
            hi *= 2.0
        root, info = brentq(slope, 0.0, hi, xtol=min(tolerance, 1e-14), rtol=4 * np.finfo(float).eps,
                            maxiter=iterations, full_output=True)
        lam = np.array([root])
        return done(soft_best_response(cmdp, lam, tau), lam, info.iterations)

    step = 1.0 / tau
    for it in range(1, iterations + 1):
        while True:
            cand = np.maximum(lam - step * grad, 0.0)
            pi_new, grad_new = respond(cand)
            diff = cand - lam
            # accept when the step is below the inverse local Lipschitz constant
            if step * np.linalg.norm(grad_new - grad) <= np.linalg.norm(diff) or step < 1e-12:
                break
            step *= 0.5
        lam, pi, grad = cand, pi_new, grad_new
        if np.linalg.norm(lam - np.maximum(lam - grad, 0.0)) < tolerance:
            return done(pi, lam, it)
    raise ConvergenceError(f"no convergence within {iterations} iterations")
