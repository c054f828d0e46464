"""Random CMDP generation and episodic rollouts.

All randomness flows through :func:`make_rng`, a Philox counter-based
generator keyed by ``(seed, stream)``. Identical keys give bit-identical
draws on every platform numpy supports.
"""
from __future__ import annotations

import zlib
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from .core import TabularCmdp
from .oracle import unconstrained_max

ENV_STREAM = 0


def make_rng(seed: int, stream: int | str = ENV_STREAM) -> np.random.Generator:
    if isinstance(stream, str):
        stream = zlib.crc32(stream.encode())
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


def rng_state(rng: np.random.Generator) -> dict:
    """JSON-friendly snapshot of a Philox generator."""
    state = rng.bit_generator.state

    def plain(v):
        if isinstance(v, dict):
            return {k: plain(x) for k, x in v.items()}
        if isinstance(v, np.ndarray):
            return v.tolist()
        if isinstance(v, np.integer):
            return int(v)
        return v

    return plain(state)


def restore_rng(state: dict) -> np.random.Generator:
    bitgen = np.random.Philox()
    st = dict(state)
    st["state"] = {k: np.array(v, dtype=np.uint64) for k, v in state["state"].items()}
    st["buffer"] = np.array(state["buffer"], dtype=np.uint64)
    bitgen.state = st
    return np.random.Generator(bitgen)


def sample_dirichlet(rng: np.random.Generator, alpha: float, size: int, shape=()) -> np.ndarray:
    """Symmetric Dirichlet rows built from log-space Gamma draws.

    Uses Gamma(alpha) = Gamma(alpha + 1) * U**(1/alpha); working with logs
    keeps tiny shapes such as 0.1 from underflowing a whole row to zero.
    """
    shape = tuple(np.atleast_1d(shape).astype(int)) + (size,)
    log_g = np.log(rng.standard_gamma(alpha + 1.0, size=shape))
    log_g += np.log(rng.random(size=shape)) / alpha
    return np.exp(log_g - logsumexp(log_g, axis=-1, keepdims=True))


def generate_random_cmdp(seed: int, X: int, A: int, H: int, dirichlet_alpha: float = 0.1,
                         zero_prob: float = 0.5):
    """Random single-constraint CMDP with conflicting objective and constraint.

    Draw order from the seeded stream: kernel rows, the zero mask of r0,
    the uniform values of r0, then x1. The constraint reward is ``1 - r0``
    and its threshold is half of its best achievable value. Returns
    ``(cmdp, slater_gap)``; with the half-max rule the gap equals the
    threshold.
    """
    if min(X, A, H) < 1:
        raise ValueError("X, A and H must be positive")
    rng = make_rng(seed, ENV_STREAM)
    kernel = sample_dirichlet(rng, dirichlet_alpha, X, shape=(H, X, A))
    zero = rng.random((H, X, A)) < zero_prob
    values = rng.random((H, X, A))
    r0 = np.where(zero, 0.0, values)
    x1 = int(rng.integers(X))
    rewards = np.stack([r0, 1.0 - r0])

    unconstrained = TabularCmdp(kernel, rewards, [0.0], x1)
    best_r1, _ = unconstrained_max(unconstrained, 1)
    threshold = 0.5 * best_r1
    cmdp = TabularCmdp(unconstrained.kernel, rewards, [threshold], x1)
    return cmdp, best_r1 - threshold


class Trajectory(NamedTuple):
    states: np.ndarray  # (H + 1,)
    actions: np.ndarray  # (H,)

    @property
    def steps(self):
        return [(h, int(self.states[h]), int(self.actions[h]), int(self.states[h + 1]))
                for h in range(len(self.actions))]


def _draw(cdf_row: np.ndarray, u: float) -> int:
    i = int(np.searchsorted(cdf_row, u * cdf_row[-1], side="right"))
    return min(i, cdf_row.size - 1)


def rollout(cmdp: TabularCmdp, policy: np.ndarray, rng: np.random.Generator,
            kernel_cdf: np.ndarray | None = None) -> Trajectory:
    """One episode from x1; consumes exactly 2H uniforms from ``rng``."""
    H = cmdp.H
    if kernel_cdf is None:
        kernel_cdf = np.cumsum(cmdp.kernel, axis=-1)
    u = rng.random(2 * H)
    states = np.empty(H + 1, dtype=np.int64)
    actions = np.empty(H, dtype=np.int64)
    x = cmdp.initial_state
    states[0] = x
    for h in range(H):
        a = _draw(np.cumsum(policy[h, x]), u[2 * h])
        x = _draw(kernel_cdf[h, x, a], u[2 * h + 1])
        actions[h] = a
        states[h + 1] = x
    return Trajectory(states, actions)
