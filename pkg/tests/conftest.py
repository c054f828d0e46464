import numpy as np
import pytest

from cmdp_lab.core import TabularCmdp


def random_cmdp(rng, X, A, H, N=1, alpha=0.5, threshold_frac=0.5):
    """Random instance with a dense-ish kernel; thresholds at a fraction of H."""
    kernel = rng.dirichlet(np.full(X, alpha), size=(H, X, A))
    rewards = rng.random((N + 1, H, X, A))
    thresholds = threshold_frac * rng.random(N) * H
    return TabularCmdp(kernel, rewards, thresholds, int(rng.integers(X)))


def random_policy(rng, H, X, A, floor=0.0):
    p = rng.random((H, X, A)) + floor
    return p / p.sum(axis=-1, keepdims=True)


def conflicting_cmdp(rng, X, A, H):
    """Conflicting-reward instance with threshold at half the best constraint value."""
    from cmdp_lab.oracle import unconstrained_max

    kernel = rng.dirichlet(np.full(X, 0.1), size=(H, X, A))
    r0 = np.where(rng.random((H, X, A)) < 0.5, 0.0, rng.random((H, X, A)))
    rewards = np.stack([r0, 1 - r0])
    x1 = int(rng.integers(X))
    best, _ = unconstrained_max(TabularCmdp(kernel, rewards, [0.0], x1), 1)
    return TabularCmdp(kernel, rewards, [best / 2], x1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def single_state(rewards_per_action, H=1, thresholds=(), constraint_rewards=None):
    """One-state CMDP; ``constraint_rewards`` is a list of per-action vectors."""
    A = len(rewards_per_action)
    kernel = np.ones((H, 1, A, 1))
    rs = [np.tile(np.asarray(rewards_per_action, float), (H, 1, 1))]
    for cr in constraint_rewards or []:
        rs.append(np.tile(np.asarray(cr, float), (H, 1, 1)))
    return TabularCmdp(kernel, np.stack(rs), list(thresholds), 0)
