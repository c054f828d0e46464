"""Visit counts, the empirical kernel and exploration bonuses."""
from __future__ import annotations

import math

import numpy as np


class EmpiricalModel:
    """Counts ``n[h, x, a]`` and ``m[h, x, a, y]`` with the empirical kernel.

    ``p_hat`` is ``m / max(n, 1)`` and is kept in sync incrementally, so an
    unvisited row is all zeros.
    """

    def __init__(self, H: int, X: int, A: int):
        self.n = np.zeros((H, X, A), dtype=np.int64)
        self.m = np.zeros((H, X, A, X), dtype=np.int64)
        self.p_hat = np.zeros((H, X, A, X))

    @property
    def shape(self):
        return self.n.shape

    def update(self, traj) -> "EmpiricalModel":
        states, actions = traj.states, traj.actions
        for h in range(len(actions)):
            x, a, y = states[h], actions[h], states[h + 1]
            self.n[h, x, a] += 1
            self.m[h, x, a, y] += 1
            self.p_hat[h, x, a] = self.m[h, x, a] / self.n[h, x, a]
        return self

    def to_dict(self) -> dict:
        return {"m": self.m.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "EmpiricalModel":
        m = np.array(d["m"], dtype=np.int64)
        H, X, A, _ = m.shape
        model = cls(H, X, A)
        model.m = m
        model.n = m.sum(axis=3)
        model.p_hat = m / np.maximum(model.n, 1)[..., None]
        return model


def update_counts(model: EmpiricalModel, traj) -> EmpiricalModel:
    return model.update(traj)


def llnp(x):
    """ln(ln(max(x, e))); vectorized."""
    return np.log(np.log(np.maximum(x, math.e)))


def confidence_width(n, delta: float, X: int, A: int, H: int):
    """Per-count confidence radius, clipped at 1."""
    n = np.asarray(n, dtype=float)
    log_term = 2.0 * llnp(2.0 * n) + 2.0 * math.log(48.0 * X * X * A * H / delta)
    return np.minimum(1.0, np.sqrt(log_term / np.maximum(n, 1.0)))


def _check_delta(delta):
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")


def upac_bonus(model: EmpiricalModel, delta: float, X: int, A: int, H: int,
               scale: float = 1.0) -> np.ndarray:
    """Uniform-PAC bonus, summed over next states.

    For each ``(h, x, a)``: ``sum_y 2 sqrt(p_hat(y)) phi + 5 phi**2`` with
    ``phi`` from :func:`confidence_width`. No episode budget enters.
    """
    _check_delta(delta)
    phi = confidence_width(model.n, delta, X, A, H)
    root_mass = np.sqrt(model.p_hat).sum(axis=-1)
    return scale * (2.0 * root_mass * phi + 5.0 * X * phi**2)


def naive_bonus(model: EmpiricalModel, delta: float, K: int, X: int = None, A: int = None,
                H: int = None, scale: float = 1.0) -> np.ndarray:
    """Fixed-budget bonus ``L / max(n, 1) + sqrt(L / max(n, 1))`` with ``L = ln(K / delta)``.

    Leading constants are one; ``X``, ``A`` and ``H`` are accepted for a
    uniform signature but do not enter.
    """
    _check_delta(delta)
    if K < 1:
        raise ValueError("K must be at least 1")
    ratio = math.log(K / delta) / np.maximum(model.n, 1)
    return scale * (ratio + np.sqrt(ratio))
