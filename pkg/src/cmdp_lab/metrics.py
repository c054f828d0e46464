"""Per-episode optimality gap, constraint violation, regret and mistake counts."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import TabularCmdp, backward_values, check_policy

DEFAULT_EPS_GRID = (0.5, 0.2, 0.1, 0.05)


def compute_gaps(cmdp: TabularCmdp, v_star: float, policy) -> tuple[float, float]:
    """``(max(v_star - V[r0], 0), max(max_n b^n - V[r^n], 0))`` at x1."""
    policy = check_policy(policy, cmdp.H, cmdp.X, cmdp.A)
    x1 = cmdp.initial_state
    values = [backward_values(cmdp.kernel, cmdp.rewards[n], policy).V[0, x1]
              for n in range(cmdp.N + 1)]
    opt_gap = max(v_star - values[0], 0.0)
    if cmdp.N == 0:
        return float(opt_gap), 0.0
    violation = max(float(np.max(cmdp.thresholds - np.array(values[1:]))), 0.0)
    return float(opt_gap), violation


@dataclass
class RunMetrics:
    """Append-only per-episode log with running regrets and mistake counters.

    Episodes may be thinned (every ``stride``-th recorded); regrets then use
    trapezoidal weights between consecutive records.
    """

    eps_grid: tuple = DEFAULT_EPS_GRID
    episodes: list = field(default_factory=list)
    opt_gap: list = field(default_factory=list)
    violation: list = field(default_factory=list)
    regret_opt: list = field(default_factory=list)
    regret_vio: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    eta: list = field(default_factory=list)
    tau: list = field(default_factory=list)
    mistakes_opt: dict = field(default_factory=dict)
    mistakes_vio: dict = field(default_factory=dict)

    def __post_init__(self):
        self.eps_grid = tuple(sorted(self.eps_grid))
        for eps in self.eps_grid:
            self.mistakes_opt.setdefault(eps, 0)
            self.mistakes_vio.setdefault(eps, 0)

    def __len__(self):
        return len(self.episodes)

    def accumulate(self, k: int, gaps, lam=(), eta=float("nan"), tau=float("nan")) -> "RunMetrics":
        opt_gap, violation = (float(g) for g in gaps)
        if self.episodes and k <= self.episodes[-1]:
            raise ValueError(f"episode {k} does not follow {self.episodes[-1]}")
        if self.episodes:
            stride = k - self.episodes[-1]
            if stride == 1:
                add_opt, add_vio = opt_gap, violation
            else:
                add_opt = 0.5 * (self.opt_gap[-1] + opt_gap) * stride
                add_vio = 0.5 * (self.violation[-1] + violation) * stride
            prev_opt, prev_vio = self.regret_opt[-1], self.regret_vio[-1]
        else:
            add_opt, add_vio = opt_gap * k, violation * k
            prev_opt = prev_vio = 0.0
        self.episodes.append(int(k))
        self.opt_gap.append(opt_gap)
        self.violation.append(violation)
        self.regret_opt.append(prev_opt + add_opt)
        self.regret_vio.append(prev_vio + add_vio)
        self.lam.append(np.array(lam, dtype=float))
        self.eta.append(float(eta))
        self.tau.append(float(tau))
        for eps in self.eps_grid:
            self.mistakes_opt[eps] += opt_gap > eps
            self.mistakes_vio[eps] += violation > eps
        return self

    @property
    def regret(self) -> tuple[float, float]:
        if not self.episodes:
            return 0.0, 0.0
        return self.regret_opt[-1], self.regret_vio[-1]

    def arrays(self) -> dict:
        return {
            "episode": np.array(self.episodes),
            "opt_gap": np.array(self.opt_gap),
            "violation": np.array(self.violation),
            "regret_opt": np.array(self.regret_opt),
            "regret_vio": np.array(self.regret_vio),
        }

    def state(self) -> dict:
        """Everything needed to continue accumulating after a resume."""
        return {
            "eps_grid": list(self.eps_grid),
            "mistakes_opt": [self.mistakes_opt[e] for e in self.eps_grid],
            "mistakes_vio": [self.mistakes_vio[e] for e in self.eps_grid],
            "last": None if not self.episodes else {
                "k": self.episodes[-1],
                "opt_gap": self.opt_gap[-1],
                "violation": self.violation[-1],
                "regret_opt": self.regret_opt[-1],
                "regret_vio": self.regret_vio[-1],
                "lam": self.lam[-1].tolist(),
                "eta": self.eta[-1],
                "tau": self.tau[-1],
            },
        }

    @classmethod
    def from_state(cls, state: dict) -> "RunMetrics":
        grid = tuple(state["eps_grid"])
        m = cls(eps_grid=grid)
        m.mistakes_opt = dict(zip(m.eps_grid, state["mistakes_opt"]))
        m.mistakes_vio = dict(zip(m.eps_grid, state["mistakes_vio"]))
        last = state["last"]
        if last is not None:
            m.episodes.append(last["k"])
            m.opt_gap.append(last["opt_gap"])
            m.violation.append(last["violation"])
            m.regret_opt.append(last["regret_opt"])
            m.regret_vio.append(last["regret_vio"])
            m.lam.append(np.array(last["lam"]))
            m.eta.append(last["eta"])
            m.tau.append(last["tau"])
        return m


def accumulate(metrics: RunMetrics, k: int, gaps) -> RunMetrics:
    return metrics.accumulate(k, gaps)
