"""Experiment orchestration: configs, per-run CSV logs, checkpoints, manifest and charts."""
from __future__ import annotations

import csv
import json
import logging
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algorithms import NAIVE, TAGS, AlgoVariant, PrimalDualLearner, Schedule
from .core import TabularCmdp
from .env import generate_random_cmdp
from .metrics import DEFAULT_EPS_GRID, RunMetrics, compute_gaps
from .oracle import slater_gap as oracle_slater_gap
from .oracle import solve_cmdp_lp

log = logging.getLogger(__name__)

CSV_HEADER = "episode,algo,seed,opt_gap,violation,regret_opt,regret_vio,lambda_1,eta,tau"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    env: dict
    variants: list = field(default_factory=lambda: [NAIVE])
    alpha_eta: float = 0.53
    alpha_tau: float = 0.4
    delta: float = 0.1
    episodes: int = 10**5
    seeds: list = field(default_factory=lambda: [0])
    bonus_scale: float = 1e-3
    eps_grid: tuple = DEFAULT_EPS_GRID
    output_dir: str = "runs"
    naive_K: int | None = None
    metric_every: int = 1
    checkpoint_every: int = 0
    workers: int = 1
    base_dir: str = "."

    def __post_init__(self):
        if not isinstance(self.env, dict) or not ("path" in self.env or "seed" in self.env):
            raise ConfigError("env needs either a 'path' or generator fields with a 'seed'")
        if self.episodes < 0:
            raise ConfigError("episodes must be nonnegative")
        if not 0 < self.delta <= 1:
            raise ConfigError("delta must lie in (0, 1]")
        if self.metric_every < 1:
            raise ConfigError("metric_every must be at least 1")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        for v in self.variants:
            tag = v if isinstance(v, str) else v.get("tag")
            if tag not in TAGS:
                raise ConfigError(f"unknown variant {tag!r}")
        if any(e <= 0 for e in self.eps_grid):
            raise ConfigError("eps grid values must be positive")
        if not self.schedule.satisfies_theory():
            warnings.warn("schedule exponents fall outside the range covered by the guarantee")

    @property
    def schedule(self) -> Schedule:
        return Schedule(self.alpha_eta, self.alpha_tau, self.delta)

    @property
    def out_path(self) -> Path:
        return Path(self.base_dir) / self.output_dir

    @classmethod
    def from_dict(cls, d: dict, base_dir=".") -> "ExperimentConfig":
        d = dict(d)
        schedule = d.pop("schedule", {})
        d.setdefault("alpha_eta", schedule.get("alpha_eta", 0.53))
        d.setdefault("alpha_tau", schedule.get("alpha_tau", 0.4))
        if "eps_grid" in d:
            d["eps_grid"] = tuple(d["eps_grid"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(base_dir=str(base_dir), **d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(d, base_dir=path.parent)

    def build_variant(self, spec, H: int, A: int) -> AlgoVariant:
        spec = {"tag": spec} if isinstance(spec, str) else dict(spec)
        tag = spec.pop("tag")
        K = spec.pop("K", self.naive_K or self.episodes or 1)
        if tag == NAIVE:
            return AlgoVariant.naive(K, H, A, spec.get("policy_lr"), spec.get("dual_lr"))
        return AlgoVariant(tag, K=K, **spec)


def load_environment(config: ExperimentConfig):
    """``(cmdp, slater_gap)`` from a JSON file or the random generator."""
    env = config.env
    if "path" in env:
        cmdp = TabularCmdp.load(Path(config.base_dir) / env["path"])
        return cmdp, (oracle_slater_gap(cmdp) if cmdp.N == 1 else None)
    return generate_random_cmdp(env["seed"], env.get("states", 30), env.get("actions", 3),
                                env.get("horizon", 10))


def format_row(k, algo, seed, opt_gap, violation, regret_opt, regret_vio, lam1, eta, tau) -> str:
    nums = (opt_gap, violation, regret_opt, regret_vio, lam1, eta, tau)
    return f"{k},{algo},{seed}," + ",".join(f"{float(v):.17g}" for v in nums) + "\n"


def _write_json_atomic(path: Path, obj) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(obj))
    os.replace(tmp, path)


def run_single(cmdp: TabularCmdp, variant: AlgoVariant, seed: int, schedule: Schedule,
               slater_gap, v_star: float, episodes: int, csv_path, bonus_scale: float = 1.0,
               eps_grid=DEFAULT_EPS_GRID, metric_every: int = 1, checkpoint_every: int = 0,
               checkpoint_path=None, resume: bool = False, stop_after: int | None = None):
    """One (variant, seed) run streamed to ``csv_path``.

    With ``checkpoint_every > 0`` the learner, metric accumulators and the
    CSV byte offset are saved periodically; ``resume=True`` continues from
    the last checkpoint and produces the same bytes as an uninterrupted
    run. ``stop_after`` halts early (used to simulate interruption).
    """
    csv_path = Path(csv_path)
    checkpoint_path = Path(checkpoint_path or csv_path.with_suffix(".ckpt.json"))
    learner = PrimalDualLearner(cmdp, variant, schedule, slater_gap, seed, bonus_scale)
    metrics = RunMetrics(eps_grid=eps_grid)
    if resume and checkpoint_path.exists():
        ckpt = json.loads(checkpoint_path.read_text())
        learner.restore(ckpt["learner"])
        metrics = RunMetrics.from_state(ckpt["metrics"])
        fh = open(csv_path, "r+")
        fh.truncate(ckpt["csv_offset"])
        fh.seek(ckpt["csv_offset"])
    else:
        fh = open(csv_path, "w")
        fh.write(CSV_HEADER + "\n")

    with fh:
        while learner.k < episodes:
            if stop_after is not None and learner.k >= stop_after:
                break
            rec = learner.step()
            k = rec.k
            if k % metric_every == 0 or k == episodes:
                gaps = compute_gaps(cmdp, v_star, rec.policy)
                metrics.accumulate(k, gaps, lam=rec.lam, eta=rec.eta, tau=rec.tau)
                lam1 = rec.lam[0] if rec.lam.size else 0.0
                fh.write(format_row(k, variant.tag, seed, *gaps, *metrics.regret, lam1, rec.eta, rec.tau))
            if checkpoint_every and k % checkpoint_every == 0:
                fh.flush()
                _write_json_atomic(checkpoint_path, {
                    "learner": learner.checkpoint(),
                    "metrics": metrics.state(),
                    "csv_offset": fh.tell(),
                })
    return metrics


def _run_job(job):
    (cmdp_dict, variant, seed, schedule, gap, v_star, config) = job
    cmdp = TabularCmdp.from_dict(cmdp_dict)
    out = config.out_path
    csv_path = out / f"{variant.tag}_seed{seed}.csv"
    metrics = run_single(cmdp, variant, seed, schedule, gap, v_star, config.episodes, csv_path,
                         config.bonus_scale, config.eps_grid, config.metric_every,
                         config.checkpoint_every)
    regret_opt, regret_vio = metrics.regret
    return {
        "algo": variant.tag,
        "seed": seed,
        "csv": csv_path.name,
        "episodes": config.episodes,
        "regret_opt": regret_opt,
        "regret_vio": regret_vio,
        "mistakes_opt": {str(e): int(c) for e, c in metrics.mistakes_opt.items()},
        "mistakes_vio": {str(e): int(c) for e, c in metrics.mistakes_vio.items()},
    }


def run_experiment(config: ExperimentConfig) -> Path:
    """Run every (variant, seed) pair; returns the manifest path."""
    cmdp, gap = load_environment(config)
    v_star, _, _ = solve_cmdp_lp(cmdp)
    out = config.out_path
    out.mkdir(parents=True, exist_ok=True)
    cmdp.save(out / "env.json")

    jobs = []
    for spec in config.variants:
        variant = config.build_variant(spec, cmdp.H, cmdp.A)
        for seed in config.seeds:
            jobs.append((cmdp.to_dict(), variant, int(seed), config.schedule, gap, v_star, config))
    log.info("running %d jobs with %d workers", len(jobs), config.workers)
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            runs = list(pool.map(_run_job, jobs))
    else:
        runs = [_run_job(job) for job in jobs]

    manifest = {
        "v_star": v_star,
        "slater_gap": gap,
        "threshold": cmdp.thresholds.tolist(),
        "env": config.env,
        "episodes": config.episodes,
        "metric_every": config.metric_every,
        "bonus_scale": config.bonus_scale,
        "eps_grid": list(config.eps_grid),
        "runs": runs,
    }
    manifest_path = out / "manifest.json"
    _write_json_atomic(manifest_path, manifest)
    return manifest_path


def read_run_csv(path) -> dict:
    """Columns of a run CSV as arrays (``algo`` and ``seed`` as scalars)."""
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        return {"algo": None, "seed": None, "episode": np.array([], dtype=int),
                **{k: np.array([]) for k in CSV_HEADER.split(",")[3:]}}
    out = {"algo": rows[0]["algo"], "seed": int(rows[0]["seed"]),
           "episode": np.array([int(r["episode"]) for r in rows])}
    for key in CSV_HEADER.split(",")[3:]:
        out[key] = np.array([float(r[key]) for r in rows])
    return out


def emit_chart(csv_paths, output_path, labels=None) -> Path:
    """Two-panel SVG: optimality gap and constraint violation per episode."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    csv_paths = list(csv_paths)
    if not csv_paths:
        raise ValueError("no runs to plot")
    runs = [read_run_csv(p) for p in csv_paths]
    if labels is None:
        labels = [r["algo"] for r in runs]
        if len(set(labels)) < len(labels):
            labels = [f"{r['algo']} (seed {r['seed']})" for r in runs]

    plt.rcParams["svg.hashsalt"] = "cmdp-lab"
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    for run, label in zip(runs, labels):
        axes[0].plot(run["episode"], run["opt_gap"], label=label, linewidth=1)
        axes[1].plot(run["episode"], run["violation"], label=label, linewidth=1)
    axes[0].set_title("optimality gap")
    axes[1].set_title("constraint violation")
    for ax in axes:
        ax.set_xlabel("episode")
        ax.grid(alpha=0.3)
    axes[1].legend(loc="upper right", fontsize="small")
    fig.tight_layout()
    output_path = Path(output_path)
    fig.savefig(output_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return output_path
