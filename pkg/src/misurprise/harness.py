"""Experiment orchestration: pollution runs, two-phase runs, the std check and metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.spatial.distance import cdist

from .config import ExperimentConfig
from .engine import MisConfig
from .estimators import ContingencyTable, mle_mutual_information, std_bound
from .gp import GridGp
from .policy import ActionLog, MisrpConfig, MisrpSupervisor, SamplingProcess
from .pollution import PdeParams, Trajectory, simulate_dynamic, simulate_two_phase
from .strategies import (CandidateGrid, FrameContext, GsQbcStrategy, ObservationBuffer, SceStrategy,
                         SrStrategy, knob, run_frame)
from .surprise import SurpriseThresholds

WINDOW = 20

# independent RNG streams per seed, so vanilla and governed runs stay paired
ENV, STRATEGY, POLICY, INIT = 0, 1, 2, 3


def stream(seed: int, which: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), which])


def moving_average(x, window: int = WINDOW) -> np.ndarray:
    """Trailing mean over exactly ``window`` frames; NaN until the window is full."""
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, np.nan)
    if x.size >= window:
        c = np.cumsum(np.insert(x, 0, 0.0))
        out[window - 1:] = (c[window:] - c[:-window]) / window
    return out


@dataclass
class MetricSeries:
    mse: np.ndarray

    @property
    def smoothed(self) -> np.ndarray:
        return moving_average(self.mse)

    @property
    def mean(self) -> float:
        return float(np.mean(self.mse))


def summarize(runs: list[np.ndarray]) -> dict:
    """Mean error with two standard errors: over run means, and pooled over runs x frames."""
    if not runs:
        raise ValueError("need at least one run")
    A = np.vstack([np.asarray(r, dtype=float) for r in runs])
    means = A.mean(axis=1)
    r = len(means)
    se_runs = float(np.std(means, ddof=1) / math.sqrt(r)) if r > 1 else math.nan
    se_pooled = float(np.std(A, ddof=1) / math.sqrt(A.size)) if A.size > 1 else math.nan
    return {"mean": float(A.mean()), "se_runs": se_runs, "se_pooled": se_pooled, "runs": r}


# ---------------------------------------------------------------- pollution runs

def pde_params(cfg: ExperimentConfig) -> PdeParams:
    f = cfg.field
    return PdeParams(velocity=tuple(f.velocity), diffusion=tuple(f.diffusion), decay=f.decay,
                     dt=f.dt, base_mean=f.base_mean, base_std=f.base_std, grid_size=f.grid_size)


def make_trajectory(cfg: ExperimentConfig, seed: int) -> Trajectory:
    f = cfg.field
    env_seed = int(stream(seed, ENV).integers(2 ** 32))
    if cfg.experiment == "two_phase":
        return simulate_two_phase(env_seed, pde_params(cfg), f.source_amplitude, f.source_radius,
                                  f.switch_frame, f.two_phase_frames, f.spinup_frames,
                                  stationary_decay=f.stationary_decay)
    return simulate_dynamic(env_seed, pde_params(cfg), f.n_frames, f.source_amplitude,
                            f.source_radius, f.source_interval, f.initial_sources, f.spinup_frames)


@lru_cache(maxsize=8)
def _grid(n: int) -> CandidateGrid:
    return CandidateGrid.unit_square(n)


@lru_cache(maxsize=8)
def _models(n: int, noise: float, length_scale: float, bandwidth: float) -> dict:
    pts = _grid(n).points
    return {"main": GridGp(pts, "matern_2_5", length_scale, noise),
            "matern_1_5": GridGp(pts, "matern_1_5", length_scale, noise),
            "squared_exponential": GridGp(pts, "squared_exponential", bandwidth, noise)}


@lru_cache(maxsize=4)
def _proximity(n: int) -> np.ndarray:
    pts = _grid(n).points
    return np.exp(-cdist(pts, pts))


def make_strategy(cfg: ExperimentConfig):
    n = cfg.field.grid_size
    if cfg.strategy.startswith("sr_"):
        s = cfg.sr
        return SrStrategy(exploit_limit=s.exploit_limit, radius=s.radius_cells / n,
                          surprise_kind="shannon" if cfg.strategy == "sr_shannon" else "postdictive",
                          thresholds=SurpriseThresholds(s.shannon_threshold, s.postdictive_threshold))
    if cfg.strategy == "sce":
        return SceStrategy(cfg.acquisition.eta)
    return GsQbcStrategy(cfg.acquisition.eta)


def misrp_config(cfg: ExperimentConfig) -> MisrpConfig:
    p = cfg.policy
    xcard = (cfg.field.grid_size // p.x_block) ** 2
    mis = MisConfig(rho=p.rho, regime=p.regime, y_cardinality=p.y_bins, x_cardinality=xcard)
    return MisrpConfig(p.reflection_threshold, mis, p.y_bins, p.suppress_frames, p.y_range)


def block_category(grid_size: int, block: int):
    per_side = grid_size // block

    def f(cells: np.ndarray) -> np.ndarray:
        i, j = np.divmod(np.asarray(cells), grid_size)
        return (i // block) * per_side + (j // block)
    return f


@dataclass
class RunResult:
    seed: int
    config: ExperimentConfig
    mse: np.ndarray
    actions: ActionLog
    knobs: np.ndarray
    processes: np.ndarray
    samples: np.ndarray
    reflections: int = 0
    frames: list = field(default_factory=list, repr=False)

    @property
    def metrics(self) -> MetricSeries:
        return MetricSeries(self.mse)


def run_single(cfg: ExperimentConfig, seed: int, trajectory: Trajectory | None = None,
               keep_estimates: bool = False) -> RunResult:
    """One Monte Carlo run of a pollution or two-phase experiment."""
    if cfg.experiment not in ("pollution", "two_phase"):
        raise ValueError(f"run_single handles pollution experiments, not {cfg.experiment!r}")
    traj = trajectory if trajectory is not None else make_trajectory(cfg, seed)
    n = cfg.field.grid_size
    grid = _grid(n)
    ls = cfg.gp.length_scale if cfg.gp.length_scale is not None else 0.1 * math.sqrt(2.0)
    models = _models(n, cfg.gp.noise_variance, ls, cfg.gp.committee_bandwidth)
    prox = _proximity(n) if cfg.strategy == "sce" else None

    init = stream(seed, INIT).choice(n * n, size=cfg.initial_locations, replace=False)
    first = traj.frames[0].ravel()
    buf = ObservationBuffer(cfg.memory_buffer, init, first[init], [0] * len(init))
    root = SamplingProcess(0, buf, make_strategy(cfg))
    sup = MisrpSupervisor(root, misrp_config(cfg), stream(seed, POLICY),
                          block_category(n, cfg.policy.x_block))
    srng = stream(seed, STRATEGY)

    F = len(traj)
    mse = np.empty(F)
    knobs = np.empty(F)
    procs = np.empty(F, dtype=int)
    samples = np.empty(F, dtype=int)
    estimates = []
    for t in range(F):
        truth = traj.frames[t].ravel()
        observe = truth.__getitem__
        budgets = sup.budgets(cfg.budget_per_frame)
        used = 0
        for p in sup.live:
            ctx = FrameContext(grid, p.buffer, observe, budgets[p.pid], t, srng, models, prox)
            run_frame(p.strategy, ctx)
            used += ctx.consumed
        preds = {}
        for p in sup.live:
            gp = models["main"]
            model = gp.fit(p.buffer.cells, p.buffer.values)
            preds[p.pid] = gp.mean(model, p.buffer.cells)
        est = sup.combine(preds)
        mse[t] = float(np.mean((est - truth) ** 2))
        procs[t] = len(sup.live)
        samples[t] = used
        knobs[t] = knob(sup.live[0].strategy)
        if keep_estimates:
            estimates.append(est.reshape(n, n))
        if cfg.governed:
            sup.step(t)
    return RunResult(seed, cfg, mse, sup.log, knobs, procs, samples, sup.evaluations, estimates)


def run_experiment(cfg: ExperimentConfig) -> list[RunResult]:
    return [run_single(cfg, s) for s in cfg.run_seeds]


def phase_action_rates(log: ActionLog, switch: int, end: int) -> tuple[float, float]:
    """Actions per 50 frames before and after ``switch``."""
    dyn = log.count(0, switch) * 50.0 / switch
    sta = log.count(switch, end) * 50.0 / (end - switch)
    return dyn, sta


# ---------------------------------------------------------------- std check

@dataclass
class StdCheckResult:
    n: np.ndarray
    empirical: np.ndarray
    bound: np.ndarray

    def rows(self):
        return [{"n": int(a), "empirical_std": float(b), "bound": float(c)}
                for a, b, c in zip(self.n, self.empirical, self.bound)]


def std_check(n_pmfs: int = 100, runs: int = 10, n_max: int = 3000, support: int = 100,
              n_points: int = 60, seed: int = 0) -> StdCheckResult:
    """Spread of the plug-in MI of y = x mod 10 over repeated draws, next to log(n)/sqrt(n).

    x is drawn from random pmfs over the integers 0..support. For each pmf the
    sample std (over ``runs`` draws) of the estimate at each n is taken, then
    averaged over pmfs.
    """
    ns = np.unique(np.round(np.geomspace(10, n_max, n_points)).astype(int))
    rng = np.random.default_rng(seed)
    xc = support + 1
    acc = np.zeros(ns.size)
    for _ in range(n_pmfs):
        p = rng.random(xc)
        p /= p.sum()
        est = np.empty((runs, ns.size))
        for r in range(runs):
            x = rng.choice(xc, size=n_max, p=p)
            y = x % 10
            for i, n in enumerate(ns):
                t = ContingencyTable.from_pairs(x[:n], y[:n], xc, 10)
                est[r, i] = mle_mutual_information(t).mi
        acc += est.std(axis=0, ddof=1)
    emp = acc / n_pmfs
    return StdCheckResult(ns, emp, np.array([std_bound(int(n)) for n in ns]))
