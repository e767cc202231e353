"""Exploration-exploitation sampling strategies over a finite candidate grid.

Three strategies share one interface: a frozen configuration object holding
the knob that the reaction policy turns (exploit limit ``t`` for SR, ``eta``
for SC/E and GS/QBC), and ``run_frame`` which spends one frame's sampling
budget against an environment callback.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Literal

import numpy as np
from scipy.spatial.distance import cdist

from .gp import GpModel, VarianceTracker, as_points, posterior_after_observation, predict, predictive_entropy
from .surprise import PredictiveGaussian, SurpriseThresholds, postdictive_surprise, shannon_surprise

Direction = Literal["more_exploit", "more_explore"]
SurpriseKind = Literal["shannon", "postdictive"]

ETA_STEP = 0.1


class CandidateGrid:
    """Finite set of query-able points; index order defines every tie-break."""

    def __init__(self, points):
        pts = as_points(points)
        if pts.shape[0] == 0:
            raise ValueError("candidate grid must be nonempty")
        self.points = pts
        self.visited = np.zeros(len(pts), dtype=bool)

    @classmethod
    def unit_square(cls, n: int) -> "CandidateGrid":
        """Cell centres of an n x n grid on [0, 1]^2, row-major (index = i * n + j)."""
        c = (np.arange(n) + 0.5) / n
        g1, g2 = np.meshgrid(c, c, indexing="ij")
        return cls(np.column_stack([g1.ravel(), g2.ravel()]))

    def __len__(self) -> int:
        return self.points.shape[0]

    def ball(self, j: int, radius: float) -> np.ndarray:
        """Indices within ``radius`` of candidate j, excluding j unless it is alone."""
        d = np.linalg.norm(self.points - self.points[j], axis=1)
        idx = np.flatnonzero(d <= radius * (1 + 1e-9))
        others = idx[idx != j]
        return others if others.size else np.array([j])


def min_distances(points: np.ndarray, X) -> np.ndarray:
    X = as_points(X) if X is not None and len(X) else np.empty((0, points.shape[1]))
    if X.shape[0] == 0:
        return np.full(points.shape[0], np.inf)
    return cdist(points, X).min(axis=1)


def space_filling_next(X, grid: CandidateGrid) -> int:
    """Index of the candidate farthest from its nearest observed point (min-max design)."""
    return int(np.argmax(min_distances(grid.points, X)))


# ---------------------------------------------------------------- SR

@dataclass(frozen=True)
class SrState:
    mode: Literal["explore", "exploit"] = "explore"
    exploit_limit: int = 3
    exploit_counter: int = 0
    anchor: int | None = None
    pending: tuple = ()
    radius: float = 0.04
    thresholds: SurpriseThresholds = SurpriseThresholds()
    surprise_kind: SurpriseKind = "shannon"

    def __post_init__(self):
        if self.exploit_limit < 1:
            raise ValueError("exploit limit must be >= 1")
        if self.radius <= 0:
            raise ValueError("neighbourhood radius must be positive")
        if self.surprise_kind not in ("shannon", "postdictive"):
            raise ValueError(f"unknown surprise kind {self.surprise_kind!r}")
        if self.mode == "explore" and (self.anchor is not None or self.pending):
            raise ValueError("explore mode carries no surprise anchor or pending set")
        if self.exploit_counter > self.exploit_limit:
            raise ValueError("exploit counter exceeds the exploit limit")

    def reset(self) -> "SrState":
        return replace(self, mode="explore", exploit_counter=0, anchor=None, pending=())


@dataclass(frozen=True)
class SrStep:
    sample: tuple[int, float]
    state: SrState
    accepted: tuple = ()
    discarded: tuple = ()
    surprise: float = math.nan


def sr_surprise(model: GpModel | None, x, y: float, kind: SurpriseKind) -> float:
    """Shannon surprise in decimal log units, or postdictive surprise in nats."""
    if model is None:
        return 0.0
    m, v = model.latent(np.atleast_2d(x))
    m, v = float(m[0]), float(v[0])
    prior = PredictiveGaussian(m, v + model.noise_variance)
    if kind == "shannon":
        return shannon_surprise(prior, y, base=10.0)
    pm, pv = posterior_after_observation(m, v, model.noise_variance, y)
    return postdictive_surprise(prior, PredictiveGaussian(pm, pv + model.noise_variance))


def _threshold(state: SrState) -> float:
    t = state.thresholds
    return t.shannon if state.surprise_kind == "shannon" else t.postdictive


def sr_step(state: SrState, model: GpModel | None, grid: CandidateGrid,
            observe: Callable[[int], float], rng: np.random.Generator,
            observed_X=None, min_dist: np.ndarray | None = None) -> SrStep:
    """Consume one environment sample.

    ``model`` is trained on accepted observations only; its inputs are the
    observed set for space filling unless ``observed_X`` overrides them.
    In exploit mode every surprising verification joins the pending set; the
    set is accepted once ``exploit_limit`` verifications in a row were
    surprising, or dropped at the first unsurprising one. ``min_dist`` may
    carry precomputed distances from each candidate to the observed set.
    """
    s_max = _threshold(state)
    if state.mode == "explore":
        if min_dist is not None:
            j = int(np.argmax(min_dist))
        else:
            X = observed_X if observed_X is not None else (model.X if model is not None else None)
            j = space_filling_next(X, grid)
        y = float(observe(j))
        s = sr_surprise(model, grid.points[j], y, state.surprise_kind)
        if s <= s_max:
            return SrStep((j, y), state, accepted=((j, y),), surprise=s)
        new = replace(state, mode="exploit", anchor=j, pending=((j, y),), exploit_counter=0)
        return SrStep((j, y), new, surprise=s)

    ball = grid.ball(state.anchor, state.radius)
    j = int(ball[rng.integers(ball.size)])
    y = float(observe(j))
    s = sr_surprise(model, grid.points[j], y, state.surprise_kind)
    if s <= s_max:
        return SrStep((j, y), state.reset(), accepted=((j, y),),
                      discarded=state.pending, surprise=s)
    pending = state.pending + ((j, y),)
    count = state.exploit_counter + 1
    if count >= state.exploit_limit:
        return SrStep((j, y), state.reset(), accepted=pending, surprise=s)
    return SrStep((j, y), replace(state, pending=pending, exploit_counter=count), surprise=s)


def sr_flush(state: SrState) -> tuple[SrState, tuple]:
    """Budget exhausted: a pending set still under verification is accepted."""
    return state.reset(), state.pending


# ---------------------------------------------------------------- acquisitions

def sce_acquisition(x, unseen, model: GpModel, eta: float) -> float:
    """(1 - eta) * mean over unseen x' of exp(-|x - x'|) + eta * predictive entropy."""
    U = unseen.points if isinstance(unseen, CandidateGrid) else as_points(unseen)
    if U.shape[0] == 0:
        raise ValueError("the unseen region is empty")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    rep = float(np.mean(np.exp(-cdist(x, U)[0])))
    return (1.0 - eta) * rep + eta * predictive_entropy(predict(model, x[0]))


def gsqbc_acquisition(x, data, committee, eta: float) -> float:
    """(1 - eta) * min over observed (x', y') of |x - x'| |f(x) - y'| + eta * max committee gap.

    ``f`` is the first committee member; ``data`` is an (X, y) pair.
    """
    if len(committee) < 2:
        raise ValueError("a committee needs at least two models")
    X, Y = data
    X = as_points(X)
    Y = np.asarray(Y, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("need at least one observation")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    preds = np.array([float(m.mean(x)[0]) for m in committee])
    explore = float(np.min(cdist(x, X)[0] * np.abs(preds[0] - Y)))
    disagree = float(preds.max() - preds.min())
    return (1.0 - eta) * explore + eta * disagree


# ---------------------------------------------------------------- strategies

@dataclass(frozen=True)
class SrStrategy:
    exploit_limit: int = 3
    radius: float = 0.04
    surprise_kind: SurpriseKind = "shannon"
    thresholds: SurpriseThresholds = SurpriseThresholds()
    kind: str = field(default="sr", init=False)

    def __post_init__(self):
        if self.exploit_limit < 1:
            raise ValueError("exploit limit must be >= 1")

    def initial_state(self) -> SrState:
        return SrState(exploit_limit=self.exploit_limit, radius=self.radius,
                       thresholds=self.thresholds, surprise_kind=self.surprise_kind)


@dataclass(frozen=True)
class SceStrategy:
    eta: float = 0.5
    kind: str = field(default="sce", init=False)

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")


@dataclass(frozen=True)
class GsQbcStrategy:
    eta: float = 0.5
    kind: str = field(default="gsqbc", init=False)

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")


Strategy = SrStrategy | SceStrategy | GsQbcStrategy


def adjust(strategy: Strategy, direction: Direction) -> Strategy:
    """Move the exploration-exploitation knob one step, clamped to its range."""
    if direction not in ("more_exploit", "more_explore"):
        raise ValueError(f"unknown direction {direction!r}")
    up = direction == "more_exploit"
    if isinstance(strategy, SrStrategy):
        return replace(strategy, exploit_limit=max(1, strategy.exploit_limit + (1 if up else -1)))
    # round away float drift so ten steps land exactly on the ends
    eta = round(strategy.eta + (ETA_STEP if up else -ETA_STEP), 10)
    return replace(strategy, eta=min(1.0, max(0.0, eta)))


def knob(strategy: Strategy) -> float:
    return float(strategy.exploit_limit if isinstance(strategy, SrStrategy) else strategy.eta)


class ObservationBuffer:
    """Ordered (cell, value, frame) records, FIFO-capped at ``capacity``."""

    def __init__(self, capacity: int, cells=(), values=(), frames=()):
        if capacity < 1:
            raise ValueError("buffer capacity must be positive")
        self.capacity = int(capacity)
        self.cells: list[int] = [int(c) for c in cells]
        self.values: list[float] = [float(v) for v in values]
        self.frames: list[int] = [int(f) for f in frames]
        self._trim()

    def _trim(self):
        extra = len(self.cells) - self.capacity
        if extra > 0:
            del self.cells[:extra], self.values[:extra], self.frames[:extra]

    def add(self, cell: int, value: float, frame: int) -> None:
        self.cells.append(int(cell))
        self.values.append(float(value))
        self.frames.append(int(frame))
        self._trim()

    def __len__(self) -> int:
        return len(self.cells)

    def slice(self, start: int, stop: int | None = None) -> "ObservationBuffer":
        return ObservationBuffer(self.capacity, self.cells[start:stop],
                                 self.values[start:stop], self.frames[start:stop])


@dataclass
class FrameContext:
    """Everything a strategy needs to spend one frame's budget."""

    grid: CandidateGrid
    buffer: ObservationBuffer
    observe: Callable[[int], float]
    budget: int
    frame: int
    rng: np.random.Generator
    models: dict  # family -> GridGp; "main" is used for estimation
    proximity: np.ndarray | None = None  # exp(-|x - x'|) over the grid, for SC/E
    consumed: int = 0

    def sample(self, j: int) -> float:
        self.consumed += 1
        return float(self.observe(j))

    def fit(self, which: str = "main") -> GpModel | None:
        if len(self.buffer) == 0:
            return None
        return self.models[which].fit(self.buffer.cells, self.buffer.values)


def run_frame(strategy: Strategy, ctx: FrameContext) -> dict:
    """Spend exactly ``ctx.budget`` environment samples; returns frame diagnostics."""
    if isinstance(strategy, SrStrategy):
        out = _sr_frame(strategy, ctx)
    elif isinstance(strategy, SceStrategy):
        out = _sce_frame(strategy, ctx)
    elif isinstance(strategy, GsQbcStrategy):
        out = _gsqbc_frame(strategy, ctx)
    else:
        raise TypeError(f"unknown strategy {strategy!r}")
    if ctx.consumed != ctx.budget:
        raise RuntimeError(f"strategy consumed {ctx.consumed} samples, budget {ctx.budget}")
    return out


def _sr_frame(strategy: SrStrategy, ctx: FrameContext) -> dict:
    state = strategy.initial_state()
    model = ctx.fit()
    pts = ctx.grid.points
    accepted = discarded = 0
    # observed set for space filling: the buffer at frame start plus this
    # frame's acceptances (points evicted mid-frame still count until the next frame)
    mind = min_distances(pts, pts[ctx.buffer.cells]) if len(ctx.buffer) else None
    for _ in range(ctx.budget):
        step = sr_step(state, model, ctx.grid, ctx.sample, ctx.rng, min_dist=mind)
        state = step.state
        discarded += len(step.discarded)
        if step.accepted:
            for j, y in step.accepted:
                ctx.buffer.add(j, y, ctx.frame)
                d = np.linalg.norm(pts - pts[j], axis=1)
                mind = d if mind is None else np.minimum(mind, d)
            accepted += len(step.accepted)
            model = ctx.fit()
    state, pending = sr_flush(state)
    for j, y in pending:
        ctx.buffer.add(j, y, ctx.frame)
    accepted += len(pending)
    return {"accepted": accepted, "discarded": discarded}


def _sce_frame(strategy: SceStrategy, ctx: FrameContext) -> dict:
    n = len(ctx.grid)
    gp = ctx.models["main"]
    seen = np.zeros(n, dtype=bool)
    seen[ctx.buffer.cells] = True
    model = ctx.fit()
    if ctx.proximity is None:
        ctx.proximity = np.exp(-cdist(ctx.grid.points, ctx.grid.points))
    E = ctx.proximity
    rep_sum = E @ (~seen).astype(float)
    if model is not None:
        tracker = VarianceTracker(model, ctx.grid.points, gp.cross(model, ctx.buffer.cells),
                                  kernel_column=lambda j: gp.column(model, j))
    eta = strategy.eta
    for _ in range(ctx.budget):
        unseen_count = int(np.count_nonzero(~seen))
        if unseen_count == 0:
            seen[:] = False
            rep_sum = E.sum(axis=1)
            unseen_count = n
        if model is None:
            ent = np.zeros(n)
        else:
            ent = 0.5 * np.log(2.0 * np.pi * np.e * (tracker.variance + model.noise_variance))
        score = (1.0 - eta) * rep_sum / unseen_count + eta * ent
        score[seen] = -np.inf
        j = int(np.argmax(score))
        y = ctx.sample(j)
        ctx.buffer.add(j, y, ctx.frame)
        seen[j] = True
        rep_sum -= E[:, j]
        if model is not None:
            tracker.condition_on(j)
    return {"accepted": ctx.budget, "discarded": 0}


def _gsqbc_frame(strategy: GsQbcStrategy, ctx: FrameContext) -> dict:
    pts = ctx.grid.points
    n = len(ctx.grid)
    if len(ctx.buffer) == 0:
        means = np.zeros((1, n))
    else:
        means = []
        for name in ("main", "matern_1_5", "squared_exponential"):
            gp = ctx.models[name]
            means.append(gp.mean(gp.fit(ctx.buffer.cells, ctx.buffer.values), ctx.buffer.cells))
        means = np.array(means)
    f = means[0]
    disagree = means.max(axis=0) - means.min(axis=0)
    if len(ctx.buffer):
        Xb = pts[ctx.buffer.cells]
        yb = np.asarray(ctx.buffer.values)
        explore = (cdist(pts, Xb) * np.abs(f[:, None] - yb[None, :])).min(axis=1)
    else:
        explore = np.full(n, np.inf)
    picked = np.zeros(n, dtype=bool)
    eta = strategy.eta
    for _ in range(ctx.budget):
        if np.all(np.isinf(explore)):
            score = np.zeros(n)
        else:
            score = (1.0 - eta) * explore + eta * disagree
        score[picked] = -np.inf
        j = int(np.argmax(score))
        y = ctx.sample(j)
        ctx.buffer.add(j, y, ctx.frame)
        picked[j] = True
        explore = np.minimum(explore, np.linalg.norm(pts - pts[j], axis=1) * np.abs(f - y))
    return {"accepted": ctx.budget, "discarded": 0}
