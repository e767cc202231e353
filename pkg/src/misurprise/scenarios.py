"""Modulus-system testbed comparing MIS against Shannon and postdictive surprise.

Every scenario starts from 100 integer inputs drawn uniformly from [0, 30]
and then appends one new observation per step under its own rule. The MIS
trace keeps n = 100 fixed and grows m with each step.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from .engine import MisConfig, classify, mis_bounds, mis_statistic
from .estimators import ContingencyTable
from .gp import KernelSpec, fit, posterior_after_observation
from .surprise import PredictiveGaussian, postdictive_surprise, shannon_surprise

TRACE_FIELDS = ("step", "mis", "lower", "upper", "shannon", "postdictive",
                "dH_x", "dH_y", "dH_ygx")


class ScenarioExhausted(RuntimeError):
    """No admissible input remains for a far-from-everything scenario."""


@dataclass(frozen=True)
class ModulusSystem:
    variant: Literal["standard", "shifted_region"] = "standard"
    noise_mode: Literal["none", "uniform_random_y"] = "none"
    shift_above: int = 30

    def __post_init__(self):
        if self.variant not in ("standard", "shifted_region"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.noise_mode not in ("none", "uniform_random_y"):
            raise ValueError(f"unknown noise mode {self.noise_mode!r}")

    def __call__(self, x: int, rng: np.random.Generator | None = None) -> int:
        if self.noise_mode == "uniform_random_y":
            if rng is None:
                raise ValueError("random outputs need an rng")
            return int(rng.integers(0, 10))
        y = int(x) % 10
        if self.variant == "shifted_region" and x > self.shift_above:
            y -= 10
        return y


STANDARD = ModulusSystem()


@dataclass(frozen=True)
class ScenarioSpec:
    id: int
    steps: int = 100
    initial_n: int = 100
    initial_range: tuple[int, int] = (0, 30)
    explore_range: tuple[int, int] = (30, 100)
    far_range: tuple[int, int] = (30, 500)
    far_margin: int = 1
    y_cardinality: int = 10
    x_categories: tuple[int, int] = (0, 500)

    def __post_init__(self):
        if self.id not in range(1, 7):
            raise ValueError(f"scenario id must be 1..6, got {self.id}")
        if self.steps < 1 or self.initial_n < 1:
            raise ValueError("steps and initial_n must be positive")

    @classmethod
    def of(cls, sid: int, **kw) -> "ScenarioSpec":
        if sid == 6:
            kw.setdefault("y_cardinality", 20)
        return cls(sid, **kw)

    @property
    def initial_system(self) -> ModulusSystem:
        return ModulusSystem(noise_mode="uniform_random_y") if self.id == 5 else STANDARD

    @property
    def new_system(self) -> ModulusSystem:
        if self.id == 3:
            return ModulusSystem(noise_mode="uniform_random_y")
        if self.id == 6:
            return ModulusSystem(variant="shifted_region")
        return STANDARD


@dataclass
class ScenarioState:
    xs: list = field(default_factory=list)
    ys: list = field(default_factory=list)


def initial_sample(spec: ScenarioSpec, rng: np.random.Generator) -> ScenarioState:
    lo, hi = spec.initial_range
    sys = spec.initial_system
    xs = [int(x) for x in rng.integers(lo, hi + 1, size=spec.initial_n)]
    return ScenarioState(xs, [sys(x, rng) for x in xs])


def generate(spec: ScenarioSpec, step: int, state: ScenarioState,
             rng: np.random.Generator) -> tuple[int, int]:
    """Next (x, y) under the scenario rule; does not modify ``state``."""
    if not 0 <= step < spec.steps:
        raise ValueError(f"step {step} outside scenario length {spec.steps}")
    sid = spec.id
    if sid == 2:
        return 7, 7
    if sid == 5:
        lo, hi = spec.initial_range
        x = int(rng.integers(lo, hi + 1))
        return x, STANDARD(x)
    if sid == 4:
        lo, hi = spec.far_range
        cand = np.arange(lo, hi + 1)
        seen = np.asarray(state.xs)
        ok = np.ones(cand.size, dtype=bool)
        if seen.size:
            near = np.abs(cand[:, None] - seen[None, :]) <= spec.far_margin
            ok = ~near.any(axis=1)
        if not ok.any():
            raise ScenarioExhausted(
                f"scenario 4 ran out of inputs in [{lo}, {hi}] farther than "
                f"{spec.far_margin} from all {seen.size} observed points at step {step}")
        x = int(rng.choice(cand[ok]))
        return x, STANDARD(x)
    lo, hi = spec.explore_range
    x = int(rng.integers(lo, hi + 1))
    return x, spec.new_system(x, rng)


def _table(xs, ys, spec: ScenarioSpec, y_offset: int) -> ContingencyTable:
    x0, x1 = spec.x_categories
    ya = np.asarray(ys) + y_offset
    return ContingencyTable.from_pairs(np.asarray(xs) - x0, ya, x1 - x0 + 1, spec.y_cardinality)


def _surprises(xs, ys, x_new, y_new, noise, length_scale) -> tuple[float, float]:
    X = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    v = float(np.var(y))
    model = fit(X, y, KernelSpec("matern_2_5", length_scale, v if v > 1e-12 else 1.0), noise)
    m, lv = model.latent(np.array([[float(x_new)]]))
    m, lv = float(m[0]), float(lv[0])
    prior = PredictiveGaussian(m, lv + noise)
    pm, pv = posterior_after_observation(m, lv, noise, float(y_new))
    return (shannon_surprise(prior, float(y_new)),
            postdictive_surprise(prior, PredictiveGaussian(pm, pv + noise)))


def run_comparison(spec: ScenarioSpec, seed: int = 0, surprises: bool = True,
                   mis_cfg: MisConfig | None = None, gp_noise: float = 0.1,
                   length_scale: float = 3.0) -> list[dict]:
    """Per-step trace of MIS with its bounds and the two classical surprises.

    Shannon surprise is in nats here. The GP is refit on all data before each
    new observation is scored.
    """
    mis_cfg = mis_cfg or MisConfig(regime="oversampled", y_cardinality=spec.y_cardinality)
    rng = np.random.default_rng(seed)
    state = initial_sample(spec, rng)
    # shift negative outputs of the shifted system into table columns
    y_offset = 10 if spec.y_cardinality == 20 else 0
    old = _table(state.xs, state.ys, spec, y_offset)
    rows = []
    for step in range(spec.steps):
        x, y = generate(spec, step, state, rng)
        sh = pd = math.nan
        if surprises:
            sh, pd = _surprises(state.xs, state.ys, x, y, gp_noise, length_scale)
        state.xs.append(x)
        state.ys.append(y)
        new = _table(state.xs, state.ys, spec, y_offset)
        rep = mis_statistic(old, new)
        lo = hi = math.nan
        if rep.m >= 2:
            rep = classify(rep, mis_bounds(rep.n, rep.m, mis_cfg))
            lo, hi = rep.lower, rep.upper
        rows.append({"step": rep.m, "mis": rep.mis, "lower": lo, "upper": hi,
                     "shannon": sh, "postdictive": pd, "dH_x": rep.delta_h_x,
                     "dH_y": rep.delta_h_y, "dH_ygx": rep.delta_h_y_given_x,
                     "violation": rep.violation})
    return rows


def longest_run(trace, kind: str) -> int:
    best = cur = 0
    for r in trace:
        cur = cur + 1 if r["violation"] == kind else 0
        best = max(best, cur)
    return best


def direction(trace, sustained: int = 5) -> str:
    """'below', 'above' or 'none'; a side counts once it is violated for ``sustained`` steps."""
    b, a = longest_run(trace, "below"), longest_run(trace, "above")
    if max(a, b) < sustained:
        return "none"
    return "below" if b >= a else "above"


def write_trace_csv(trace, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(TRACE_FIELDS)
        for r in trace:
            w.writerow([r[k] if k == "step" else repr(float(r[k])) for k in TRACE_FIELDS])
    return path
