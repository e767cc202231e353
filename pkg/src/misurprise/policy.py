"""Supervisory reaction policy: reflect on recent observations, then adjust, fork or merge.

Each frame every live sampling process is reflected on once. Reflection walks
the split point back from the newest observations (m = 2, 3, ...) and acts on
the first MIS bound violation that is not dominated by output entropy. The
reaction is chosen by a biased coin between nudging the strategy knob and
forking the process into pre- and post-surprise branches.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Literal

import numpy as np

from .engine import MisConfig, MisReport, ReactionDecision, classify, coin_toss, mis_bounds, mis_statistic
from .estimators import ContingencyTable, Discretizer
from .strategies import ObservationBuffer, Strategy, adjust, knob

ActionKind = Literal["none", "adjust_exploit", "adjust_explore", "fork", "merge"]

LOG_FIELDS = ("frame", "process_id", "action", "mis", "lower", "upper",
              "dH_x", "dH_y", "dH_ygx", "dominant", "m", "n", "p_adjust", "knob")


@dataclass(frozen=True)
class MisrpConfig:
    reflection_threshold: int = 20
    mis: MisConfig = MisConfig(regime="auto", x_cardinality=2500, y_cardinality=100)
    y_bins: int = 100
    suppress_frames: int = 2
    # "frozen": output bins fixed from the initial observations, later values clamp;
    # "buffer": bins span the process buffer at each reflection, shared by both sides
    y_range: Literal["frozen", "buffer"] = "frozen"

    def __post_init__(self):
        if self.reflection_threshold < 2:
            raise ValueError("reflection threshold T must be >= 2")
        if self.y_bins < 1:
            raise ValueError("y_bins must be positive")
        if self.suppress_frames < 0:
            raise ValueError("suppress_frames must be non-negative")
        if self.y_range not in ("frozen", "buffer"):
            raise ValueError(f"unknown y_range {self.y_range!r}")


@dataclass
class SamplingProcess:
    pid: int
    buffer: ObservationBuffer
    strategy: Strategy
    fork_status: Literal["main", "forked"] = "main"
    sibling: int | None = None
    pending_fork_request: bool = False
    suppressed_until: int = -1

    def __len__(self) -> int:
        return len(self.buffer)


@dataclass(frozen=True)
class Reflection:
    kind: Literal["none", "adjust_exploit", "adjust_explore", "fork"]
    report: MisReport | None = None
    decision: ReactionDecision | None = None
    evaluations: int = 0


def split_tables(x_cat: np.ndarray, y_cat: np.ndarray, n: int) -> tuple[ContingencyTable, ContingencyTable]:
    """Tables of the first n pairs and of all pairs, over categories seen in either."""
    _, xi = np.unique(x_cat, return_inverse=True)
    _, yi = np.unique(y_cat, return_inverse=True)
    xc, yc = int(xi.max()) + 1, int(yi.max()) + 1
    old = ContingencyTable.from_pairs(xi[:n], yi[:n], xc, yc)
    new = ContingencyTable.from_pairs(xi, yi, xc, yc)
    return old, new


def reflect_pairs(x_cat, y_values, cfg: MisrpConfig, rng: np.random.Generator,
                  discretizer: Discretizer | None = None) -> Reflection:
    """Run the reflection loop over ordered (x category, raw y) pairs.

    Without a ``discretizer`` the output bins span the range of all k values.
    Either way one binning is shared by both sides of every split.
    """
    x_cat = np.asarray(x_cat)
    y_values = np.asarray(y_values, dtype=float)
    k = x_cat.size
    if k != y_values.size:
        raise ValueError("x and y must have the same length")
    last = min(cfg.reflection_threshold, k // 2)
    if last < 2:
        return Reflection("none")
    d = discretizer or Discretizer.from_values(y_values, cfg.y_bins)
    y_cat = d.transform(y_values)
    evaluations = 0
    for m in range(2, last + 1):
        n = k - m
        old, new = split_tables(x_cat, y_cat, n)
        report = classify(mis_statistic(old, new), mis_bounds(n, m, cfg.mis))
        evaluations += 1
        if report.violation == "none" or report.dominant in ("output_entropy", "none"):
            continue
        decision = coin_toss(report.delta_h_x, report.delta_h_y_given_x, rng, report.violation)
        if decision.kind == "none":
            continue
        kind = {"sampling_adjust_exploit": "adjust_exploit",
                "sampling_adjust_explore": "adjust_explore", "fork": "fork"}[decision.kind]
        return Reflection(kind, report, decision, evaluations)
    return Reflection("none", evaluations=evaluations)


def combined_weights(m: int, n: int) -> tuple[float, float]:
    if m < 1 or n < 1:
        raise ValueError("both branches need at least one observation")
    a, b = math.sqrt(m), math.sqrt(n)
    wm = a / (a + b)
    return wm, 1.0 - wm


def combined_prediction(f_m, f_n, m: int, n: int, x):
    """Blend two branch predictors, each weighted by the square root of its data size."""
    wm, wn = combined_weights(m, n)
    return wm * f_m(x) + wn * f_n(x)


def fork(process: SamplingProcess, split_m: int, new_pid: int) -> tuple[SamplingProcess, SamplingProcess]:
    """Split into the older n observations (keeps the pid) and the newest m."""
    if process.fork_status == "forked":
        raise ValueError("a forked process cannot fork again")
    k = len(process.buffer)
    if not 1 <= split_m < k:
        raise ValueError(f"split m={split_m} must lie in [1, {k})")
    n = k - split_m
    p_n = SamplingProcess(process.pid, process.buffer.slice(0, n), process.strategy,
                          "forked", new_pid)
    p_m = SamplingProcess(new_pid, process.buffer.slice(n), process.strategy,
                          "forked", process.pid)
    return p_n, p_m


def split_budget(budget: int, sizes: tuple[int, int]) -> tuple[int, int]:
    """Half each; an odd unit goes to the branch holding more observations (first on ties)."""
    lo, hi = budget // 2, budget - budget // 2
    return (hi, lo) if sizes[0] >= sizes[1] else (lo, hi)


class ActionLog:
    def __init__(self):
        self.records: list[dict] = []

    def append(self, frame: int, pid: int, action: str, report: MisReport | None,
               p_adjust: float = math.nan, knob_value: float = math.nan) -> None:
        r = report
        self.records.append({
            "frame": frame, "process_id": pid, "action": action,
            "mis": r.mis if r else math.nan, "lower": r.lower if r else math.nan,
            "upper": r.upper if r else math.nan,
            "dH_x": r.delta_h_x if r else math.nan, "dH_y": r.delta_h_y if r else math.nan,
            "dH_ygx": r.delta_h_y_given_x if r else math.nan,
            "dominant": r.dominant if r else "none",
            "m": r.m if r else 0, "n": r.n if r else 0,
            "p_adjust": p_adjust, "knob": knob_value,
        })

    def __len__(self) -> int:
        return len(self.records)

    def count(self, start: int = 0, stop: int | None = None) -> int:
        return sum(1 for r in self.records
                   if r["frame"] >= start and (stop is None or r["frame"] < stop))

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=LOG_FIELDS)
            w.writeheader()
            for r in self.records:
                w.writerow({k: _fmt(v) for k, v in r.items()})
        return path


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return v


class MisrpSupervisor:
    """Owns the live processes (one, or a forked pair) of one experiment."""

    def __init__(self, root: SamplingProcess, cfg: MisrpConfig, rng: np.random.Generator,
                 x_category: Callable[[np.ndarray], np.ndarray] | None = None):
        self.cfg = cfg
        self.rng = rng
        self.x_category = x_category or (lambda cells: np.asarray(cells))
        self.processes: dict[int, SamplingProcess] = {root.pid: root}
        self.discretizer = None
        if cfg.y_range == "frozen" and len(root.buffer):
            self.discretizer = Discretizer.from_values(root.buffer.values, cfg.y_bins)
        self.log = ActionLog()
        self._next_pid = root.pid + 1
        self.evaluations = 0

    @property
    def live(self) -> list[SamplingProcess]:
        return [self.processes[p] for p in sorted(self.processes)]

    def reflect(self, process: SamplingProcess) -> Reflection:
        b = process.buffer
        if len(b) < 4:
            return Reflection("none")
        out = reflect_pairs(self.x_category(np.asarray(b.cells)), b.values, self.cfg, self.rng,
                            self.discretizer)
        self.evaluations += out.evaluations
        return out

    def step(self, frame: int) -> list[dict]:
        """Reflect every live process once and apply the resulting actions."""
        outcomes: dict[int, Reflection] = {}
        for p in self.live:
            p.pending_fork_request = False
            if frame <= p.suppressed_until:
                continue
            outcomes[p.pid] = self.reflect(p)
        start = len(self.log)
        for pid, o in outcomes.items():
            if o.kind.startswith("adjust"):
                p = self.processes[pid]
                p.strategy = adjust(p.strategy, "more_exploit" if o.kind == "adjust_exploit"
                                    else "more_explore")
                p.suppressed_until = frame + self.cfg.suppress_frames
                self.log.append(frame, pid, o.kind, o.report, o.decision.p_adjust,
                                knob(p.strategy))
            elif o.kind == "fork":
                self.processes[pid].pending_fork_request = True
        requesters = [p for p in self.live if p.pending_fork_request]
        if requesters:
            self._resolve_forks(frame, requesters, outcomes)
        self.check_invariants()
        return self.log.records[start:]

    def _resolve_forks(self, frame, requesters, outcomes):
        first = requesters[0]
        if first.fork_status == "main":
            o = outcomes[first.pid]
            p_n, p_m = fork(first, o.report.m, self._next_pid)
            self._next_pid += 1
            del self.processes[first.pid]
            self.processes[p_n.pid] = p_n
            self.processes[p_m.pid] = p_m
            self.log.append(frame, first.pid, "fork", o.report, o.decision.p_adjust,
                            knob(first.strategy))
            return
        if len(requesters) == 2:
            a, b = requesters
            # fewer observations loses; on a tie the younger branch goes
            loser = a if len(a) < len(b) else b
        else:
            loser = first
        survivor = self.processes[loser.sibling]
        del self.processes[loser.pid]
        survivor.fork_status = "main"
        survivor.sibling = None
        for p in requesters:
            o = outcomes[p.pid]
            self.log.append(frame, p.pid, "merge", o.report, o.decision.p_adjust,
                            knob(p.strategy))

    def check_invariants(self) -> None:
        live = self.live
        if len(live) > 2:
            raise AssertionError("more than two live sampling processes")
        if len(live) == 2:
            a, b = live
            if not (a.fork_status == b.fork_status == "forked"
                    and a.sibling == b.pid and b.sibling == a.pid):
                raise AssertionError("forked pair is not mutually linked")
        elif live[0].fork_status != "main" or live[0].sibling is not None:
            raise AssertionError("a lone process must be the main process")

    def budgets(self, budget: int) -> dict[int, int]:
        live = self.live
        if len(live) == 1:
            return {live[0].pid: budget}
        a, b = live
        ba, bb = split_budget(budget, (len(a), len(b)))
        return {a.pid: ba, b.pid: bb}

    def combine(self, predictions: dict[int, np.ndarray]) -> np.ndarray:
        live = self.live
        if len(live) == 1:
            return predictions[live[0].pid]
        a, b = live
        wa, wb = combined_weights(max(len(a), 1), max(len(b), 1))
        return wa * predictions[a.pid] + wb * predictions[b.pid]
