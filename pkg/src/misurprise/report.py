"""Report emission: per-run CSVs, a vanilla-vs-governed summary and self-contained SVG charts.

CSV is the canonical output. Floats are written with ``repr`` so a re-run with
the same config and seeds reproduces every file byte for byte.
"""
from __future__ import annotations

import csv
import math
import re
from collections import defaultdict
from pathlib import Path

import numpy as np

from .config import STRATEGIES
from .harness import RunResult, StdCheckResult, moving_average, summarize

FRAME_FIELDS = ("frame", "mse", "mse_ma20", "knob", "processes", "samples", "actions")
SUMMARY_FIELDS = ("experiment", "strategy", "mode", "runs", "mean", "se_runs", "se_pooled")
RUN_NAME = re.compile(r"^(?P<experiment>[a-z_]+?)_(?P<strategy>sr_shannon|sr_postdictive|sce|gsqbc)"
                      r"_(?P<mode>vanilla|governed)_(?P<seed>\d+)\.csv$")
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _f(v) -> str:
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def mode_name(governed: bool) -> str:
    return "governed" if governed else "vanilla"


def run_stem(r: RunResult) -> str:
    c = r.config
    return f"{c.experiment}_{c.strategy}_{mode_name(c.governed)}_{r.seed}"


def ensure_dir(out) -> Path:
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as e:
        raise OSError(f"output directory {out} is not writable: {e}") from e
    return out


def write_run_csv(r: RunResult, out) -> Path:
    """Per-frame error series with the actions taken after each frame."""
    per_frame = defaultdict(list)
    for rec in r.actions.records:
        per_frame[rec["frame"]].append(rec["action"])
    ma = moving_average(r.mse)
    path = Path(out) / f"{run_stem(r)}.csv"
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(FRAME_FIELDS)
        for t in range(len(r.mse)):
            w.writerow([t, _f(r.mse[t]), _f(ma[t]), _f(r.knobs[t]), int(r.processes[t]),
                        int(r.samples[t]), ";".join(per_frame.get(t, []))])
    return path


def read_run_csv(path) -> np.ndarray:
    with Path(path).open(newline="") as f:
        return np.array([float(row["mse"]) for row in csv.DictReader(f)])


def summary_rows(results: list[RunResult]) -> list[dict]:
    groups = defaultdict(list)
    for r in results:
        c = r.config
        groups[(c.experiment, c.strategy, mode_name(c.governed))].append(r.mse)
    return [_summary_row(k, v) for k, v in sorted(groups.items(), key=lambda kv: _order(kv[0]))]


def _order(key):
    exp, strategy, mode = key
    return exp, STRATEGIES.index(strategy), mode != "vanilla"


def _summary_row(key, series) -> dict:
    s = summarize(series)
    return {"experiment": key[0], "strategy": key[1], "mode": key[2], **s}


def write_summary(rows: list[dict], out) -> Path:
    path = Path(out) / "summary.csv"
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(SUMMARY_FIELDS)
        for r in rows:
            w.writerow([r["experiment"], r["strategy"], r["mode"], r["runs"],
                        _f(r["mean"]), _f(r["se_runs"]), _f(r["se_pooled"])])
    return path


def summary_table(rows: list[dict]) -> str:
    """Strategies down, vanilla and governed across, cells ``mean ± pooled SE``."""
    cells = {(r["strategy"], r["mode"]): r for r in rows}
    lines = [f"{'strategy':<16}{'vanilla':>24}{'governed':>24}{'change':>10}"]
    for s in STRATEGIES:
        if not any((s, m) in cells for m in ("vanilla", "governed")):
            continue
        parts = []
        for m in ("vanilla", "governed"):
            r = cells.get((s, m))
            parts.append(f"{r['mean']:.4g} ± {r['se_pooled']:.3g}" if r else "-")
        v, g = cells.get((s, "vanilla")), cells.get((s, "governed"))
        change = f"{100 * (g['mean'] - v['mean']) / v['mean']:+.1f}%" if v and g else "-"
        lines.append(f"{s:<16}{parts[0]:>24}{parts[1]:>24}{change:>10}")
    return "\n".join(lines)


def line_chart(series: dict, path, band=None, title: str = "", xlabel: str = "frame",
               ylabel: str = "", marks=(), width: int = 720, height: int = 360) -> Path:
    """Polyline chart. ``band`` is an optional (lower, upper) pair shaded behind the lines;
    ``marks`` are x positions drawn as short ticks along the bottom edge."""
    named = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    if not named or all(v.size == 0 for v in named.values()):
        raise ValueError("nothing to plot")
    ys = [v[np.isfinite(v)] for v in named.values()]
    if band is not None:
        lo, hi = (np.asarray(b, dtype=float) for b in band)
        ys += [lo[np.isfinite(lo)], hi[np.isfinite(hi)]]
    allv = np.concatenate([y for y in ys if y.size]) if any(y.size for y in ys) else np.zeros(1)
    y0, y1 = float(allv.min()), float(allv.max())
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 1.0, y1 + 1.0
    n = max(v.size for v in named.values())
    L, R, T, B = 60, 20, 30, 40
    pw, ph = width - L - R, height - T - B

    def px(i):
        return L + pw * i / max(n - 1, 1)

    def py(v):
        return T + ph * (1.0 - (v - y0) / (y1 - y0))

    def poly(v, idx=None):
        idx = np.arange(v.size) if idx is None else idx
        return " ".join(f"{px(i):.2f},{py(y):.2f}" for i, y in zip(idx, v) if np.isfinite(y))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect x="{L}" y="{T}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>',
           f'<text x="{L}" y="18" font-size="13">{title}</text>',
           f'<text x="{L + pw / 2}" y="{height - 8}" text-anchor="middle">{xlabel}</text>',
           f'<text x="14" y="{T + ph / 2}" transform="rotate(-90 14 {T + ph / 2})" '
           f'text-anchor="middle">{ylabel}</text>',
           f'<text x="{L - 4}" y="{T + 4}" text-anchor="end">{y1:.3g}</text>',
           f'<text x="{L - 4}" y="{T + ph}" text-anchor="end">{y0:.3g}</text>',
           f'<text x="{L}" y="{T + ph + 14}">0</text>',
           f'<text x="{L + pw}" y="{T + ph + 14}" text-anchor="end">{n - 1}</text>']
    if band is not None:
        ok = np.flatnonzero(np.isfinite(lo) & np.isfinite(hi))
        if ok.size:
            pts = poly(hi[ok], ok) + " " + " ".join(
                f"{px(i):.2f},{py(lo[i]):.2f}" for i in ok[::-1])
            out.append(f'<polygon points="{pts}" fill="#bbbbbb" fill-opacity="0.5" stroke="none"/>')
    for k, (name, v) in enumerate(named.items()):
        c = PALETTE[k % len(PALETTE)]
        out.append(f'<polyline points="{poly(v)}" fill="none" stroke="{c}" stroke-width="1.2"/>')
        out.append(f'<text x="{L + pw - 4}" y="{T + 14 + 13 * k}" text-anchor="end" '
                   f'fill="{c}">{name}</text>')
    for m in marks:
        out.append(f'<line x1="{px(m):.2f}" y1="{T + ph}" x2="{px(m):.2f}" y2="{T + ph - 6}" '
                   f'stroke="#000"/>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path


def emit_report(results: list[RunResult], out) -> dict:
    """Write every run's CSVs and charts, then the summary. Returns written paths."""
    if not results:
        raise ValueError("no results to report")
    out = ensure_dir(out)
    written = {"runs": [], "actions": [], "plots": []}
    for r in results:
        written["runs"].append(write_run_csv(r, out))
        stem = run_stem(r)
        if r.config.governed:
            written["actions"].append(r.actions.write_csv(out / f"{stem}_actions.csv"))
        marks = sorted({rec["frame"] for rec in r.actions.records})
        written["plots"].append(line_chart(
            {"MSE": r.mse, "20-frame mean": moving_average(r.mse)}, out / f"{stem}.svg",
            title=stem, ylabel="MSE", marks=marks))
    rows = summary_rows(results)
    written["summary"] = write_summary(rows, out)
    written["table"] = out / "summary.txt"
    written["table"].write_text(summary_table(rows) + "\n")
    return written


def summary_from_dir(in_dir) -> list[dict]:
    """Rebuild the summary from per-run CSVs alone."""
    in_dir = Path(in_dir)
    if not in_dir.is_dir():
        raise FileNotFoundError(f"{in_dir} is not a directory")
    groups = defaultdict(list)
    for p in sorted(in_dir.iterdir()):
        m = RUN_NAME.match(p.name)
        if m:
            groups[(m["experiment"], m["strategy"], m["mode"])].append(
                (int(m["seed"]), read_run_csv(p)))
    if not groups:
        raise ValueError(f"no run CSVs found in {in_dir}")
    rows = []
    for key in sorted(groups, key=_order):
        series = [s for _, s in sorted(groups[key], key=lambda t: t[0])]
        rows.append(_summary_row(key, series))
    return rows


def comparison_chart(in_dir, out=None) -> list[Path]:
    """Mean 20-frame error per strategy, vanilla against governed."""
    in_dir = Path(in_dir)
    out = Path(out or in_dir)
    curves = defaultdict(list)
    for p in sorted(in_dir.iterdir()):
        m = RUN_NAME.match(p.name)
        if m:
            curves[(m["experiment"], m["strategy"], m["mode"])].append(read_run_csv(p))
    paths = []
    for exp, s in sorted({(e, s) for e, s, _ in curves}):
        ser = {}
        for mode in ("vanilla", "governed"):
            runs = curves.get((exp, s, mode))
            if runs and len({len(r) for r in runs}) == 1:
                ser[mode] = moving_average(np.mean(runs, axis=0))
        if ser:
            paths.append(line_chart(ser, out / f"{exp}_{s}_comparison.svg",
                                    title=f"{exp} {s}", ylabel="MSE (20-frame mean)"))
    return paths


def write_std_check(res: StdCheckResult, out) -> tuple[Path, Path]:
    out = ensure_dir(out)
    path = out / "std_check.csv"
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("n", "empirical_std", "bound"))
        for row in res.rows():
            w.writerow([row["n"], _f(row["empirical_std"]), _f(row["bound"])])
    svg = line_chart({"empirical std": res.empirical, "ln(n)/sqrt(n)": res.bound},
                     out / "std_check.svg", title="std of plug-in MI", xlabel="n index",
                     ylabel="nats")
    return path, svg


def write_scenario(trace: list[dict], scenario: int, seed: int, out) -> tuple[Path, Path]:
    from .scenarios import write_trace_csv
    out = ensure_dir(out)
    stem = f"synthetic_scenario{scenario}_{seed}"
    csv_path = write_trace_csv(trace, out / f"{stem}.csv")
    mis = [r["mis"] for r in trace]
    band = ([r["lower"] for r in trace], [r["upper"] for r in trace])
    svg = line_chart({"MIS": mis}, out / f"{stem}.svg", band=band,
                     title=f"scenario {scenario}, seed {seed}", xlabel="m", ylabel="nats")
    return csv_path, svg

