"""Command line entry point: ``misurprise run|std-check|report``."""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ConfigError, ExperimentConfig, dump_config, load_config
from .harness import run_single, std_check
from .report import comparison_chart, emit_report, ensure_dir, summary_from_dir, summary_table, \
    write_scenario, write_std_check, write_summary
from .scenarios import ScenarioSpec, direction, run_comparison


def _run_pollution(cfg: ExperimentConfig, seeds, out: Path, jobs: int) -> str:
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(run_single, [cfg] * len(seeds), seeds))
    else:
        results = [run_single(cfg, s) for s in seeds]
    written = emit_report(results, out)
    return written["table"].read_text()


def _run_synthetic(cfg: ExperimentConfig, seeds, out: Path) -> str:
    s = cfg.synthetic
    lines = []
    for sid in s.scenarios:
        spec = ScenarioSpec.of(sid, steps=s.steps)
        dirs = []
        for seed in seeds:
            trace = run_comparison(spec, seed, gp_noise=s.gp_noise, length_scale=s.length_scale)
            write_scenario(trace, sid, seed, out)
            dirs.append(direction(trace))
        lines.append(f"scenario {sid}: " + " ".join(dirs))
    return "\n".join(lines)


def _run_std_check(cfg: ExperimentConfig, seed: int, out: Path) -> str:
    s = cfg.std_check
    res = std_check(s.n_pmfs, s.runs, s.n_max, s.support, s.n_points, seed)
    write_std_check(res, out)
    ok = all(e < b for n, e, b in zip(res.n, res.empirical, res.bound) if n >= 50)
    return f"std check: empirical below ln(n)/sqrt(n) for all n >= 50: {ok}"


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    seeds = (args.seed,) if args.seed is not None else cfg.run_seeds
    out = ensure_dir(args.out)
    (out / "config.yaml").write_text(dump_config(cfg))
    if cfg.experiment in ("pollution", "two_phase"):
        text = _run_pollution(cfg, seeds, out, args.jobs)
    elif cfg.experiment == "synthetic":
        text = _run_synthetic(cfg, seeds, out)
    else:
        text = _run_std_check(cfg, seeds[0], out)
    print(text)
    return 0


def cmd_std_check(args) -> int:
    res = std_check(args.pmfs, args.runs, args.n_max, seed=args.seed)
    path, _ = write_std_check(res, args.out)
    bad = [int(n) for n, e, b in zip(res.n, res.empirical, res.bound) if n >= 50 and e >= b]
    print(f"wrote {path}")
    print("empirical std below bound for all n >= 50" if not bad
          else f"empirical std reaches the bound at n = {bad}")
    return 0


def cmd_report(args) -> int:
    rows = summary_from_dir(args.in_dir)
    write_summary(rows, args.in_dir)
    comparison_chart(args.in_dir)
    print(summary_table(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="misurprise",
                                description="Mutual information surprise experiments")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment from a YAML config")
    r.add_argument("--config", required=True, type=Path)
    r.add_argument("--seed", type=int, default=None, help="run this single seed only")
    r.add_argument("--out", type=Path, default=Path("results"))
    r.add_argument("--jobs", type=int, default=1, help="parallel Monte Carlo runs")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("std-check", help="empirical std of plug-in MI against ln(n)/sqrt(n)")
    s.add_argument("--pmfs", type=int, default=100)
    s.add_argument("--runs", type=int, default=10)
    s.add_argument("--n-max", type=int, default=3000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", type=Path, default=Path("results"))
    s.set_defaults(func=cmd_std_check)

    rep = sub.add_parser("report", help="rebuild the summary table from run CSVs")
    rep.add_argument("--in", dest="in_dir", required=True, type=Path)
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError, FloatingPointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
