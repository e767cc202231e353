import csv

import pytest
import yaml

from misurprise.cli import main
from misurprise.config import from_dict
from misurprise.harness import run_single
from misurprise.report import (RUN_NAME, emit_report, line_chart, summary_from_dir, summary_rows,
                               summary_table)

SMALL = {"field": {"grid_size": 10, "n_frames": 30}, "memory_buffer": 60, "seeds": [0, 1]}


@pytest.fixture(scope="module")
def results():
    out = []
    for gov in (False, True):
        cfg = from_dict(dict(SMALL, strategy="sce", governed=gov))
        out += [run_single(cfg, s) for s in cfg.run_seeds]
    return out


def test_empty_results_rejected(tmp_path):
    with pytest.raises(ValueError):
        emit_report([], tmp_path)


def test_file_names(results, tmp_path):
    w = emit_report(results, tmp_path)
    names = sorted(p.name for p in w["runs"])
    assert names == ["pollution_sce_governed_0.csv", "pollution_sce_governed_1.csv",
                     "pollution_sce_vanilla_0.csv", "pollution_sce_vanilla_1.csv"]
    assert all(RUN_NAME.match(n) for n in names)
    assert len(w["actions"]) == 2
    assert all(p.read_text().startswith("<svg") for p in w["plots"])
    with w["runs"][0].open() as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 30 and rows[0]["mse_ma20"] == "nan" and rows[19]["mse_ma20"] != "nan"


def test_summary_recomputed_from_csvs(results, tmp_path):
    emit_report(results, tmp_path)
    direct = summary_rows(results)
    rebuilt = summary_from_dir(tmp_path)
    assert len(direct) == len(rebuilt) == 2
    for a, b in zip(direct, rebuilt):
        assert a == b


def test_summary_table_layout(results):
    text = summary_table(summary_rows(results))
    assert text.splitlines()[0].split() == ["strategy", "vanilla", "governed", "change"]
    assert "sce" in text and "±" in text


def test_report_byte_identical(tmp_path):
    cfg = from_dict(dict(SMALL, strategy="gsqbc", governed=True))
    for d in ("a", "b"):
        emit_report([run_single(cfg, s) for s in cfg.run_seeds], tmp_path / d)
    for p in sorted((tmp_path / "a").iterdir()):
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes(), p.name


def test_line_chart_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        line_chart({}, tmp_path / "x.svg")


def test_summary_from_missing_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        summary_from_dir(tmp_path / "nope")
    with pytest.raises(ValueError):
        summary_from_dir(tmp_path)


def _write_cfg(tmp_path, data):
    p = tmp_path / "cfg.yaml"
    p.write_text(yaml.safe_dump(data))
    return p


def test_cli_run_and_report(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, dict(SMALL, strategy="sr_shannon"))
    out = tmp_path / "res"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "config.yaml").exists() and (out / "summary.csv").exists()
    assert main(["run", "--config", str(cfg), "--seed", "7", "--out", str(tmp_path / "one")]) == 0
    assert (tmp_path / "one" / "pollution_sr_shannon_vanilla_7.csv").exists()
    assert main(["report", "--in", str(out)]) == 0
    assert "sr_shannon" in capsys.readouterr().out


def test_cli_synthetic(tmp_path):
    cfg = _write_cfg(tmp_path, {"experiment": "synthetic", "seeds": [0],
                                "synthetic": {"scenarios": [2], "steps": 10}})
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "synthetic_scenario2_0.csv").exists()


def test_cli_std_check(tmp_path):
    args = ["std-check", "--pmfs", "2", "--runs", "2", "--n-max", "100", "--out", str(tmp_path)]
    assert main(args) == 0
    rows = list(csv.DictReader((tmp_path / "std_check.csv").open()))
    assert float(rows[-1]["n"]) == 100


def test_cli_exit_codes(tmp_path, capsys):
    bad = _write_cfg(tmp_path, {"policy": {"rho": 2}})
    assert main(["run", "--config", str(bad)]) == 2
    assert "policy.rho" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.yaml")]) == 1
    assert main(["report", "--in", str(tmp_path / "missing")]) == 1
    blocker = tmp_path / "file"
    blocker.write_text("")
    good = _write_cfg(tmp_path, dict(SMALL, seeds=[0]))
    assert main(["run", "--config", str(good), "--out", str(blocker / "sub")]) == 1


def test_cli_parallel_matches_serial(tmp_path):
    cfg = _write_cfg(tmp_path, dict(SMALL, strategy="sce"))
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "s")])
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "p"), "--jobs", "2"])
    for name in ("pollution_sce_vanilla_0.csv", "pollution_sce_vanilla_1.csv", "summary.csv"):
        assert (tmp_path / "s" / name).read_bytes() == (tmp_path / "p" / name).read_bytes()
