from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

from warpflow import io
from warpflow.cli import main


def write_cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


@pytest.fixture
def hyper_cfg(tmp_path):
    return write_cfg(tmp_path, f"preset = hyperbolic\nM = 64\nt_end = 0.2\nrecord_every = 50\n"
                               f"out_dir = {tmp_path / 'out'}\n")


def test_run_writes_outputs(tmp_path, hyper_cfg, capsys):
    assert main(["run", "--config", hyper_cfg, "--c-bounds", "0.5,3"]) == 0
    out = tmp_path / "out"
    for name in ("series.csv", "diagnostics.json", "mass_series.csv", "states.csv", io.MANIFEST_NAME):
        assert (out / name).exists(), name
    man = io.load_manifest(out)
    assert man["status"] == "complete"
    assert io.verify_manifest(out) == []
    assert "all pass" in capsys.readouterr().out
    # invariants re-check on the stored states agrees
    assert main(["invariants", "--config", hyper_cfg, "--c-bounds", "0.5,3"]) == 0
    assert (out / "invariants.json").exists()


def test_run_is_byte_deterministic(tmp_path, hyper_cfg):
    digests = []
    for k in range(2):
        d = tmp_path / f"o{k}"
        assert main(["run", "--config", hyper_cfg, "--out-dir", str(d)]) == 0
        digests.append({p.name: io.sha256_file(p) for p in sorted(d.iterdir())
                        if p.name != io.MANIFEST_NAME})
    assert digests[0] == digests[1]


def test_out_dir_env(tmp_path, hyper_cfg, monkeypatch):
    monkeypatch.setenv(io.OUT_DIR_ENV, str(tmp_path / "env"))
    assert main(["run", "--config", hyper_cfg]) == 0
    assert (tmp_path / "env" / "series.csv").exists()


def test_forced_unstable_dt_exits_2(tmp_path, hyper_cfg):
    out = tmp_path / "blow"
    assert main(["run", "--config", hyper_cfg, "--out-dir", str(out), "--dt", "0.01"]) == 2
    man = io.load_manifest(out)
    assert man["status"] == "incomplete"
    assert "error" in man["notes"]
    assert (out / "states.csv").exists()
    assert io.verify_manifest(out) == []


@pytest.mark.parametrize("text", ["n = 1\n", "cfl = 0.9\n", "colour = blue\n"])
def test_config_errors_exit_1(tmp_path, text, capsys):
    assert main(["run", "--config", write_cfg(tmp_path, text)]) == 1
    assert "configuration error" in capsys.readouterr().err


def test_missing_config_and_bad_args(tmp_path):
    assert main(["run", "--config", str(tmp_path / "absent.cfg")]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["run"]) == 1


def test_bad_csv_exits_1(tmp_path):
    csv_path = tmp_path / "bad.csv"
    csv_path.write_text("x,phi,psi\n0,1,0.1\n")
    cfg = write_cfg(tmp_path, f"preset = from_csv\npsi_csv = {csv_path}\n")
    assert main(["run", "--config", cfg]) == 1


def test_invariants_without_stored_run(tmp_path, hyper_cfg):
    assert main(["invariants", "--config", hyper_cfg, "--out-dir", str(tmp_path / "empty")]) == 1


def test_presets_lists_formulas(capsys):
    assert main(["presets"]) == 0
    text = capsys.readouterr().out
    for name in ("hyperbolic", "flat", "scaled_hyperbolic", "perturbed_hyperbolic", "from_csv"):
        assert name in text


def test_residuals_small(tmp_path, capsys):
    cfg = write_cfg(tmp_path, f"preset = hyperbolic\nM = 64\nt_end = 0.3\nrecord_every = 1\n"
                              f"out_dir = {tmp_path / 'res'}\n")
    code = main(["residuals", "--config", cfg, "--targets", "3"])
    out = tmp_path / "res"
    rows = list(csv.DictReader(open(out / "orders.csv")))
    assert {r["verdict"] for r in rows} <= {"pass", "inconclusive", "discrepancy", "untested"}
    disc = list(csv.DictReader(open(out / "discrepancies.csv")))
    assert any(r["equation"] == "Vflow" for r in disc)
    assert io.verify_manifest(out) == []
    inconclusive = any(r["verdict"] == "inconclusive" for r in rows)
    assert code == (3 if inconclusive else 0)


def test_residuals_rejects_bad_grid(tmp_path):
    cfg = write_cfg(tmp_path, "M = 30\n")
    assert main(["residuals", "--config", cfg, "--out-dir", str(tmp_path / "r")]) == 1


def test_compare_modified_small(tmp_path, capsys):
    cfg = write_cfg(tmp_path, f"preset = hyperbolic\nM = 64\nt_end = 0.3\nrecord_every = 20\n"
                              f"out_dir = {tmp_path / 'cm'}\n")
    assert main(["compare-modified", "--config", cfg]) == 0
    text = capsys.readouterr().out
    assert "verified pair" in text and "printed pair" in text
    summary = json.loads((tmp_path / "cm" / "compare_modified.json").read_text())
    assert summary["chain_rule_residual"]["verified"] <= 1e-6
    assert summary["chain_rule_residual"]["printed"] > 0.1
    assert summary["max_relative_difference"] <= 1e-3


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "warpflow.cli", "presets"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "hyperbolic" in proc.stdout
