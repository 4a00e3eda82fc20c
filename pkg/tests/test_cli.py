"""Tests for the ``apimex`` command line."""
import json
import subprocess
import sys

import pytest

from apimex.cli import main
from apimex.tableaux import builtin, parse_catalog

CONVERGE = """kind = converge
problem = linear_diffusion
eps2 = 1e-6
tableau = ARS222
sizes = 20, 40
t_end = 0.25
reference = fourier
rate_min = 1.5
"""


@pytest.fixture
def converge_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(CONVERGE)
    return path


def test_validate_builtin(capsys):
    assert main(["validate-tableau", "ARS222", "--check"]) == 0
    out = capsys.readouterr().out
    assert "class: ARS" in out
    assert "globally stiffly accurate: True" in out


def test_validate_catalog_output_parses(capsys):
    assert main(["validate-tableau", "BPR353", "--catalog"]) == 0
    out = capsys.readouterr().out
    text = out[out.index("name"):]
    (tab,) = parse_catalog(text)
    assert tab == builtin("BPR353")


def test_validate_higher_order_fails_with_check(capsys):
    assert main(["validate-tableau", "ARS222", "--order", "3", "--check"]) == 1
    assert main(["validate-tableau", "ARS222", "--order", "3"]) == 0


def test_validate_unknown_scheme(capsys):
    assert main(["validate-tableau", "NOPE"]) == 2
    assert "error" in capsys.readouterr().err


def test_converge_writes_outputs(converge_cfg, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["converge", str(converge_cfg), "-o", str(out), "--check"]) == 0
    printed = capsys.readouterr().out
    assert "PASS" in printed
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["outputs"]) == {"convergence.csv", "summary.txt"}
    assert manifest["passed"] is True


def test_check_flag_turns_failure_into_exit_one(tmp_path):
    cfg = tmp_path / "strict.cfg"
    cfg.write_text(CONVERGE.replace("rate_min = 1.5", "rate_min = 3.5"))
    assert main(["converge", str(cfg), "-o", str(tmp_path / "a"), "--check"]) == 1
    assert main(["converge", str(cfg), "-o", str(tmp_path / "b")]) == 0


def test_verb_and_kind_must_agree(converge_cfg, tmp_path, capsys):
    assert main(["stability", str(converge_cfg), "-o", str(tmp_path / "x")]) == 2
    assert "kind" in capsys.readouterr().err


def test_missing_or_broken_config(tmp_path, capsys):
    assert main(["run", str(tmp_path / "absent.cfg")]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("kind = converge\n")
    assert main(["run", str(bad)]) == 2
    assert "problem" in capsys.readouterr().err


def test_run_replays_a_manifest(converge_cfg, tmp_path):
    first = tmp_path / "first"
    second = tmp_path / "second"
    assert main(["run", str(converge_cfg), "-o", str(first)]) == 0
    assert main(["run", str(first / "manifest.json"), "-o", str(second)]) == 0
    assert (first / "convergence.csv").read_bytes() == (second / "convergence.csv").read_bytes()


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "apimex.cli", "validate-tableau", "SSP2_332"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert "class: A\n" in proc.stdout
