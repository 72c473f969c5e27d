import json
import os
import subprocess
import sys

import pytest

from fracvoigt.cli import main
from fracvoigt.io import comparable_manifest, read_manifest, read_timeseries, sha256_file

from conftest import MINIMAL

EULER_SCAN = """
[solver]
nu = 0
alpha = 0.1
r = 0.9
N = 8
dt = 0.01
t_end = 0.2

[ic]
kind = abc_perturbed
eps = 0.1
seed = 0

[output]
sample_every = 1

[study]
parameter = alpha
values = 0.2 0.1 0.05 0.025
"""


def test_run_writes_outputs_to_configured_directory(write_config, tmp_path, capsys):
    out = tmp_path / "results"
    cfg = write_config(MINIMAL + f"\n[output]\ndirectory = {out}\nsample_every = 2\n")
    assert main(["run", "--config", cfg, "--set", "alpha=0.05"]) == 0
    assert sorted(os.listdir(out)) == ["final.ckpt", "final.ckpt.json", "manifest.json", "series.csv"]
    manifest = read_manifest(out / "manifest.json")
    assert manifest["status"] == "ok"
    assert manifest["config"]["solver"]["alpha"] == 0.05
    for name, digest in manifest["outputs"].items():
        assert sha256_file(out / name) == digest
    assert len(read_timeseries(out / "series.csv")) == 6
    assert "ok:" in capsys.readouterr().out


def test_manifests_identical_across_runs(write_config, tmp_path):
    cfg = write_config()
    for name in ("a", "b"):
        assert main(["run", "--config", cfg, "--out", str(tmp_path / name)]) == 0
    ma = read_manifest(tmp_path / "a" / "manifest.json")
    mb = read_manifest(tmp_path / "b" / "manifest.json")
    assert comparable_manifest(ma) == comparable_manifest(mb)


def test_resume_is_bitwise(write_config, tmp_path):
    cfg = write_config(MINIMAL.replace("t_end = 0.1", "t_end = 0.2"))
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "full"), "--set", "sample_every=5"]) == 0
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "half"), "--set", "sample_every=5",
                 "--set", "t_end=0.1"]) == 0
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "rest"), "--set", "sample_every=5",
                 "--resume", str(tmp_path / "half" / "final.ckpt")]) == 0
    full = (tmp_path / "full" / "final.ckpt").read_bytes()
    assert (tmp_path / "rest" / "final.ckpt").read_bytes() == full
    assert read_timeseries(tmp_path / "rest" / "series.csv")[-1] == read_timeseries(tmp_path / "full" / "series.csv")[-1]
    assert read_manifest(tmp_path / "rest" / "manifest.json")["resumed_from"]["step_index"] == 10


def test_intermediate_checkpoints(write_config, tmp_path):
    cfg = write_config()
    assert main(["run", "--config", cfg, "--out", str(tmp_path), "--set", "sample_every=2",
                 "--set", "checkpoint_every=4"]) == 0
    names = sorted(f for f in os.listdir(tmp_path) if f.startswith("checkpoint_"))
    assert names == ["checkpoint_00000004.ckpt", "checkpoint_00000004.ckpt.json",
                     "checkpoint_00000008.ckpt", "checkpoint_00000008.ckpt.json"]


def test_resume_rejects_mismatched_checkpoint(write_config, tmp_path):
    cfg = write_config()
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 0
    code = main(["run", "--config", cfg, "--out", str(tmp_path / "x"), "--set", "alpha=0.2",
                 "--resume", str(tmp_path / "final.ckpt")])
    assert code == 1


def test_exit_codes(write_config, tmp_path, capsys):
    assert main(["run", "--config", write_config(MINIMAL.replace("r = 1.0", "r = 0"))]) == 1
    assert "(0, 3/2]" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 3
    assert main(["run", "--config", write_config("[solver\n", name="broken.cfg")]) == 1
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"nope" * 40)
    assert main(["run", "--config", write_config(), "--out", str(tmp_path / "o"), "--resume", str(bad)]) == 3
    assert main(["info"]) == 1


def test_instability_exit_code(write_config, tmp_path):
    hot = MINIMAL.replace("seed = 1", "seed = 1\nenergy = 400\ndecay_s = 0").replace("dt = 0.01", "dt = 0.05")
    hot = hot.replace("t_end = 0.1", "t_end = 1.0")
    out = tmp_path / "hot"
    assert main(["run", "--config", write_config(hot), "--out", str(out), "--set", "nu=0.001"]) == 2
    assert read_manifest(out / "manifest.json")["status"] == "diverged"


def test_info_reports_regime(write_config, capsys):
    assert main(["info", "--config", write_config(), "--set", "nu=0", "--set", "r=0.7"]) == 0
    text = capsys.readouterr().out
    assert "regime: fEV" in text and "outside" in text and "warning:" in text
    assert main(["info", "--config", write_config(), "--set", "r=0.5"]) == 0
    text = capsys.readouterr().out
    assert "inside window fNSV r >= 1/2" in text and "warning:" not in text


def test_oracle_check(tmp_path, capsys):
    assert main(["oracle-check", "--seeds", "2", "--out", str(tmp_path)]) == 0
    assert "all comparisons pass" in capsys.readouterr().out
    table = json.loads((tmp_path / "oracle_check.json").read_text())
    assert table["passed"] and {row["N"] for row in table["checks"]} == {4, 8}


def test_blowup_command(write_config, tmp_path, capsys):
    assert main(["blowup", "--config", write_config(EULER_SCAN), "--out", str(tmp_path), "--workers", "1"]) == 0
    assert "consistent_with_regularity" in capsys.readouterr().out
    report = json.loads((tmp_path / "blowup.json").read_text())
    assert report["verdict"] == "consistent_with_regularity"


def test_convergence_command(write_config, tmp_path):
    cfg = write_config(EULER_SCAN.replace("kind = abc_perturbed\neps = 0.1\nseed = 0",
                                          "kind = random_smooth\nseed = 1\nenergy = 0.1"))
    assert main(["convergence", "--config", cfg, "--out", str(tmp_path), "--workers", "2"]) == 0
    result = json.loads((tmp_path / "convergence.json").read_text())
    assert result["parameter"] == "alpha" and result["monotone"]
    assert len(os.listdir(tmp_path / "series")) == 5
    manifest = read_manifest(tmp_path / "manifest.json")
    assert "series/reference.csv" in manifest["outputs"]


def test_viscosity_command(write_config, tmp_path):
    cfg = write_config(EULER_SCAN.replace("parameter = alpha", "parameter = nu")
                       .replace("0.2 0.1 0.05 0.025", "0.1 0.01 0.001"))
    assert main(["viscosity-limit", "--config", cfg, "--out", str(tmp_path), "--workers", "1"]) == 0
    result = json.loads((tmp_path / "convergence.json").read_text())
    assert result["primary_norm"] == "modified_squared"
    assert main(["convergence", "--config", cfg, "--out", str(tmp_path)]) == 1


def test_study_commands_need_values(write_config, tmp_path):
    assert main(["convergence", "--config", write_config(), "--out", str(tmp_path)]) == 1


def test_module_entry_point_and_log_env(write_config):
    env = dict(os.environ, FVGT_LOG="debug")
    proc = subprocess.run([sys.executable, "-m", "fracvoigt", "info", "--config", write_config()],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0 and "regime:" in proc.stdout
    env["FVGT_LOG"] = "chatty"
    proc = subprocess.run([sys.executable, "-m", "fracvoigt", "info", "--config", write_config()],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0 and "not recognized" in proc.stderr


@pytest.mark.parametrize("argv", [[], ["frobnicate"]])
def test_bad_subcommand(argv):
    assert main(argv) == 1


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "oracle-check" in capsys.readouterr().out
