import json
import subprocess
import sys

import numpy as np
import pytest

from screenvp.cli import (EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, load_config, read_frames, run_command,
                          trivial_suite, verify_manifest)
from screenvp.errors import ValidationError

SMALL = ["--nx", "16", "--nv", "128", "--dt", "0.1", "--t-end", "4", "--output-every", "5",
         "--eps0", "0.01"]


def manifest(d):
    return json.loads((d / "manifest.json").read_text())


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    assert run_command(["simulate", "--out", str(d)] + SMALL) == EXIT_OK
    return d


def test_selftest_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "screenvp", "selftest", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == EXIT_OK, res.stderr
    report = json.loads((tmp_path / "selftest.json").read_text())
    assert report and verify_manifest(tmp_path)


def test_trivial_suite_all_pass():
    checks = trivial_suite()
    assert len(checks) >= 10
    failed = [name for name, fn in checks if not fn()[0]]
    assert not failed, failed


@pytest.mark.slow
def test_penrose_maxwellian(tmp_path):
    assert run_command(["penrose", "--profile", "maxwellian", "--d", "1", "--out", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "penrose.json").read_text())
    assert rep["converged"] is True and rep["kappa_estimate"] > 0
    assert manifest(tmp_path)["status"] == "ok"


def test_invalid_a_exits_2(tmp_path, capsys):
    code = run_command(["simulate", "--a", "1.5", "--out", str(tmp_path)] + SMALL)
    assert code == EXIT_VALIDATION
    assert "a must lie in (0,1)" in capsys.readouterr().err
    assert manifest(tmp_path)["status"] == "validation_error"


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[run]\nnx = 16\nbogus_key = 3\n")
    code = run_command(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == EXIT_VALIDATION and "bogus_key" in capsys.readouterr().err


def test_load_config_coerces_types(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[run]\nnx = 16\ndt = 0.1\ncoupling = false\n[vlasov]\nenvelope = gaussian\n")
    rc, spec = load_config(cfg, {"t_end": 2.0, "nv": None})
    assert rc.nx == 16 and rc.dt == 0.1 and rc.coupling is False and rc.t_end == 2.0 and rc.nv == 256
    assert spec["envelope"] == "gaussian"
    cfg.write_text("[run]\nnx = sixteen\n")
    with pytest.raises(ValidationError):
        load_config(cfg, {})


def test_simulate_outputs_and_manifest(sim_dir):
    man = manifest(sim_dir)
    assert man["status"] == "ok" and man["command"] == "simulate"
    assert "fourier_convention" in man["config"] and "kernel_sign" in man["config"]
    names = {o["file"] for o in man["outputs"]}
    assert {"rho.bin", "rho.json", "E.bin", "diagnostics.csv", "run_summary.json"} <= names
    assert verify_manifest(sim_dir)
    rho, meta = read_frames(sim_dir / "rho")
    assert rho.shape == tuple(meta["shape"]) and rho.dtype == np.float64
    assert rho.shape == (len(meta["times"]), 16)


def test_manifest_detects_tampering(tmp_path, sim_dir):
    import shutil
    d = tmp_path / "copy"
    shutil.copytree(sim_dir, d)
    with open(d / "diagnostics.csv", "a") as fh:
        fh.write("\n")
    assert not verify_manifest(d)


def test_simulate_deterministic(tmp_path, sim_dir):
    assert run_command(["simulate", "--out", str(tmp_path)] + SMALL) == EXIT_OK
    for name in ("diagnostics.csv", "rho.bin", "E.bin"):
        assert (tmp_path / name).read_bytes() == (sim_dir / name).read_bytes()


def test_analyze_reproducible(tmp_path, sim_dir):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run_command(["analyze", str(sim_dir), "--out", str(d)]) == EXIT_OK
    for name in ("decay.json", "norms.csv", "bootstrap.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert verify_manifest(a)


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("SCREENVP_OUTPUT_DIR", str(tmp_path / "env_out"))
    assert run_command(["selftest"]) == EXIT_OK
    assert (tmp_path / "env_out" / "selftest.json").exists()


def test_truncation_breach_exits_3(tmp_path, capsys):
    code = run_command(["simulate", "--v-max", "3", "--nv", "64", "--nx", "16", "--dt", "0.1",
                        "--t-end", "2", "--out", str(tmp_path)])
    assert code == EXIT_NUMERICAL
    assert "boundary layer" in capsys.readouterr().err
    man = manifest(tmp_path)
    assert man["status"] == "numerical_error" and verify_manifest(tmp_path)


def test_bad_threads_exits_2(tmp_path):
    assert run_command(["selftest", "--threads", "0", "--out", str(tmp_path)]) == EXIT_VALIDATION
