import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from saddletrap import cli


def run(tmp_path, *args):
    return cli.main(["--out", str(tmp_path), *args])


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


class TestSimulate:
    def test_default_run(self, tmp_path):
        assert run(tmp_path, "simulate", "--eps", "0.1", "--t-end", "20") == cli.EXIT_OK
        rows = read_csv(tmp_path / "trajectory.csv")
        assert rows[0] == ["t", "x1", "x2", "v1", "v2", "u1", "u2"]
        first = [float(v) for v in rows[1]]
        assert first[:5] == [0.0, 1.0, 0.0, 0.0, 0.0]
        assert first[5] == pytest.approx(1 - 0.1**2 / 4)
        assert float(rows[-1][0]) == 20.0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["command"] == "simulate"
        assert manifest["config"]["epsilon"] == 0.1

    def test_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            assert run(d, "simulate", "--eps", "0.1", "--t-end", "30") == 0
        assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()

    def test_zero_state(self, tmp_path):
        run(tmp_path, "simulate", "--eps", "0.1", "--t-end", "5", "--initial", "0", "0", "0", "0")
        data = np.array(read_csv(tmp_path / "trajectory.csv")[1:], dtype=float)
        assert not data[:, 1:].any()

    def test_averaged_frame_has_no_guiding_center(self, tmp_path):
        run(tmp_path, "simulate", "--eps", "0.1", "--t-end", "5", "--frame", "averaged")
        rows = read_csv(tmp_path / "trajectory.csv")
        assert rows[1][5:] == ["", ""]

    def test_config_file_and_flag_precedence(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"epsilon": 0.2, "t_end": 3.0, "sample_every": 1}))
        run(tmp_path, "--config", str(cfg), "simulate", "--t-end", "2")
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["config"]["epsilon"] == 0.2
        assert manifest["config"]["t_end"] == 2.0

    @pytest.mark.parametrize("args", [
        ["simulate", "--eps", "1.2", "--t-end", "5"],
        ["simulate", "--eps", "0.1", "--t-end", "5", "--dt", "0.5"],
        ["simulate", "--t-end", "5"],
    ])
    def test_config_errors(self, tmp_path, args, capsys):
        assert run(tmp_path, *args) == cli.EXIT_CONFIG
        assert "saddletrap simulate" in capsys.readouterr().err

    def test_bad_config_file(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("[1, 2]")
        assert run(tmp_path, "--config", str(bad), "simulate") == cli.EXIT_CONFIG

    def test_plot(self, tmp_path):
        assert run(tmp_path, "--plot", "simulate", "--eps", "0.2", "--t-end", "5") == 0
        assert (tmp_path / "trajectory.png").read_bytes()[:4] == b"\x89PNG"


class TestVerify:
    def test_default(self, tmp_path, capsys):
        report = tmp_path / "r" / "report.json"
        assert run(tmp_path, "verify", "--report", str(report)) == cli.EXIT_OK
        out = capsys.readouterr().out
        assert "[PASS] B₁ = 0" in out and "[FAIL]" not in out
        data = json.loads(report.read_text())
        assert data["passed"]
        assert [o["feasible"] for o in data["obstructions"]] == [False, False]

    def test_tampered(self, tmp_path, capsys):
        assert run(tmp_path, "verify", "--tamper", "T2") == cli.EXIT_VERIFY
        assert "B₂ − T₂′ = avg(B₂)" in capsys.readouterr().err


class TestResidual:
    def test_slope(self, tmp_path):
        assert run(tmp_path, "residual", "--eps-list", "0.2,0.1,0.05,0.025") == 0
        rows = read_csv(tmp_path / "residual.csv")
        assert rows[0] == ["epsilon", "max_residual"] and len(rows) == 5
        data = json.loads((tmp_path / "residual.json").read_text())
        assert 3.6 <= data["fitted_slope"] <= 4.4

    @pytest.mark.parametrize("eps_list", ["0.1", "0.1,0.05", "0.1,0.1,0.05", "0.1,x,0.05"])
    def test_usage_errors(self, tmp_path, eps_list):
        assert run(tmp_path, "residual", "--eps-list", eps_list) == cli.EXIT_CONFIG


class TestStability:
    def test_threshold(self, tmp_path):
        assert run(tmp_path, "stability", "--eps-min", "0.8", "--eps-max", "1.2", "--n", "16") == 0
        data = json.loads((tmp_path / "stability.json").read_text())
        assert data["eps_critical"] == pytest.approx(1.0, abs=0.02)
        rows = read_csv(tmp_path / "stability.csv")
        assert rows[0] == ["epsilon", "max_multiplier_modulus", "stable"]
        assert rows[1][2] == "1" and rows[-1][2] == "0"

    def test_no_transition(self, tmp_path, capsys):
        code = run(tmp_path, "stability", "--eps-min", "0.05", "--eps-max", "0.2", "--n", "16")
        assert code == cli.EXIT_NO_TRANSITION
        assert "no transition" in capsys.readouterr().err


class TestPrecession:
    @pytest.mark.parametrize("eps, frame, sign", [
        ("0.1", "averaged", "prograde"),
        ("0.25", "full", "prograde"),
        ("0.1", "naive", "retrograde"),
    ])
    def test_sign(self, tmp_path, eps, frame, sign):
        assert run(tmp_path, "precession", "--eps", eps, "--frame", frame) == 0
        data = json.loads((tmp_path / "precession.json").read_text())
        assert data["sign"] == sign
        if frame != "naive":
            assert data["relative_error"] <= (0.02 if frame == "averaged" else 0.15)

    def test_missing_eps(self, tmp_path):
        assert run(tmp_path, "precession") == cli.EXIT_CONFIG


class TestSeedless:
    def test_guard_blocks_rng(self):
        with cli.no_rng():
            with pytest.raises(RuntimeError):
                np.random.default_rng(0)
        np.random.default_rng(0)

    def test_seedless_run(self, tmp_path):
        assert run(tmp_path, "--seedless", "simulate", "--eps", "0.1", "--t-end", "3") == 0
        assert json.loads((tmp_path / "manifest.json").read_text())["seedless"] is True


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "saddletrap", "--out", str(tmp_path), "simulate",
                           "--eps", "0.1", "--t-end", "2"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "trajectory.csv").exists()


def test_unknown_command(tmp_path):
    with pytest.raises(SystemExit) as info:
        run(tmp_path, "launch")
    assert info.value.code == 2
