import csv
import json
from pathlib import Path

import numpy as np
import pytest

from laxtop.cli import main
from laxtop.config import ConfigError, parse_number, parse_scenario

SCEN = Path(__file__).resolve().parents[1] / "src" / "laxtop" / "scenarios"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, (json.loads(out.out) if out.out.strip() else None), out.err


class TestNumbers:
    @pytest.mark.parametrize("text, value", [
        ("-sqrt(3)", -np.sqrt(3)),
        ("0.1*sqrt(3)", 0.1 * np.sqrt(3)),
        ("1e-10", 1e-10),
        ("(1 + sqrt(2)) / 2", (1 + np.sqrt(2)) / 2),
        (3, 3.0),
    ])
    def test_values(self, text, value):
        assert parse_number(text) == value

    @pytest.mark.parametrize("text", ["__import__('os')", "sqrt(-1)", "2**3", "1/0", "abc", True, None])
    def test_rejects(self, text):
        with pytest.raises(ValueError):
            parse_number(text)


class TestConfig:
    def test_exact_sqrt_keeps_condition(self):
        sc = parse_scenario((SCEN / "apelrot_reference.yaml").read_text())
        assert sc.params.r_C[2] == -np.sqrt(3)
        assert sc.case == "apelrot" and sc.tol == 1e-12

    def test_line_diagnostics(self):
        text = "case: apelrot\nparams:\n  I: [3, 2, 1]\n  r_C: [1, 0, \"-sqrt(x)\"]\ninitial:\n  gamma: [0, 0, 1]\n"
        with pytest.raises(ConfigError) as err:
            parse_scenario(text, "s.yaml")
        assert err.value.line == 4
        assert err.value.field == "params.r_C[2]"
        assert "s.yaml:4" in str(err.value)

    def test_missing_field(self):
        with pytest.raises(ConfigError) as err:
            parse_scenario("case: apelrot\nparams:\n  I: [3, 2, 1]\n")
        assert err.value.field == "params.r_C"
        assert err.value.line == 2

    def test_condition_checked(self):
        text = "case: apelrot\nparams: {I: [3, 2, 1], r_C: [1, 0, -1.7]}\ninitial: {omega: [0, 0, 0], gamma: [0, 0, 1]}\n"
        with pytest.raises(ConfigError, match="violated"):
            parse_scenario(text)

    def test_unknown_case_and_yaml_error(self):
        with pytest.raises(ConfigError, match="unknown case"):
            parse_scenario("case: sphere\n")
        with pytest.raises(ConfigError) as err:
            parse_scenario("case: so4\nparams: [1, 2\n")
        assert err.value.line is not None

    def test_custom_nd(self):
        text = "case: custom-nd\nparams:\n  I: [1, 1, 2, 2]\n  X: {\"12\": 1, \"34\": 0.5}\ninitial: {random: true}\nseed: 3\n"
        sc = parse_scenario(text)
        assert sc.params.n == 4 and sc.params.X[2, 3] == 0.5
        with pytest.raises(ConfigError, match="pair key"):
            parse_scenario(text.replace('"34"', '"44"'))

    def test_overrides(self, monkeypatch):
        text = (SCEN / "so4_case.yaml").read_text()
        monkeypatch.setenv("LAXTOP_TOL", "1e-9")
        monkeypatch.setenv("LAXTOP_SEED", "7")
        sc = parse_scenario(text, overrides={"seed": 11})
        assert sc.tol == 1e-9 and sc.seed == 11
        base = parse_scenario(text)
        assert base.sha256 != sc.sha256


class TestCommands:
    def test_simulate(self, capsys, tmp_path):
        code, rep, _ = run(capsys, "simulate", "--config", str(SCEN / "apelrot_reference.yaml"),
                           "--out", str(tmp_path), "--cadence", "0.5")
        assert code == 0 and rep["ok"]
        rows = list(csv.reader(open(tmp_path / "trajectory.csv")))
        assert rows[0][0] == "t"
        t = [float(r[0]) for r in rows[1:]]
        assert len(t) == 101 and all(b > a for a, b in zip(t, t[1:]))
        assert len(rep["config_sha256"]) == 64 and rep["version"]

    def test_verify_lax(self, capsys, tmp_path):
        code, rep, _ = run(capsys, "verify-lax", "--config", str(SCEN / "apelrot_reference.yaml"), "--out", str(tmp_path))
        assert code == 0 and rep["results"]["lax_residual"] <= 1e-12

    def test_verify_lax_off_hypersurface(self, capsys, tmp_path):
        code, rep, _ = run(capsys, "verify-lax", "--config", str(SCEN / "apelrot_off_hypersurface.yaml"), "--out", str(tmp_path))
        assert code == 1 and not rep["ok"] and rep["failures"] == ["lax_residual"]
        assert json.loads((tmp_path / "report.json").read_text()) == rep

    def test_gyrostat(self, capsys, tmp_path):
        code, rep, _ = run(capsys, "verify-lax", "--config", str(SCEN / "gyrostat.yaml"), "--out", str(tmp_path))
        assert code == 0

    def test_spectral_drift(self, capsys, tmp_path):
        code, rep, _ = run(capsys, "spectral-drift", "--config", str(SCEN / "apelrot_reference.yaml"),
                           "--out", str(tmp_path), "--cadence", "0.1")
        assert code == 0
        assert rep["results"]["initial"]["A"] == pytest.approx(16.0)
        assert (tmp_path / "spectral.csv").exists()

    def test_reconstruct(self, capsys, tmp_path):
        code, rep, _ = run(capsys, "reconstruct", "--config", str(SCEN / "apelrot_reference.yaml"),
                           "--out", str(tmp_path), "--tol", "1e-12")
        assert code == 0 and rep["results"]["state_sup"] < 1e-4

    def test_so4_verify(self, capsys, tmp_path):
        code, rep, _ = run(capsys, "so4-verify", "--config", str(SCEN / "so4_case.yaml"), "--out", str(tmp_path))
        assert code == 0
        assert set(rep["results"]["drift"]) == {"J1", "J2", "J3", "J4", "F1", "F2", "F3", "F4"}

    def test_so4_negative_control(self, capsys, tmp_path):
        cfg = tmp_path / "neg.yaml"
        cfg.write_text((SCEN / "so4_case.yaml").read_text().replace("X34: 0.5}", "X34: 0.5, X13: 0.3}"))
        code, rep, _ = run(capsys, "so4-verify", "--config", str(cfg), "--out", str(tmp_path / "o"))
        assert code == 1 and "conservation_rel.F1" in rep["failures"]

    def test_classify(self, capsys, tmp_path):
        code, rep, _ = run(capsys, "classify", "--n", "3", "4", "--out", str(tmp_path))
        assert code == 0
        assert rep["results"]["4"]["families"] == ["lagrange", "so4_case", "symmetric"]
        census = json.loads((tmp_path / "census_n4.json").read_text())
        assert all(row["witness"] for row in census["rows"])

    def test_wrong_case_for_command(self, capsys, tmp_path):
        code, rep, err = run(capsys, "reconstruct", "--config", str(SCEN / "so4_case.yaml"), "--out", str(tmp_path))
        assert code == 2 and "config error" in err

    def test_config_error_exit(self, capsys, tmp_path):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("case: apelrot\nparams:\n  I: [3, 2, oops]\n")
        code, rep, err = run(capsys, "simulate", "--config", str(cfg), "--out", str(tmp_path / "o"))
        assert code == 2
        assert rep["error"]["line"] == 3 and rep["error"]["field"] == "params.I[2]"
        assert "bad.yaml:3" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "simulate", "--config", str(tmp_path / "nope.yaml"))
        assert code == 2

    def test_deterministic_reports(self, capsys, tmp_path):
        for d in ("a", "b"):
            run(capsys, "so4-verify", "--config", str(SCEN / "so4_case.yaml"), "--out", str(tmp_path / d), "--seed", "5")
        assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
        assert (tmp_path / "a" / "integrals.csv").read_bytes() == (tmp_path / "b" / "integrals.csv").read_bytes()

    def test_default_out_dir(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        code, rep, _ = run(capsys, "verify-lax", "--config", str(SCEN / "apelrot_reference.yaml"))
        assert code == 0
        assert (tmp_path / "laxtop-runs" / f"verify-lax-{rep['config_sha256'][:12]}" / "report.json").exists()
