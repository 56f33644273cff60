import csv
import io
import json
import subprocess
import sys

import pytest

from marginfer.cli import EXIT_INPUT, EXIT_OK, main
from conftest import write_json


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out=out)
    return code, out.getvalue()


@pytest.fixture
def rules_file(data_dir):
    return data_dir / "example_rules.json"


@pytest.fixture
def evidence_file(data_dir):
    return data_dir / "example_evidence.json"


class TestInfer:
    def test_worked_example(self, rules_file, evidence_file):
        code, text = run("infer", rules_file, evidence_file)
        assert code == EXIT_OK
        doc = json.loads(text)
        assert doc["likelihoods"]["x"] == pytest.approx(0.125)
        assert sum(doc["posterior"].values()) == pytest.approx(1.0)

    def test_dump_system(self, rules_file, evidence_file):
        code, text = run("infer", rules_file, evidence_file, "--dump-system", "--format", "csv")
        assert code == EXIT_OK
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0] == ["C", "r1", "r2", "normalization"]
        C = [[float(v) for v in row[1:]] for row in rows[1:4]]
        assert C == [[4, 2, 4], [2, 2, 2], [4, 2, 8]]
        assert rows[5] == ["row", "b[x]", "b[xbar]", "w"]
        assert [float(r[-1]) for r in rows[6:9]] == [1.0, 1.0, 1.0]

    @pytest.mark.parametrize("fmt", ["json", "csv", "text"])
    def test_formats(self, rules_file, evidence_file, fmt):
        code, text = run("infer", rules_file, evidence_file, "--format", fmt)
        assert code == EXIT_OK
        assert "0.125" in text

    def test_clamp_flag(self, tmp_path):
        rules = write_json(tmp_path / "r.json", {
            "attributes": ["F1", "F2"], "classes": ["x", "xbar"], "priors": {"x": 0.5, "xbar": 0.5},
            "rules": [{"id": "a", "lhs": {"F1": True}, "marginals": {"x": 0.9, "xbar": 0.5}},
                      {"id": "b", "lhs": {"F2": True}, "marginals": {"x": 0.9, "xbar": 0.5}}]})
        ev = write_json(tmp_path / "e.json", {"F1": True, "F2": True})
        code, text = run("infer", rules, ev, "--clamp")
        assert code == EXIT_OK
        doc = json.loads(text)
        assert doc["likelihoods"]["x"] == pytest.approx(0.8)
        assert doc["diagnostics"]["nonnegativity"] == "violated"

    def test_malformed_rule_file(self, tmp_path, evidence_file, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"attributes": ["F1",\n  "F2" "F3"]}')
        code, _ = run("infer", bad, evidence_file)
        assert code == EXIT_INPUT
        assert "line 2" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, evidence_file):
        assert run("infer", tmp_path / "nope.json", evidence_file)[0] == EXIT_INPUT

    def test_partial_evidence(self, tmp_path, rules_file):
        ev = write_json(tmp_path / "e.json", {"F1": True})
        assert run("infer", rules_file, ev)[0] == EXIT_INPUT


class TestSwap:
    def test_scripted(self, rules_file, evidence_file, data_dir):
        code, text = run("swap", rules_file, evidence_file, data_dir / "example_swap.json",
                         "--verify")
        assert code == EXIT_OK
        steps = json.loads(text)
        assert steps[0]["rebuild_delta"] == pytest.approx(0.0, abs=1e-15)
        assert steps[0]["likelihoods"]["x"] == pytest.approx(0.125)
        assert all(s["rebuild_delta"] <= 1e-12 for s in steps)

    def test_normalization_row_rejected(self, rules_file, evidence_file, tmp_path, capsys):
        script = write_json(tmp_path / "s.json", [
            {"index": 2, "rule": {"id": "z", "lhs": {"F3": True}, "marginals": {"x": 0.5, "xbar": 0.5}}}])
        code, _ = run("swap", rules_file, evidence_file, script)
        assert code == EXIT_INPUT
        assert "normalization" in capsys.readouterr().err

    @pytest.mark.parametrize("fmt", ["csv", "text"])
    def test_tabular(self, rules_file, evidence_file, data_dir, fmt):
        code, text = run("swap", rules_file, evidence_file, data_dir / "example_swap.json",
                         "--format", fmt, "--verify")
        assert code == EXIT_OK
        assert "rebuild_delta" in text.splitlines()[0]


class TestOracleCheck:
    def test_default_shape(self):
        code, text = run("oracle-check", "--trials", "200")
        assert code == EXIT_OK
        assert json.loads(text)["passed"]

    def test_single_attribute(self):
        assert run("oracle-check", "--n-max", "1", "--trials", "50")[0] == EXIT_OK

    def test_duplicates(self):
        code, text = run("oracle-check", "--duplicates", "--trials", "200", "--format", "text")
        assert code == EXIT_OK
        assert text.startswith("PASS")


class TestExperimentCommands:
    def test_agreement_reproducible(self):
        a = run("study-agreement", "--lengths", "4,16", "--trials", "500", "--seed", "3")
        b = run("study-agreement", "--lengths", "4,16", "--trials", "500", "--seed", "3")
        assert a == b
        assert json.loads(a[1])["seed"] == 3

    def test_led_reproducible(self):
        a = run("bench-led", "--trials", "100", "--seed", "5", "--format", "csv")
        b = run("bench-led", "--trials", "100", "--seed", "5", "--format", "csv")
        assert a == b and a[0] == EXIT_OK

    def test_bad_lengths(self):
        with pytest.raises(SystemExit):
            run("study-agreement", "--lengths", "4,x")


class TestConfig:
    def test_config_file(self, tmp_path, rules_file, evidence_file):
        cfg = write_json(tmp_path / "c.json", {"format": "text", "seed": 4})
        code, text = run("--config", cfg, "infer", rules_file, evidence_file)
        assert code == EXIT_OK
        assert text.startswith("class")

    def test_flag_overrides_config(self, tmp_path, rules_file, evidence_file):
        cfg = write_json(tmp_path / "c.json", {"format": "text"})
        code, text = run("infer", rules_file, evidence_file, "--config", cfg, "--format", "json")
        assert json.loads(text)["likelihoods"]

    @pytest.mark.parametrize("doc", [{"sigma_tol": -1}, {"n_limit": 30}, {"bogus": 1}])
    def test_invalid_config(self, tmp_path, rules_file, evidence_file, doc):
        cfg = write_json(tmp_path / "c.json", doc)
        assert run("--config", cfg, "infer", rules_file, evidence_file)[0] == EXIT_INPUT


def test_console_entry_point(data_dir):
    proc = subprocess.run([sys.executable, "-m", "marginfer.cli", "infer",
                           str(data_dir / "example_rules.json"),
                           str(data_dir / "example_evidence.json"), "--format", "text"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "argmax" in proc.stdout
