import json
from pathlib import Path

import jsonschema
import pandas as pd
import pytest

from algorithms.errors import ConfigError, DegenerateModelError, NumericalBreachError
from cli.config import load_config, load_schema, parse_sweep
from cli.main import exit_code_for, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(command, config, out, *extra):
    return main([command, "--config", str(CONFIGS / config), "--out", str(out), *extra])


class TestConstraintsCommand:
    def test_oscillator_report(self, tmp_path, capsys):
        assert run("constraints", "oscillator.json", tmp_path) == 0
        path = tmp_path / "constraints.json"
        assert str(path) in capsys.readouterr().out
        report = json.loads(path.read_text(encoding="utf-8"))
        jsonschema.validate(report, load_schema("constraints_report.schema.json"))
        assert report["schema_version"] == "1.0"
        assert len(report["secondaries"]) == 1
        assert report["second_class"] == [0, 1]
        assert len(report["blocks"]) == 1

    def test_free_particle_from_mass_matrix(self, tmp_path):
        assert run("constraints", "free_particle.json", tmp_path) == 0
        report = json.loads((tmp_path / "constraints.json").read_text(encoding="utf-8"))
        assert report["primaries"][0]["coeffs"] == [0, 0, 0, 1]
        assert report["first_class"] == []

    def test_inconsistent_dynamics(self, tmp_path, capsys):
        assert run("constraints", "failures/inconsistent.json", tmp_path) == 3
        assert "erro:" in capsys.readouterr().err
        assert not (tmp_path / "constraints.json").exists()

    def test_missing_section(self, tmp_path):
        assert run("constraints", "synthetic.json", tmp_path) == 2


class TestGammaCommand:
    def test_sweep_rows(self, tmp_path):
        assert run("gamma", "tau_sweep.json", tmp_path, "--jobs", "2") == 0
        table = pd.read_csv(tmp_path / "gamma.csv")
        assert len(table) == 10
        assert list(table["sweep_value"]) == [0.005, 0.01, 0.02, 0.03, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5]
        assert (table["g11_re"] >= 0).all()
        assert (table["g11_im"].abs() < 1e-15).all()

    def test_sweep_from_command_line(self, tmp_path):
        assert run("gamma", "oscillator.json", tmp_path, "--sweep", "kprime=0.0,0.05") == 0
        table = pd.read_csv(tmp_path / "gamma.csv")
        assert list(table["sweep_name"]) == ["kprime", "kprime"]
        assert table["g11_re"].iloc[0] == 0.0

    def test_bad_model(self, tmp_path):
        assert run("gamma", "failures/bad_model.json", tmp_path) == 2

    def test_bad_sweep(self, tmp_path):
        assert run("gamma", "oscillator.json", tmp_path, "--sweep", "omega=1,2") == 2


class TestCorrespondCommand:
    def test_synthetic_report(self, tmp_path):
        assert run("correspond", "synthetic.json", tmp_path) == 0
        report = json.loads((tmp_path / "correspondence.json").read_text(encoding="utf-8"))
        jsonschema.validate(report, load_schema("correspondence_report.schema.json"))
        assert report["mode"] == "synthetic"
        assert report["status"] == "ok"
        assert report["operator_gap"]["relative"] < 1e-9
        assert report["lindblad_identity"]["preferred"] == "1/(gamma11*eta)"

    def test_residual_sweep(self, tmp_path):
        assert run("correspond", "tau_sweep.json", tmp_path, "--fock-dim", "6", "--sweep", "tau=0.01,0.5") == 0
        table = pd.read_csv(tmp_path / "correspondence_sweep.csv")
        assert len(table) == 2
        assert set(table["status"]) == {"ok"}
        assert table["c5c6_minus_c7sq"].notna().all()
        assert (table["c5c6_minus_c7sq"] >= 0).all()


class TestDeterminism:
    @pytest.mark.parametrize(
        "command, config, extra, outputs",
        [
            ("constraints", "oscillator.json", (), ["constraints.json"]),
            ("gamma", "tau_sweep.json", ("--jobs", "2"), ["gamma.csv"]),
            ("correspond", "oscillator.json", ("--fock-dim", "6"), ["correspondence.json"]),
            ("evolve", "oscillator.json", ("--fock-dim", "6"), ["evolve.csv"]),
        ],
    )
    def test_reruns_are_byte_identical(self, tmp_path, command, config, extra, outputs):
        first, second = tmp_path / "a", tmp_path / "b"
        assert run(command, config, first, *extra) == 0
        assert run(command, config, second, *extra) == 0
        for name in outputs:
            assert (first / name).read_bytes() == (second / name).read_bytes()


class TestEvolveCommand:
    def test_comparison_table(self, tmp_path):
        assert run("evolve", "oscillator.json", tmp_path, "--fock-dim", "6") == 0
        table = pd.read_csv(tmp_path / "evolve.csv")
        assert len(table) == 201
        assert table["time"].iloc[-1] == pytest.approx(2.0)
        assert (table["trace"] - 1).abs().max() < 1e-9
        assert table["trace_distance"].iloc[0] == pytest.approx(0.0, abs=1e-12)
        assert "exact_n_mean" in table.columns

    def test_truncation_failure(self, tmp_path):
        assert run("evolve", "failures/truncation.json", tmp_path) == 4


class TestConfig:
    def test_overrides(self):
        config = load_config(CONFIGS / "oscillator.json", {"fock_dim": 8, "tau": 0.2, "interior_exclude": 1, "jobs": 3})
        assert config.params.fock_dims == (8, 8)
        assert config.params.tau == 0.2
        assert config.tolerances.interior_exclude == 1
        assert config.jobs == 3
        assert config.sweep_points() == [config.params]

    def test_parse_sweep(self):
        axis = parse_sweep("tau=0.1, 0.2")
        assert axis.name == "tau"
        assert axis.values == (0.1, 0.2)
        with pytest.raises(ConfigError):
            parse_sweep("tau=")
        with pytest.raises(ConfigError):
            parse_sweep("tau=a,b")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.json")

    def test_schema_violation(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"schema_version": "1.0", "model": {"k1": 1.0}}), encoding="utf-8")
        with pytest.raises(ConfigError, match="model"):
            load_config(path)

    def test_synthetic_requires_alpha(self, tmp_path):
        raw = json.loads((CONFIGS / "synthetic.json").read_text(encoding="utf-8"))
        del raw["correspondence"]["alpha"]
        path = tmp_path / "synthetic.json"
        path.write_text(json.dumps(raw), encoding="utf-8")
        with pytest.raises(ConfigError, match="alpha"):
            load_config(path)


def test_exit_codes_follow_class_hierarchy():
    assert exit_code_for(ConfigError("x")) == 2
    assert exit_code_for(DegenerateModelError("x")) == 3
    assert exit_code_for(NumericalBreachError("x")) == 4
    assert exit_code_for(RuntimeError("x")) is None
