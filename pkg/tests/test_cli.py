import csv
import json

import pytest

from oids.cli import (
    ConfigError,
    ExperimentConfig,
    main,
    replicate_revelatory,
    replicate_sparse,
)
from oids.harness import derive_seeds

MINIMAL = {
    "name": "tiny",
    "env": {"kind": "revelatory_zero", "K": 3, "delta": 0.1},
    "algos": [{"kind": "voids"}, {"kind": "uniform"}],
    "T": 20,
    "reps": 3,
}


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def run_config(tmp_path, doc, *extra):
    out = tmp_path / "out"
    doc = {**doc, "output_dir": str(out)}
    return main(["run", "--config", str(write_config(tmp_path, doc)), *extra]), out / doc["name"]


class TestValidation:
    def test_missing_T(self, tmp_path, capsys):
        doc = {k: v for k, v in MINIMAL.items() if k != "T"}
        assert main(["run", "--config", str(write_config(tmp_path, doc))]) == 2
        assert "'T' is a required property" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path, capsys):
        assert main(["run", "--config", str(write_config(tmp_path, {**MINIMAL, "colour": 1}))]) == 2
        assert "colour" in capsys.readouterr().err

    def test_field_level_message(self, tmp_path, capsys):
        doc = {**MINIMAL, "algos": [{"kind": "voids", "eta": "big"}]}
        assert main(["run", "--config", str(write_config(tmp_path, doc))]) == 2
        assert "algos/0/eta" in capsys.readouterr().err

    def test_semantic_errors(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({**MINIMAL, "algos": [{"kind": "voids", "eta": 0.7}]})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({**MINIMAL, "env": {"kind": "sparse_linear"}})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({**MINIMAL, "algos": [{"kind": "voids"}, {"kind": "voids"}]})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({**MINIMAL, "bounds": ["first_order"]})

    def test_missing_file_and_bad_json(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["run", "--config", str(bad)]) == 2

    def test_bad_arguments(self):
        assert main(["replicate", "maze"]) == 2
        assert main([]) == 2


class TestConfig:
    def test_round_trip(self):
        cfg = ExperimentConfig.from_dict({**MINIMAL, "bounds": ["worst_case"], "output_dir": "x"})
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
        assert ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))).to_dict() == cfg.to_dict()

    def test_seed_override_replaces_only_base_seed(self):
        cfg = ExperimentConfig.from_dict(MINIMAL)
        new = cfg.with_seed(99)
        assert new.base_seed == 99
        assert {**new.to_dict(), "base_seed": 0} == cfg.to_dict()
        assert cfg.with_seed(None) is cfg

    def test_output_dir_fallback(self, monkeypatch, tmp_path):
        cfg = ExperimentConfig.from_dict(MINIMAL)
        monkeypatch.setenv("OIDS_OUTPUT_DIR", str(tmp_path / "env"))
        assert cfg.resolve_output_dir() == tmp_path / "env"
        explicit = ExperimentConfig.from_dict({**MINIMAL, "output_dir": str(tmp_path / "cfg")})
        assert explicit.resolve_output_dir() == tmp_path / "cfg"


class TestRun:
    def test_minimal_config(self, tmp_path):
        code, out = run_config(tmp_path, MINIMAL)
        assert code == 0
        doc = json.loads((out / "voids.summary.json").read_text())
        assert doc["T"] == 20 and doc["reps"] == 3 and doc["algorithm"] == "voids"
        assert (out / "uniform.csv").exists() and (out / "config.json").exists()
        with open(out / "voids.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 60
        assert [int(r["seed"]) for r in rows[::20]] == derive_seeds(0, 3)

    def test_rerun_is_identical(self, tmp_path):
        _, out = run_config(tmp_path, MINIMAL)
        first = {p.name: p.read_bytes() for p in out.iterdir()}
        _, out = run_config(tmp_path, MINIMAL)
        assert {p.name: p.read_bytes() for p in out.iterdir()} == first

    def test_seed_override_changes_seeds(self, tmp_path):
        _, out = run_config(tmp_path, MINIMAL, "--seed-override", "7")
        doc = json.loads((out / "config.json").read_text())
        assert doc["base_seed"] == 7
        with open(out / "voids.csv", newline="") as fh:
            assert int(next(csv.DictReader(fh))["seed"]) == derive_seeds(7, 1)[0]

    def test_env_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("OIDS_OUTPUT_DIR", str(tmp_path / "envout"))
        assert main(["run", "--config", str(write_config(tmp_path, MINIMAL))]) == 0
        assert (tmp_path / "envout" / "tiny" / "voids.summary.json").exists()

    def test_diagnostics_columns(self, tmp_path):
        _, out = run_config(tmp_path, {**MINIMAL, "diagnostics": True})
        header = (out / "voids.csv").read_text().splitlines()[0]
        assert header.endswith("ir,adec,sig,tig,ue,og,posterior_entropy")

    def test_bounds_in_summary(self, tmp_path):
        _, out = run_config(tmp_path, {**MINIMAL, "bounds": ["worst_case", "subgaussian"]})
        bounds = json.loads((out / "voids.summary.json").read_text())["bounds"]
        assert [b["tag"] for b in bounds] == ["worst_case", "subgaussian"]
        assert all(b["satisfied"] for b in bounds)


class TestExportPlot:
    def test_schema(self, tmp_path):
        _, out = run_config(tmp_path, MINIMAL)
        assert main(["export-plot", str(out)]) == 0
        with open(out / "plot.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == ["algorithm", "t", "mean_cum_regret", "stderr"]
        assert {r["algorithm"] for r in rows} == {"voids", "uniform"}
        assert len(rows) == 40

    def test_matches_summary(self, tmp_path):
        _, out = run_config(tmp_path, MINIMAL)
        main(["export-plot", str(out)])
        with open(out / "plot.csv", newline="") as fh:
            last = [r for r in csv.DictReader(fh) if r["algorithm"] == "voids"][-1]
        doc = json.loads((out / "voids.summary.json").read_text())
        assert float(last["mean_cum_regret"]) == pytest.approx(doc["mean_final_regret"], rel=1e-12)

    def test_idempotent_and_empty_dir(self, tmp_path):
        _, out = run_config(tmp_path, MINIMAL)
        main(["export-plot", str(out)])
        first = (out / "plot.csv").read_bytes()
        main(["export-plot", str(out)])
        assert (out / "plot.csv").read_bytes() == first
        (tmp_path / "empty").mkdir()
        assert main(["export-plot", str(tmp_path / "empty")]) == 2


class TestCheckBounds:
    def test_satisfied(self, tmp_path, capsys):
        _, out = run_config(tmp_path, MINIMAL)
        assert main(["check-bounds", str(out), "--k", "3", "--n", "3"]) == 0
        assert "VIOLATED" not in capsys.readouterr().out

    def test_first_order_needs_lstar(self, tmp_path):
        _, out = run_config(tmp_path, MINIMAL)
        assert main(["check-bounds", str(out), "--k", "3", "--n", "3", "--tags", "first_order"]) == 2
        assert main(["check-bounds", str(out), "--k", "3", "--n", "3", "--lstar", "8"]) == 0

    def test_violation_exit_code(self, tmp_path):
        d = tmp_path / "s"
        d.mkdir()
        (d / "a.summary.json").write_text(json.dumps(
            {"algorithm": "a", "instance": {}, "T": 10, "reps": 1, "mean_final_regret": 1e6,
             "stderr": 0.0, "bounds": []}))
        assert main(["check-bounds", str(d), "--k", "2", "--n", "2"]) == 1


class TestReplicate:
    def test_revealing(self, capsys):
        assert main(["replicate", "revealing"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 8 and "regret 0.875" in out

    def test_revealing_writes_traces(self, tmp_path):
        assert main(["replicate", "revealing", "--out", str(tmp_path)]) == 0
        assert len(list((tmp_path / "revealing").glob("*.csv"))) == 8

    def test_sparse_small(self):
        checks = replicate_sparse(d=4, reps=4)
        assert all(c.passed for c in checks)

    def test_revelatory_small(self):
        checks = replicate_revelatory(reps=40, T=200)
        assert [c.name.split()[-1] for c in checks] == ["voids", "roids"]
        assert all(c.passed for c in checks)
