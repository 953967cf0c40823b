import json

import numpy as np
import pytest

import lossfair.cli as cli_mod
from lossfair.cli import main
from lossfair.data import SplitSpec, split
from lossfair.harness import ExperimentConfig, SweepResult, save_model
from lossfair.metrics import BenefitKind
from lossfair.synthgen import SynthConfig, gen_sp_dataset
from lossfair.trainer import train_status_quo


def write_config(tmp_path, **overrides):
    doc = {
        "dataset": "synthetic-sp", "kind": "ar", "n": 700,
        "m_values": [1.0, 0.0], "seeds": [0],
        "output_dir": str(tmp_path / "out"),
    }
    doc.update(overrides)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return path


class TestGen:
    def test_writes_csv_and_schema(self, tmp_path, capsys):
        out = tmp_path / "d.csv"
        code = main(["gen", "--dataset", "sp", "--n", "300", "--seed", "5",
                     "--out", str(out)])
        assert code == 0
        assert out.exists()
        assert (tmp_path / "d.schema.json").exists()
        lines = out.read_text().splitlines()
        assert len(lines) == 301

    def test_eop_dataset(self, tmp_path):
        out = tmp_path / "e.csv"
        code = main(["gen", "--dataset", "eop", "--n", "400", "--seed", "0",
                     "--out", str(out)])
        assert code == 0
        assert len(out.read_text().splitlines()) == 401

    def test_bad_n_is_config_error(self, tmp_path):
        code = main(["gen", "--dataset", "sp", "--n", "0", "--seed", "0",
                     "--out", str(tmp_path / "d.csv")])
        assert code == 1

    def test_phi_rejected_for_eop(self, tmp_path):
        code = main(["gen", "--dataset", "eop", "--n", "100", "--seed", "0",
                     "--phi", "0.5", "--out", str(tmp_path / "d.csv")])
        assert code == 1


class TestRun:
    def test_sweep_from_config(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path)
        code = main(["run", "--config", str(cfg_path)])
        assert code == 0
        out_dir = tmp_path / "out"
        assert (out_dir / "records.csv").exists()
        assert (out_dir / "aggregates.csv").exists()
        assert (out_dir / "summary.json").exists()
        stdout = capsys.readouterr().out
        assert "records.csv" in stdout

    def test_output_dir_flag_overrides(self, tmp_path):
        cfg_path = write_config(tmp_path)
        other = tmp_path / "elsewhere"
        code = main(["run", "--config", str(cfg_path), "--output-dir", str(other)])
        assert code == 0
        assert (other / "records.csv").exists()

    def test_missing_output_dir_is_config_error(self, tmp_path, capsys):
        doc = {"dataset": "synthetic-sp", "kind": "ar", "n": 700,
               "m_values": [1.0], "seeds": [0]}
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(doc))
        code = main(["run", "--config", str(cfg_path)])
        assert code == 1

    def test_config_error_exit(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path, seeds=[])
        code = main(["run", "--config", str(cfg_path)])
        assert code == 1
        assert "error" in capsys.readouterr().err.lower()

    def test_data_error_exit(self, tmp_path):
        bad_csv = tmp_path / "bad.csv"
        bad_csv.write_text("x,z,y\n")
        schema = tmp_path / "s.json"
        schema.write_text(json.dumps({
            "label": "y", "sensitive": "z",
            "numeric": ["x"], "categorical": [],
        }))
        cfg_path = write_config(tmp_path, dataset="csv",
                                csv_path=str(bad_csv), schema=str(schema))
        code = main(["run", "--config", str(cfg_path)])
        assert code == 2

    def test_all_failed_exit(self, tmp_path, monkeypatch, capsys):
        def fake_run(cfg):
            return SweepResult(cfg, (), (), (), {})

        monkeypatch.setattr(cli_mod, "run_experiment", fake_run)
        cfg_path = write_config(tmp_path)
        code = main(["run", "--config", str(cfg_path)])
        assert code == 3


class TestAudit:
    @pytest.fixture()
    def trained(self, tmp_path):
        ds = gen_sp_dataset(SynthConfig(700, seed=0))
        train, _, test = split(ds, SplitSpec(seed=0))
        sqo = train_status_quo(train, 1e-3)
        from lossfair.data import export_csv

        data_path = tmp_path / "test.csv"
        export_csv(test, data_path)
        from lossfair.data import roundtrip_schema

        schema_path = tmp_path / "test.schema.json"
        roundtrip_schema(test).to_file(schema_path)
        model_path = tmp_path / "model.txt"
        save_model(sqo.model, model_path, "candidate")
        sqo_path = tmp_path / "sqo.txt"
        save_model(sqo.model, sqo_path, "status-quo")
        return data_path, schema_path, model_path, sqo_path

    def test_report_structure(self, trained, capsys):
        data_path, schema_path, model_path, sqo_path = trained
        code = main(["audit", "--model", str(model_path), "--sqo", str(sqo_path),
                     "--data", str(data_path), "--schema", str(schema_path)])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["model_tag"] == "candidate"
        assert report["sqo_tag"] == "status-quo"
        for kind in ("acceptance-rate", "true-positive-rate"):
            block = report["benefits"][kind]
            assert set(block["model"]) == {"z0", "z1", "disparity"}
            gains = report["loss_averse"][kind]
            for group in ("z0", "z1"):
                entry = gains[group]
                np.testing.assert_allclose(
                    entry["gain"],
                    entry["mean_distance"] - entry["sqo_mean_distance"],
                    atol=1e-12,
                )
        # identical models show zero gain
        assert abs(report["loss_averse"]["acceptance-rate"]["z0"]["gain"]) < 1e-12

    def test_dimension_mismatch_is_data_error(self, trained, tmp_path):
        data_path, schema_path, _, sqo_path = trained
        from lossfair.metrics import LinearModel

        short = tmp_path / "short.txt"
        save_model(LinearModel(np.ones(2)), short, "short")
        code = main(["audit", "--model", str(short), "--sqo", str(sqo_path),
                     "--data", str(data_path), "--schema", str(schema_path)])
        assert code == 2

    def test_missing_model_is_data_error(self, trained, tmp_path):
        data_path, schema_path, model_path, _ = trained
        code = main(["audit", "--model", str(model_path),
                     "--sqo", str(tmp_path / "absent.txt"),
                     "--data", str(data_path), "--schema", str(schema_path)])
        assert code == 2


def test_no_command_shows_usage(capsys):
    with pytest.raises(SystemExit):
        main([])
