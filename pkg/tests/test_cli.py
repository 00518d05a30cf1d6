import json

import numpy as np
import pytest

from spectralrefiner.cli import (
    DEFAULT_CONFIG,
    cmd_generate,
    cmd_schedule,
    config_hash,
    load_config,
    main,
)


def small_ks_config(tmp_path, **data_overrides):
    config = {
        "pde": "ks",
        "solver": {"points": 32, "domain_length": 32.0, "num_output_steps": 8, "warmup_time": 1.0},
        "data": {"num_trajectories": 6, "seed": 0, "split": [0.5, 0.25, 0.25]},
        "training": {"pairs_per_transition": 3, "ridge": 1e-8, "seed": 1},
        "eval": {"rollout_steps": 5, "seed": 2},
    }
    config["data"].update(data_overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path


class TestConfig:
    def test_defaults_validate(self):
        config = load_config(None, [])
        assert config["pde"] == "ks"
        assert config["schedule"]["num_steps"] == 3

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"pde": "ks", "surprise": 1}))
        from spectralrefiner.cli import CliError

        with pytest.raises(CliError, match="surprise") as excinfo:
            load_config(str(path), [])
        assert excinfo.value.kind == "config_schema"

    def test_set_overrides_win(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"pde": "ks", "schedule": {"sigma_b": 2.0}}))
        config = load_config(str(path), ["schedule.sigma_b=8", "schedule.direction=up"])
        assert config["schedule"]["sigma_b"] == 8
        assert config["schedule"]["direction"] == "up"

    def test_bad_override_value_rejected_by_schema(self):
        from spectralrefiner.cli import CliError

        with pytest.raises(CliError) as excinfo:
            load_config(None, ["schedule.direction=diagonal"])
        assert excinfo.value.kind == "config_schema"

    def test_hash_changes_with_any_parameter(self):
        base = load_config(None, [])
        changed = load_config(None, ["schedule.sigma_b=4.0"])
        assert config_hash(base) != config_hash(changed)
        assert config_hash(base) == config_hash(load_config(None, []))


class TestGenerate:
    def test_files_and_manifest(self, tmp_path):
        config = load_config(str(small_ks_config(tmp_path)), [])
        out = tmp_path / "data"
        manifest = cmd_generate(config, out, jobs=1)
        assert len(manifest["files"]) == 6
        for name in manifest["files"]:
            assert (out / name).exists()
        stored = json.loads((out / "manifest.json").read_text())
        assert stored["config_hash"] == config_hash(config)

    def test_rerun_byte_identical(self, tmp_path):
        config = load_config(str(small_ks_config(tmp_path)), [])
        out1, out2 = tmp_path / "d1", tmp_path / "d2"
        cmd_generate(config, out1, jobs=1)
        cmd_generate(config, out2, jobs=1)
        for name in json.loads((out1 / "manifest.json").read_text())["files"]:
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_parallel_jobs_match_serial(self, tmp_path):
        config = load_config(str(small_ks_config(tmp_path)), [])
        serial, parallel = tmp_path / "ser", tmp_path / "par"
        cmd_generate(config, serial, jobs=1)
        cmd_generate(config, parallel, jobs=2)
        for name in json.loads((serial / "manifest.json").read_text())["files"]:
            assert (serial / name).read_bytes() == (parallel / name).read_bytes()


class TestScheduleDump:
    def test_unblurred_dump_has_unit_blur_columns(self, tmp_path):
        config = load_config(None, ["schedule.direction=none"])
        path = cmd_schedule(config, tmp_path)
        lines = path.read_text().splitlines()
        header = lines[0].split(",")
        d_cols = [i for i, name in enumerate(header) if name.startswith("d_lam")]
        assert d_cols
        for line in lines[1:]:
            cells = line.split(",")
            for i in d_cols:
                assert float(cells[i]) == 1.0

    def test_columns(self, tmp_path):
        config = load_config(None, [])
        path = cmd_schedule(config, tmp_path)
        header = path.read_text().splitlines()[0].split(",")
        for name in ("k", "t", "alpha", "sigma", "tau"):
            assert name in header


class TestPipeline:
    def test_full_pipeline_end_to_end(self, tmp_path):
        config_path = small_ks_config(tmp_path)
        data = tmp_path / "data"
        out = tmp_path / "run"
        assert main(["--config", str(config_path), "--out", str(data), "generate"]) == 0
        assert main(["--config", str(config_path), "--out", str(out), "fit", "--data", str(data)]) == 0
        assert (out / "model.json").exists()
        summary = json.loads((out / "fit_summary.json").read_text())
        assert set(summary["loss_per_step"]) == {"0", "1", "2", "3"}
        assert all(np.isfinite(v) for v in summary["loss_per_step"].values())

        assert main(["--config", str(config_path), "--out", str(out), "rollout", "--data", str(data)]) == 0
        rollout_manifest = json.loads((out / "rollout_manifest.json").read_text())
        assert rollout_manifest["files"]

        assert main(["--config", str(config_path), "--out", str(out), "eval", "--data", str(data)]) == 0
        metrics = (out / "metrics.csv").read_text().splitlines()
        assert metrics[0] == "metric,channel,step,value,seed,config_hash"
        doc = json.loads((out / "metrics.json").read_text())
        names = {row["metric"] for row in doc["metrics"]}
        assert {"one_step_mse", "unrolled_mse", "correlation_time", "step_mse", "correlation"} <= names
        assert doc["metadata"]["channel_groups"] == {"scalar_loss": ["u"], "vector_loss": []}

        assert main(["--config", str(config_path), "--out", str(out), "spectrum", "--data", str(data)]) == 0
        spectrum = (out / "spectrum.csv").read_text().splitlines()
        assert spectrum[0] == "metric,channel,step,value,seed,config_hash"
        assert any("spectrum_log_ratio" in line for line in spectrum[1:])

    def test_posterior_sampler_flag(self, tmp_path):
        config_path = small_ks_config(tmp_path)
        data = tmp_path / "data"
        out = tmp_path / "run"
        assert main(["--config", str(config_path), "--out", str(data), "generate"]) == 0
        assert main(["--config", str(config_path), "--out", str(out), "fit", "--data", str(data)]) == 0
        code = main([
            "--config", str(config_path), "--out", str(out),
            "--set", "eval.sampler=posterior", "eval", "--data", str(data),
        ])
        assert code == 0
        doc = json.loads((out / "metrics.json").read_text())
        assert doc["metadata"]["sampler"] == "posterior"

    def test_missing_data_gives_json_error(self, tmp_path, capsys):
        config_path = small_ks_config(tmp_path)
        code = main(["--config", str(config_path), "--out", str(tmp_path / "x"), "fit", "--data", str(tmp_path / "nope")])
        assert code == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"] == "missing_data"

    def test_empty_manifest_gives_error(self, tmp_path, capsys):
        config_path = small_ks_config(tmp_path)
        data = tmp_path / "data"
        data.mkdir()
        (data / "manifest.json").write_text(json.dumps({"files": []}))
        code = main(["--config", str(config_path), "--out", str(tmp_path / "x"), "fit", "--data", str(data)])
        assert code == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"] == "missing_data"

    def test_schema_violation_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"pde": "heat"}))
        code = main(["--config", str(bad), "--out", str(tmp_path), "schedule"])
        assert code == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"] == "config_schema"

    def test_console_entry_point(self, tmp_path):
        import subprocess
        import sys

        config_path = small_ks_config(tmp_path)
        result = subprocess.run(
            [sys.executable, "-m", "spectralrefiner.cli", "--config", str(config_path),
             "--out", str(tmp_path / "sched"), "schedule"],
            capture_output=True,
        )
        assert result.returncode == 0
        assert (tmp_path / "sched" / "schedule.csv").exists()
