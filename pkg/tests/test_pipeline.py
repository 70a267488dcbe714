import dataclasses
import json

import numpy as np
import pytest
import yaml

from surfmap import config as config_mod
from surfmap.cli import EXIT_CONFIG, EXIT_DATA, EXIT_EMPTY, main
from surfmap.errors import ConfigError
from surfmap.geometry import build_local_frame, fit_plane_pca
from surfmap.grid import GridSpec, load_binary
from surfmap.masks import MaskSpec, make_mask
from surfmap.pipeline import bench_masked_update, run_mapping, write_update_log
from surfmap.simulator import (
    FlatSurface,
    MeasurementSample,
    NoiseModel,
    SensorRig,
    TrajectoryPlan,
    simulate_scan,
    write_samples,
)


def small_cfg(**overrides):
    base = dict(
        grid=GridSpec(90.0, 150.0, 95.0, 115.0, 30, 10),
        surface_model="flat",
        surface_params={"z0": 5.0},
        plan=TrajectoryPlan(lines=2, area=(100.0, 140.0, 100.0, 110.0),
                            z_const=70.0),
        noise=NoiseModel(quantum=0.0, bias_amplitude=0.0, white_sigma=0.0),
    )
    base.update(overrides)
    return config_mod.RunConfig(**base)


def small_samples(cfg):
    return simulate_scan(cfg.make_surface(), cfg.rig, cfg.plan, cfg.noise)


class TestConfig:
    def test_defaults_validate(self):
        cfg = config_mod.config_from_dict({})
        assert cfg.grid.nx == 200 and cfg.grid.ny == 50
        assert cfg.mask.kind == "triangle"

    def test_yaml_round_trip(self, tmp_path):
        cfg = config_mod.config_from_dict(
            {"seed": 9, "mask": {"kind": "cap", "cap_radius": 4.0}}
        )
        path = tmp_path / "cfg.yaml"
        config_mod.save_config(path, cfg)
        again = config_mod.load_config(path)
        assert again == cfg
        assert config_mod.config_hash(again) == config_mod.config_hash(cfg)

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError):
            config_mod.config_from_dict({"kalmann": {}})

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            config_mod.config_from_dict({"mask": {"kind": "triangle", "blur": 1}})

    def test_noise_seed_follows_run_seed(self):
        cfg = config_mod.config_from_dict({"seed": 17})
        assert cfg.noise.seed == 17
        pinned = config_mod.config_from_dict({"seed": 17, "noise": {"seed": 3}})
        assert pinned.noise.seed == 3

    def test_hash_changes_with_content(self):
        a = config_mod.config_from_dict({})
        b = config_mod.config_from_dict({"seed": 1})
        assert config_mod.config_hash(a) != config_mod.config_hash(b)


class TestRunMapping:
    def test_noise_free_flat_recovery(self):
        cfg = small_cfg()
        grid, log = run_mapping(cfg, small_samples(cfg))
        assert log
        touched = grid.p_hat < cfg.p0
        assert touched.any()
        # residual comes only from the diffuse prior on lightly-updated
        # edge cells, not from the measurements
        err = np.abs(grid.z_hat[touched] - 5.0)
        assert err.mean() <= 0.02

    def test_static_stream_single_update(self):
        cfg = small_cfg()
        sample = small_samples(cfg)[0]
        stream = [dataclasses.replace(sample, timestamp=0.01 * k)
                  for k in range(50)]
        _, log = run_mapping(cfg, stream)
        assert len(log) == 1

    def test_log_cells_match_mask_count(self):
        cfg = small_cfg(mask=MaskSpec(kind="triangle", dilation_steps=2))
        sample = small_samples(cfg)[0]
        _, log = run_mapping(cfg, [sample])
        plane = fit_plane_pca(sample.points)
        frame = build_local_frame(plane, sample.points[0])
        mask = make_mask(cfg.mask, cfg.grid, sample.points, plane, frame)
        assert log[0].cells == mask.count()

    def test_degenerate_sample_skipped(self):
        cfg = small_cfg()
        good = small_samples(cfg)[0]
        bad = dataclasses.replace(
            good,
            timestamp=good.timestamp + 1.0,
            points=np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [2.0, 2.0, 2.0]]),
        )
        grid, log = run_mapping(cfg, [good, bad])
        assert len(log) == 1

    def test_worker_counts_identical(self):
        cfg = small_cfg()
        samples = small_samples(cfg)
        ref, _ = run_mapping(cfg, samples, workers=1)
        for workers in (2, 4):
            grid, _ = run_mapping(cfg, samples, workers=workers)
            np.testing.assert_array_equal(grid.z_hat, ref.z_hat)
            np.testing.assert_array_equal(grid.p_hat, ref.p_hat)

    def test_update_log_file(self, tmp_path):
        cfg = small_cfg()
        _, log = run_mapping(cfg, small_samples(cfg)[:40])
        path = tmp_path / "log.csv"
        write_update_log(path, log)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("timestamp_s,")
        assert len(lines) == len(log) + 1


class TestBench:
    def test_bench_runs(self):
        cfg = small_cfg()
        res = bench_masked_update(cfg, n_updates=20, workers=1)
        assert res.median_ms > 0.0
        assert res.cells > 0
        full = bench_masked_update(cfg, n_updates=5, workers=1, full_grid=True)
        assert full.cells == cfg.grid.nx * cfg.grid.ny


def write_cfg(tmp_path, name="cfg.yaml"):
    data = {
        "grid": {"x_min": 90.0, "x_max": 150.0, "y_min": 95.0, "y_max": 115.0,
                 "nx": 30, "ny": 10},
        "surface": {"model": "flat", "params": {"z0": 5.0}},
        "plan": {"lines": 2, "area": [100.0, 140.0, 100.0, 110.0],
                 "z_const": 70.0},
        "noise": {"quantum": 0.0, "bias_amplitude": 0.0, "white_sigma": 0.0},
    }
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


class TestCli:
    def test_simulate_deterministic(self, tmp_path):
        cfg = write_cfg(tmp_path)
        for d in ("a", "b"):
            rc = main(["simulate", "--config", str(cfg), "--seed", "3",
                       "--out", str(tmp_path / d)])
            assert rc == 0
        a = (tmp_path / "a" / "samples.jsonl").read_bytes()
        b = (tmp_path / "b" / "samples.jsonl").read_bytes()
        assert a == b
        manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
        assert manifest["seed"] == 3
        assert manifest["samples"] > 0

    def test_simulate_empty_plan(self, tmp_path):
        data = yaml.safe_load(write_cfg(tmp_path).read_text())
        data["plan"]["lines"] = 0
        cfg = tmp_path / "empty.yaml"
        cfg.write_text(yaml.safe_dump(data))
        rc = main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert rc == 0
        assert (tmp_path / "o" / "samples.jsonl").read_text() == ""
        manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert manifest["samples"] == 0

    def test_map_and_replay_equivalence(self, tmp_path):
        cfg = write_cfg(tmp_path)
        assert main(["simulate", "--config", str(cfg),
                     "--out", str(tmp_path / "sim")]) == 0
        stream = str(tmp_path / "sim" / "samples.jsonl")
        for d in ("m1", "m2"):
            rc = main(["map", "--config", str(cfg), "--stream", stream,
                       "--out", str(tmp_path / d)])
            assert rc == 0
        h1 = (tmp_path / "m1" / "height.bin").read_bytes()
        h2 = (tmp_path / "m2" / "height.bin").read_bytes()
        assert h1 == h2
        z, spec = load_binary(tmp_path / "m1" / "height.bin")
        assert spec.nx == 30 and spec.ny == 10
        p, _ = load_binary(tmp_path / "m1" / "covariance.bin")
        assert np.abs(z[p < 1e4] - 5.0).mean() <= 0.02

    def test_map_worker_override_identical(self, tmp_path):
        cfg = write_cfg(tmp_path)
        assert main(["simulate", "--config", str(cfg),
                     "--out", str(tmp_path / "sim")]) == 0
        stream = str(tmp_path / "sim" / "samples.jsonl")
        outs = []
        for d, w in (("w1", "1"), ("w4", "4")):
            assert main(["map", "--config", str(cfg), "--stream", stream,
                         "--workers", w, "--out", str(tmp_path / d)]) == 0
            outs.append((tmp_path / d / "height.bin").read_bytes())
        assert outs[0] == outs[1]

    def test_evaluate_reports(self, tmp_path):
        cfg = write_cfg(tmp_path)
        assert main(["simulate", "--config", str(cfg),
                     "--out", str(tmp_path / "sim")]) == 0
        assert main(["map", "--config", str(cfg),
                     "--stream", str(tmp_path / "sim" / "samples.jsonl"),
                     "--out", str(tmp_path / "run")]) == 0
        rc = main(["evaluate", "--config", str(cfg),
                   "--runs", str(tmp_path / "run"),
                   "--out", str(tmp_path / "eval")])
        assert rc == 0
        report = (tmp_path / "eval" / "report.csv").read_text().splitlines()
        assert len(report) == 2
        assert report[1].startswith("triangle,")

    def test_bad_config_exit_code(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("mask:\n  kind: hexagon\n")
        rc = main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")])
        assert rc == EXIT_CONFIG

    def test_missing_stream_exit_code(self, tmp_path):
        rc = main(["map", "--stream", str(tmp_path / "nope.jsonl"),
                   "--out", str(tmp_path / "o")])
        assert rc == EXIT_DATA

    def test_empty_evaluation_exit_code(self, tmp_path):
        cfg = write_cfg(tmp_path)
        write_samples(tmp_path / "empty.jsonl", [])
        assert main(["map", "--config", str(cfg),
                     "--stream", str(tmp_path / "empty.jsonl"),
                     "--out", str(tmp_path / "run")]) == 0
        rc = main(["evaluate", "--config", str(cfg),
                   "--runs", str(tmp_path / "run"),
                   "--out", str(tmp_path / "eval")])
        assert rc == EXIT_EMPTY
