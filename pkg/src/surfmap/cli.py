"""Command-line interface.

Subcommands:
  simulate   generate a measurement sample stream from the configured rig
  map        replay a sample stream through the mapping pipeline
  evaluate   compare mapped grids against the ground-truth model
  bench      time the masked grid update

Exit codes: 0 success, 2 configuration error, 3 data error,
4 evaluation produced no counted cells.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import config as config_mod
from . import evaluation, grid as grid_mod, pipeline, simulator
from .errors import ConfigError, DataError, NoCountedCells, SurfmapError

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_EMPTY = 4


def _load_config(args) -> config_mod.RunConfig:
    if args.config:
        cfg = config_mod.load_config(args.config)
    else:
        cfg = config_mod.config_from_dict({})
    if args.seed is not None:
        cfg = dataclasses.replace(
            cfg, seed=args.seed,
            noise=dataclasses.replace(cfg.noise, seed=args.seed),
        )
    if getattr(args, "workers", None) is not None:
        cfg = dataclasses.replace(cfg, workers=args.workers)
    cfg.validate()
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    model = cfg.make_surface()
    samples = simulator.simulate_scan(model, cfg.rig, cfg.plan, cfg.noise)
    simulator.write_samples(out / "samples.jsonl", samples)
    config_mod.save_config(out / "resolved_config.yaml", cfg)
    manifest = {
        "seed": cfg.seed,
        "config_hash": config_mod.config_hash(cfg),
        "samples": len(samples),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    print(f"wrote {len(samples)} samples to {out / 'samples.jsonl'}")
    return 0


def cmd_map(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    samples = simulator.read_samples(args.stream)
    grid, log = pipeline.run_mapping(cfg, samples)
    for field, name in (("height", "height"), ("covariance", "covariance")):
        values = grid.snapshot(field)
        grid_mod.save_csv(out / f"{name}.csv", values, cfg.grid)
        grid_mod.save_binary(out / f"{name}.bin", values, cfg.grid)
    pipeline.write_update_log(out / "update_log.csv", log)
    config_mod.save_config(out / "resolved_config.yaml", cfg)
    print(f"applied {len(log)} updates from {len(samples)} samples; "
          f"snapshots in {out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    model = cfg.make_surface()
    reports = []
    for run_dir in args.runs:
        run_dir = Path(run_dir)
        height_file = run_dir / "height.bin"
        cov_file = run_dir / "covariance.bin"
        if not height_file.exists() or not cov_file.exists():
            raise DataError(f"{run_dir}: missing height.bin / covariance.bin")
        z, spec = grid_mod.load_binary(height_file)
        p, _ = grid_mod.load_binary(cov_file)
        hg = grid_mod.HeightGrid(spec, z, p)
        run_cfg_file = run_dir / "resolved_config.yaml"
        label = run_dir.name
        if run_cfg_file.exists():
            label = config_mod.load_config(run_cfg_file).mask.kind
        reports.append(evaluation.evaluate(hg, model, cfg.evaluation, mask_kind=label))
    evaluation.write_report_csv(out / "report.csv", reports)
    table = evaluation.format_report_table(reports)
    (out / "report.txt").write_text(table + "\n")
    print(table)
    return 0


def cmd_bench(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    n = args.updates
    lines = []
    single = pipeline.bench_masked_update(cfg, n, workers=1)
    multi = pipeline.bench_masked_update(cfg, n, workers=cfg.workers)
    lines.append(f"triangle mask ({single.cells} cells), {n} updates:")
    lines.append(f"  1 worker : median {single.median_ms:.3f} ms, "
                 f"p95 {single.p95_ms:.3f} ms")
    lines.append(f"  {multi.workers} workers: median {multi.median_ms:.3f} ms, "
                 f"p95 {multi.p95_ms:.3f} ms")
    fg_single = pipeline.bench_masked_update(cfg, max(n // 10, 10), workers=1,
                                             full_grid=True)
    fg_multi = pipeline.bench_masked_update(cfg, max(n // 10, 10),
                                            workers=cfg.workers, full_grid=True)
    speedup = fg_single.median_ms / fg_multi.median_ms if fg_multi.median_ms else 1.0
    lines.append(f"full grid ({fg_single.cells} cells):")
    lines.append(f"  1 worker : median {fg_single.median_ms:.3f} ms")
    lines.append(f"  {fg_multi.workers} workers: median {fg_multi.median_ms:.3f} ms "
                 f"(speedup x{speedup:.2f})")
    report = "\n".join(lines)
    (out / "bench.txt").write_text(report + "\n")
    print(report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="surfmap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, workers=True):
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--seed", type=int, help="override the run seed")
        p.add_argument("--out", required=True, help="output directory")
        if workers:
            p.add_argument("--workers", type=int, help="worker thread count")

    p = sub.add_parser("simulate", help="generate a sample stream")
    common(p, workers=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("map", help="map a sample stream onto the grid")
    common(p)
    p.add_argument("--stream", required=True, help="samples.jsonl input")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("evaluate", help="evaluate mapped grids")
    common(p, workers=False)
    p.add_argument("--runs", nargs="+", required=True,
                   help="map output directories to evaluate")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="time the masked grid update")
    common(p)
    p.add_argument("--updates", type=int, default=1000,
                   help="number of timed updates")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoCountedCells as exc:
        print(f"evaluation empty: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SurfmapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
