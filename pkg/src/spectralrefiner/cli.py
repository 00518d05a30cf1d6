"""Command-line pipeline: data generation, schedule inspection, fitting,
rollout, evaluation, and spectrum export.

Configuration comes from a single JSON file validated against
``RUN_CONFIG_SCHEMA``; ``--set key.path=value`` overrides win over the file.
Every command is deterministic given config and seeds; failures exit nonzero
with a machine-readable JSON error on stderr. File writes are atomic
(write-temp, rename).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import csv
import hashlib
import io
import json
import logging
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import evaluate as ev
from . import schedules as sch
from . import solvers as sol
from . import surrogate as sur
from .refiner import make_training_pairs
from .spectral import scaling_vector

log = logging.getLogger("spectralrefiner")

RUN_CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["pde"],
    "properties": {
        "pde": {"enum": ["ks", "ns"]},
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "points": {"type": "integer", "minimum": 4},
                "domain_length": {"type": "number", "exclusiveMinimum": 0},
                "spacing": {"type": "number", "exclusiveMinimum": 0},
                "viscosity": {"type": "number", "exclusiveMinimum": 0},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "output_dt": {"type": "number", "exclusiveMinimum": 0},
                "num_output_steps": {"type": "integer", "minimum": 1},
                "warmup_time": {"type": "number", "minimum": 0},
                "ic_amplitude": {"type": "number", "exclusiveMinimum": 0},
                "ic_max_mode": {"type": "integer", "minimum": 1},
                "forcing_amplitude": {"type": "number"},
                "forcing_mode": {"type": "integer", "minimum": 1},
            },
        },
        "schedule": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "num_steps": {"type": "integer", "minimum": 0},
                "sigma_min": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "sigma_b": {"type": "number", "minimum": 0},
                "direction": {"enum": ["none", "down", "up"]},
                "d_min": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "blur_exponent": {"enum": ["sin4", "sin2", "cos2"]},
            },
        },
        "data": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "num_trajectories": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
                "split": {
                    "type": "array",
                    "items": {"type": "number", "minimum": 0},
                    "minItems": 2,
                    "maxItems": 3,
                },
            },
        },
        "training": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "pairs_per_transition": {"type": "integer", "minimum": 1},
                "ridge": {"type": "number", "minimum": 0},
                "seed": {"type": "integer"},
            },
        },
        "eval": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "seed": {"type": "integer"},
                "rollout_steps": {"type": "integer", "minimum": 0},
                "correlation_threshold": {"type": "number", "exclusiveMinimum": -1, "maximum": 1},
                "batch_reduction": {"enum": ["mean", "sum"]},
                "unrolled_reduction": {"enum": ["mean", "sum"]},
                "spectrum_bins": {"type": "integer", "minimum": 1},
                "sampler": {"enum": ["renoise", "posterior"]},
            },
        },
    },
}

DEFAULT_CONFIG = {
    "pde": "ks",
    "solver": {},
    "schedule": {
        "num_steps": 3,
        "sigma_min": 1e-3,
        "sigma_b": 2.0,
        "direction": "down",
        "d_min": 1e-3,
        "blur_exponent": "sin4",
    },
    "data": {"num_trajectories": 10, "seed": 0, "split": [0.8, 0.1, 0.1]},
    "training": {"pairs_per_transition": 4, "ridge": 1e-8, "seed": 1},
    "eval": {
        "seed": 2,
        "rollout_steps": 13,
        "correlation_threshold": 0.8,
        "batch_reduction": "mean",
        "unrolled_reduction": "mean",
        "sampler": "renoise",
    },
}


class CliError(RuntimeError):
    """User-facing failure with a machine-readable category."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


def _deep_update(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_update(out[key], value)
        else:
            out[key] = value
    return out


def _apply_override(config: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise CliError("bad_override", f"--set expects KEY=VALUE, got {assignment!r}")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = config
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise CliError("bad_override", f"cannot descend into {part!r} in {key!r}")
    node[parts[-1]] = value


def load_config(path: str | None, overrides: list[str]) -> dict:
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                user = json.load(fh)
        except FileNotFoundError as err:
            raise CliError("config_not_found", str(err)) from err
        except json.JSONDecodeError as err:
            raise CliError("config_parse", f"{path}: {err}") from err
        config = _deep_update(config, user)
    for assignment in overrides:
        _apply_override(config, assignment)
    try:
        jsonschema.validate(config, RUN_CONFIG_SCHEMA)
    except jsonschema.ValidationError as err:
        raise CliError("config_schema", err.message) from err
    return config


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _solver_params(config: dict, seed: int):
    solver = dict(config.get("solver", {}))
    if config["pde"] == "ks":
        return sol.KsParams(seed=seed, **solver)
    return sol.NsParams(seed=seed, **solver)


def _simulate(config: dict, seed: int) -> sol.Trajectory:
    params = _solver_params(config, seed)
    if config["pde"] == "ks":
        return sol.simulate_ks(params)
    return sol.simulate_ns(params)


def _make_schedule(config: dict) -> sch.RefinementSchedule:
    return sch.make_schedule(**config["schedule"])


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _atomic_write_text(path: Path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


def _write_trajectory_atomic(trajectory: sol.Trajectory, path: Path) -> None:
    tmp = path.with_name(path.name + ".tmp")
    sol.write_trajectory(trajectory, tmp)
    os.replace(tmp, path)


def _generate_one(config: dict, seed: int, out_dir: str) -> str:
    trajectory = _simulate(config, seed)
    name = f"traj_{seed:05d}.bin"
    _write_trajectory_atomic(trajectory, Path(out_dir) / name)
    return name


def cmd_generate(config: dict, out_dir: Path, jobs: int) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    base_seed = config["data"]["seed"]
    count = config["data"]["num_trajectories"]
    seeds = [base_seed + i for i in range(count)]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            names = list(pool.map(_generate_one, [config] * count, seeds, [str(out_dir)] * count))
    else:
        names = [_generate_one(config, seed, str(out_dir)) for seed in seeds]
    manifest = {
        "config_hash": config_hash(config),
        "pde": config["pde"],
        "seeds": seeds,
        "files": names,
    }
    _atomic_write_text(out_dir / "manifest.json", json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    log.info("generated %d trajectories in %s", count, out_dir)
    return manifest


def _load_dataset(config: dict, data_dir: Path):
    manifest_path = data_dir / "manifest.json"
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError as err:
        raise CliError("missing_data", f"no manifest at {manifest_path}; run generate first") from err
    trajectories = [sol.read_trajectory(data_dir / name) for name in manifest["files"]]
    if not trajectories:
        raise CliError("missing_data", f"manifest at {manifest_path} lists no files")
    split = config["data"]["split"]
    groups = sol.dataset_split(trajectories, split, seed=config["data"]["seed"])
    while len(groups) < 3:
        groups = (*groups, [])
    return manifest, groups[0], groups[1], groups[2]


def cmd_fit(config: dict, data_dir: Path, out_dir: Path) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    _, train, _, _ = _load_dataset(config, data_dir)
    if not train:
        raise CliError("missing_data", "training split is empty")
    schedule = _make_schedule(config)
    lam = scaling_vector(train[0].grid)
    rng = np.random.default_rng(config["training"]["seed"])
    pairs = []
    for trajectory in train:
        pairs.extend(
            make_training_pairs(
                trajectory, schedule, lam, rng,
                pairs_per_transition=config["training"]["pairs_per_transition"],
            )
        )
    model = sur.fit_least_squares(pairs, schedule.num_steps, ridge=config["training"]["ridge"])
    model_path = out_dir / "model.json"
    sur.save_model(model, model_path)
    losses = sur.training_loss(model, pairs)
    summary = {
        "config_hash": config_hash(config),
        "num_pairs": len(pairs),
        "loss_per_step": {str(k): v for k, v in losses.items()},
        "model_file": model_path.name,
    }
    _atomic_write_text(out_dir / "fit_summary.json", json.dumps(summary, sort_keys=True, indent=2) + "\n")
    log.info("fit %d pairs; per-step loss %s", len(pairs), losses)
    return summary


def _eval_inputs(config: dict, data_dir: Path, model_path: Path):
    _, _, _, test = _load_dataset(config, data_dir)
    if not test:
        raise CliError("missing_data", "test split is empty")
    try:
        model = sur.load_model(model_path)
    except FileNotFoundError as err:
        raise CliError("missing_model", f"no model at {model_path}; run fit first") from err
    schedule = _make_schedule(config)
    lam = scaling_vector(test[0].grid)
    return model, schedule, lam, test


def cmd_rollout(config: dict, data_dir: Path, model_path: Path, out_dir: Path) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    model, schedule, lam, test = _eval_inputs(config, data_dir, model_path)
    rng = np.random.default_rng(config["eval"]["seed"])
    sampler = config["eval"]["sampler"]
    names = []
    for i, truth in enumerate(test):
        n_steps = min(config["eval"]["rollout_steps"], len(truth) - 1)
        pred = ev.rollout(model, schedule, lam, truth.state(0), n_steps, rng, dt=truth.dt, sampler=sampler)
        name = f"pred_{i:05d}.bin"
        _write_trajectory_atomic(pred, out_dir / name)
        names.append(name)
    manifest = {"config_hash": config_hash(config), "files": names}
    _atomic_write_text(out_dir / "rollout_manifest.json", json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest


def _file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


def cmd_eval(config: dict, data_dir: Path, model_path: Path, out_dir: Path) -> ev.MetricsReport:
    out_dir.mkdir(parents=True, exist_ok=True)
    model, schedule, lam, test = _eval_inputs(config, data_dir, model_path)
    metadata = {
        "schedule": config["schedule"],
        "pde": config["pde"],
        "model": model_path.name,
        "model_hash": _file_hash(model_path),
    }
    report = ev.evaluate_model(
        model,
        schedule,
        lam,
        test,
        seed=config["eval"]["seed"],
        config_hash=config_hash(config),
        correlation_threshold=config["eval"]["correlation_threshold"],
        batch_reduction=config["eval"]["batch_reduction"],
        unrolled_reduction=config["eval"]["unrolled_reduction"],
        sampler=config["eval"]["sampler"],
        metadata=metadata,
    )
    report.write(csv_path=out_dir / "metrics.csv", json_path=out_dir / "metrics.json")
    return report


def cmd_spectrum(config: dict, data_dir: Path, model_path: Path, out_dir: Path) -> ev.MetricsReport:
    out_dir.mkdir(parents=True, exist_ok=True)
    model, schedule, lam, test = _eval_inputs(config, data_dir, model_path)
    rng = np.random.default_rng(config["eval"]["seed"])
    bins = config["eval"].get("spectrum_bins")
    sampler = config["eval"]["sampler"]
    comparisons = []
    for truth in test:
        n_steps = min(config["eval"]["rollout_steps"], len(truth) - 1)
        pred = ev.rollout(model, schedule, lam, truth.state(0), n_steps, rng, dt=truth.dt, sampler=sampler)
        clipped = sol.Trajectory(
            truth.grid, truth.times[: n_steps + 1], truth.states[: n_steps + 1], truth.channels
        )
        comparisons.append(ev.spectrum_compare(pred, clipped, bins=bins))
    merged = ev.SpectrumComparison(
        channels=comparisons[0].channels,
        bin_edges=comparisons[0].bin_edges,
        pred_power=np.mean([c.pred_power for c in comparisons], axis=0),
        truth_power=np.mean([c.truth_power for c in comparisons], axis=0),
    )
    metadata = {"schedule": config["schedule"], "pde": config["pde"], "bins": merged.num_bins}
    report = ev.spectrum_report(merged, seed=config["eval"]["seed"], config_hash=config_hash(config), metadata=metadata)
    report.write(csv_path=out_dir / "spectrum.csv", json_path=out_dir / "spectrum.json")
    return report


def cmd_schedule(config: dict, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    schedule = _make_schedule(config)
    table = sch.schedule_table(schedule)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = list(table.keys())
    writer.writerow(names)
    for row in zip(*(table[name] for name in names)):
        writer.writerow([value if isinstance(value, int) else repr(float(value)) for value in row])
    path = out_dir / "schedule.csv"
    _atomic_write_text(path, buf.getvalue())
    return path


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectralrefiner",
        description="Spectral-space diffusion refinement pipeline for PDE surrogates",
    )
    parser.add_argument("--config", help="JSON config file (defaults applied underneath)")
    parser.add_argument("--seed", type=int, help="override data seed (shorthand for --set data.seed=N)")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for generation")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="dotted-path config override; flags win over the config file",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", help="simulate trajectories and write a manifest")
    for name in ("fit", "rollout", "eval", "spectrum"):
        p = sub.add_parser(name)
        p.add_argument("--data", default="data", help="directory with generated trajectories")
        if name != "fit":
            p.add_argument("--model", default=None, help="model JSON (default: OUT/model.json)")
    sub.add_parser("schedule", help="dump the schedule audit CSV")
    return parser


def _run(args) -> int:
    config = load_config(args.config, args.overrides)
    if args.seed is not None:
        config["data"]["seed"] = args.seed
    out_dir = Path(args.out)
    if args.command == "generate":
        cmd_generate(config, out_dir, jobs=max(1, args.jobs))
    elif args.command == "fit":
        cmd_fit(config, Path(args.data), out_dir)
    elif args.command == "rollout":
        model = Path(args.model) if args.model else out_dir / "model.json"
        cmd_rollout(config, Path(args.data), model, out_dir)
    elif args.command == "eval":
        model = Path(args.model) if args.model else out_dir / "model.json"
        cmd_eval(config, Path(args.data), model, out_dir)
    elif args.command == "spectrum":
        model = Path(args.model) if args.model else out_dir / "model.json"
        cmd_spectrum(config, Path(args.data), model, out_dir)
    elif args.command == "schedule":
        cmd_schedule(config, out_dir)
    else:  # pragma: no cover - argparse enforces the choices
        raise CliError("bad_command", f"unknown command {args.command!r}")
    return 0


def _configure_logging() -> None:
    level_name = os.environ.get("SPECTRALREFINER_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level_name, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except CliError as err:
        print(json.dumps({"error": err.kind, "message": str(err)}), file=sys.stderr)
        return 2
    except (ValueError, OSError, np.linalg.LinAlgError) as err:
        print(json.dumps({"error": type(err).__name__, "message": str(err)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
