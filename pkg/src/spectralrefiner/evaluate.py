"""Rollout execution and metrics: one-step MSE, unrolled MSE, per-channel
losses, correlation time, and spectrum comparison, with CSV/JSON reports."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .refiner import VelocityPredictor, refine_step
from .schedules import RefinementSchedule
from .solvers import Trajectory
from .spectral import FrequencyScaling, RealField, power_spectrum

METRICS_CSV_HEADER = ("metric", "channel", "step", "value", "seed", "config_hash")
AGGREGATE_STEP = -1
LOG_RATIO_FLOOR = 1e-300


def rollout(
    model: VelocityPredictor,
    schedule: RefinementSchedule,
    lam: FrequencyScaling,
    init: RealField,
    n_steps: int,
    rng,
    dt: float = 1.0,
    sampler: str = "renoise",
) -> Trajectory:
    """Autoregressive rollout: each refined prediction feeds the next input.

    Returns a trajectory of n_steps + 1 states starting at ``init``.
    Deterministic given the rng seed.
    """
    rng = np.random.default_rng(rng)
    states = np.empty((n_steps + 1, init.num_channels, *init.grid.points))
    states[0] = init.values
    current = init
    for i in range(n_steps):
        current = refine_step(current, model, schedule, lam, rng, sampler=sampler)
        states[i + 1] = current.values
    times = np.arange(n_steps + 1) * dt
    return Trajectory(init.grid, times, states, init.channels)


def one_step_mse(
    model: VelocityPredictor,
    schedule: RefinementSchedule,
    lam: FrequencyScaling,
    truth: Trajectory,
    rng,
    sampler: str = "renoise",
) -> float:
    """Mean over transitions of the spatial/channel MSE between the refined
    prediction from each true state and the next true state."""
    if len(truth) < 2:
        raise ValueError("need at least two states for one-step error")
    rng = np.random.default_rng(rng)
    errors = []
    for i in range(len(truth) - 1):
        pred = refine_step(truth.state(i), model, schedule, lam, rng, sampler=sampler)
        errors.append(np.mean((pred.values - truth.states[i + 1]) ** 2))
    return float(np.mean(errors))


def per_step_mse(pred: Trajectory, truth: Trajectory) -> np.ndarray:
    _check_comparable(pred, truth)
    return np.mean((pred.states - truth.states) ** 2, axis=tuple(range(1, pred.states.ndim)))


def per_channel_mse(pred: Trajectory, truth: Trajectory) -> dict[str, float]:
    _check_comparable(pred, truth)
    axes = (0, *range(2, pred.states.ndim))
    per_channel = np.mean((pred.states - truth.states) ** 2, axis=axes)
    return {name: float(v) for name, v in zip(pred.channels, per_channel)}


def unrolled_mse(pred: Trajectory, truth: Trajectory, reduction: str = "mean") -> float:
    """MSE between two equal-shape trajectories, averaged (or summed) over
    rollout steps."""
    steps = per_step_mse(pred, truth)
    if reduction == "mean":
        return float(np.mean(steps))
    if reduction == "sum":
        return float(np.sum(steps))
    raise ValueError(f"unknown reduction {reduction!r}")


def per_step_correlation(pred: Trajectory, truth: Trajectory) -> np.ndarray:
    """Pearson correlation over space and channels at each time index."""
    _check_comparable(pred, truth)
    out = np.empty(len(pred))
    for i in range(len(pred)):
        a = pred.states[i].ravel()
        b = truth.states[i].ravel()
        a = a - a.mean()
        b = b - b.mean()
        denom = np.linalg.norm(a) * np.linalg.norm(b)
        if denom == 0.0:
            out[i] = 1.0 if np.array_equal(a, b) else 0.0
        else:
            out[i] = float(a @ b / denom)
    return out


def correlation_time(pred: Trajectory, truth: Trajectory, threshold: float = 0.8) -> float:
    """First time at which the correlation drops below ``threshold``; the
    trajectory horizon if it never does."""
    corr = per_step_correlation(pred, truth)
    below = np.nonzero(corr < threshold)[0]
    if below.size == 0:
        return float(pred.times[-1])
    return float(pred.times[below[0]])


@dataclass(frozen=True)
class SpectrumComparison:
    """Per-band time-averaged power of prediction and truth plus log-ratio."""

    channels: tuple[str, ...]
    bin_edges: np.ndarray
    pred_power: np.ndarray  # (channels, bins) mean power per mode
    truth_power: np.ndarray

    @property
    def log_ratio(self) -> np.ndarray:
        p = np.maximum(self.pred_power, LOG_RATIO_FLOOR)
        t = np.maximum(self.truth_power, LOG_RATIO_FLOOR)
        return np.log(p / t)

    @property
    def num_bins(self) -> int:
        return self.bin_edges.size - 1


def trajectory_spectrum(traj: Trajectory, bins: int | None = None, axis: int | None = None):
    """Time-averaged per-band mean power of a trajectory."""
    tables = [power_spectrum(traj.state(i), bins=bins, axis=axis) for i in range(len(traj))]
    mean_power = np.mean([t.mean_power for t in tables], axis=0)
    return tables[0], mean_power


def spectrum_compare(
    pred: Trajectory,
    truth: Trajectory,
    bins: int | None = None,
    axis: int | None = None,
) -> SpectrumComparison:
    _check_comparable(pred, truth)
    table, pred_power = trajectory_spectrum(pred, bins=bins, axis=axis)
    _, truth_power = trajectory_spectrum(truth, bins=bins, axis=axis)
    return SpectrumComparison(
        channels=pred.channels,
        bin_edges=table.bin_edges,
        pred_power=pred_power,
        truth_power=truth_power,
    )


def high_band_log_ratio_magnitude(comparison: SpectrumComparison, fraction: float = 0.25) -> float:
    """Mean |log-ratio| over the top ``fraction`` of bands, all channels."""
    bins = comparison.num_bins
    start = int(np.ceil((1.0 - fraction) * bins))
    start = min(max(start, 0), bins - 1)
    return float(np.mean(np.abs(comparison.log_ratio[:, start:])))


def _check_comparable(pred: Trajectory, truth: Trajectory) -> None:
    if pred.states.shape != truth.states.shape:
        raise ValueError(f"trajectory shapes differ: {pred.states.shape} vs {truth.states.shape}")
    if pred.channels != truth.channels:
        raise ValueError(f"channel mismatch {pred.channels} vs {truth.channels}")


@dataclass
class MetricsReport:
    """Flat metric rows plus run metadata, rendered to the bit-exact CSV
    schema ``metric,channel,step,value,seed,config_hash`` and a JSON mirror."""

    seed: int
    config_hash: str
    metadata: dict = field(default_factory=dict)
    rows: list[tuple[str, str, int, float]] = field(default_factory=list)

    def add(self, metric: str, channel: str, step: int, value: float) -> None:
        value = float(value)
        self.rows.append((metric, channel, int(step), value))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(METRICS_CSV_HEADER)
        for metric, channel, step, value in self.rows:
            writer.writerow([metric, channel, step, repr(value), self.seed, self.config_hash])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "config_hash": self.config_hash,
            "metadata": self.metadata,
            "metrics": [
                {"metric": m, "channel": c, "step": s, "value": v}
                for m, c, s, v in self.rows
            ],
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    def write(self, csv_path=None, json_path=None) -> None:
        if csv_path is not None:
            _atomic_write_text(csv_path, self.to_csv())
        if json_path is not None:
            _atomic_write_text(json_path, self.to_json())


def _atomic_write_text(path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def channel_groups(channels: tuple[str, ...]) -> dict[str, tuple[str, ...]]:
    """Scalar/vector channel mapping recorded in every report.

    Velocity components count as the vector group; everything else (vorticity
    for the 2D flow data, u for the 1D data) is scalar.
    """
    vector = tuple(c for c in channels if c in ("vx", "vy"))
    scalar = tuple(c for c in channels if c not in ("vx", "vy"))
    return {"scalar_loss": scalar, "vector_loss": vector}


def evaluate_model(
    model: VelocityPredictor,
    schedule: RefinementSchedule,
    lam: FrequencyScaling,
    truths: list[Trajectory],
    seed: int,
    config_hash: str,
    correlation_threshold: float = 0.8,
    batch_reduction: str = "mean",
    unrolled_reduction: str = "mean",
    sampler: str = "renoise",
    metadata: dict | None = None,
) -> MetricsReport:
    """Run rollouts against each truth trajectory and assemble all metrics.

    Per-trajectory rows are indexed by trajectory via the metadata block;
    aggregate rows use step = AGGREGATE_STEP and combine trajectories with
    ``batch_reduction`` (mean or sum).
    """
    if batch_reduction not in ("mean", "sum"):
        raise ValueError(f"unknown batch reduction {batch_reduction!r}")
    report = MetricsReport(seed=seed, config_hash=config_hash, metadata=metadata or {})
    groups = channel_groups(truths[0].channels)
    report.metadata.setdefault("channel_groups", {k: list(v) for k, v in groups.items()})
    report.metadata.setdefault("correlation_threshold", correlation_threshold)
    report.metadata.setdefault("batch_reduction", batch_reduction)
    report.metadata.setdefault("unrolled_reduction", unrolled_reduction)
    report.metadata.setdefault("sampler", sampler)

    one_step_all, unrolled_all, corr_time_all = [], [], []
    scalar_all, vector_all = [], []
    rng = np.random.default_rng(seed)
    for truth in truths:
        pred = rollout(model, schedule, lam, truth.state(0), len(truth) - 1, rng, dt=truth.dt, sampler=sampler)
        one_step = one_step_mse(model, schedule, lam, truth, rng, sampler=sampler)
        unrolled = unrolled_mse(pred, truth, reduction=unrolled_reduction)
        ct = correlation_time(pred, truth, threshold=correlation_threshold)
        one_step_all.append(one_step)
        unrolled_all.append(unrolled)
        corr_time_all.append(ct)
        channel_losses = per_channel_mse(pred, truth)
        for group, names in groups.items():
            if not names:
                continue
            loss = float(np.mean([channel_losses[n] for n in names]))
            (scalar_all if group == "scalar_loss" else vector_all).append(loss)
        steps = per_step_mse(pred, truth)
        corr = per_step_correlation(pred, truth)
        for i in range(len(pred)):
            report.add("step_mse", "all", i, steps[i])
            report.add("correlation", "all", i, corr[i])

    reduce = np.mean if batch_reduction == "mean" else np.sum
    report.add("one_step_mse", "all", AGGREGATE_STEP, reduce(one_step_all))
    report.add("unrolled_mse", "all", AGGREGATE_STEP, reduce(unrolled_all))
    report.add("correlation_time", "all", AGGREGATE_STEP, float(np.mean(corr_time_all)))
    if scalar_all:
        report.add("scalar_loss", "scalar", AGGREGATE_STEP, reduce(scalar_all))
    if vector_all:
        report.add("vector_loss", "vector", AGGREGATE_STEP, reduce(vector_all))
    return report


def spectrum_report(
    comparison: SpectrumComparison,
    seed: int,
    config_hash: str,
    metadata: dict | None = None,
) -> MetricsReport:
    """Spectrum comparison rendered as metric rows (step = band index)."""
    report = MetricsReport(seed=seed, config_hash=config_hash, metadata=metadata or {})
    log_ratio = comparison.log_ratio
    for c, name in enumerate(comparison.channels):
        for b in range(comparison.num_bins):
            report.add("spectrum_truth", name, b, comparison.truth_power[c, b])
            report.add("spectrum_pred", name, b, comparison.pred_power[c, b])
            report.add("spectrum_log_ratio", name, b, log_ratio[c, b])
    return report
