import numpy as np
import pytest

from spectralrefiner import (
    Grid,
    KsParams,
    Trajectory,
    correlation_time,
    dft_forward,
    make_schedule,
    one_step_mse,
    rollout,
    scaling_vector,
    simulate_ks,
    spectrum_compare,
    unrolled_mse,
)
from spectralrefiner.evaluate import (
    METRICS_CSV_HEADER,
    MetricsReport,
    channel_groups,
    evaluate_model,
    high_band_log_ratio_magnitude,
    per_channel_mse,
    per_step_correlation,
    per_step_mse,
    spectrum_report,
)
from spectralrefiner.refiner import OracleVelocityPredictor


@pytest.fixture(scope="module")
def ks_truth():
    return simulate_ks(KsParams(points=32, domain_length=32.0, num_output_steps=14, seed=6, warmup_time=3.0))


def oracle_for(truth):
    schedule = make_schedule(num_steps=2, direction="down", sigma_b=2.0)
    lam = scaling_vector(truth.grid)
    targets = [dft_forward(truth.state(i)) for i in range(1, len(truth))]
    return OracleVelocityPredictor(targets, schedule, lam), schedule, lam


def shifted(trajectory, offset):
    return Trajectory(trajectory.grid, trajectory.times, trajectory.states + offset, trajectory.channels)


class TestRollout:
    def test_zero_steps_returns_init_only(self, ks_truth):
        oracle, schedule, lam = oracle_for(ks_truth)
        out = rollout(oracle, schedule, lam, ks_truth.state(0), 0, rng=0, dt=ks_truth.dt)
        assert len(out) == 1
        assert np.array_equal(out.states[0], ks_truth.states[0])

    def test_oracle_rollout_tracks_truth(self, ks_truth):
        oracle, schedule, lam = oracle_for(ks_truth)
        out = rollout(oracle, schedule, lam, ks_truth.state(0), 13, rng=1, dt=ks_truth.dt)
        assert np.max(np.abs(out.states - ks_truth.states)) < 1e-6

    def test_same_seed_identical_bytes(self, ks_truth):
        oracle1, schedule, lam = oracle_for(ks_truth)
        oracle2, _, _ = oracle_for(ks_truth)
        a = rollout(oracle1, schedule, lam, ks_truth.state(0), 5, rng=42, dt=ks_truth.dt)
        b = rollout(oracle2, schedule, lam, ks_truth.state(0), 5, rng=42, dt=ks_truth.dt)
        assert a.states.tobytes() == b.states.tobytes()


class TestPointwiseMetrics:
    def test_identical_trajectories_zero(self, ks_truth):
        assert unrolled_mse(ks_truth, ks_truth) == 0.0

    def test_constant_offset_gives_c_squared(self, ks_truth):
        c = 0.37
        assert unrolled_mse(shifted(ks_truth, c), ks_truth) == pytest.approx(c**2, rel=1e-12)

    def test_matches_naive_loops(self, ks_truth):
        rng = np.random.default_rng(0)
        noisy = Trajectory(
            ks_truth.grid, ks_truth.times,
            ks_truth.states + 0.1 * rng.standard_normal(ks_truth.states.shape),
            ks_truth.channels,
        )
        naive_steps = []
        for i in range(len(ks_truth)):
            total, count = 0.0, 0
            for c in range(noisy.states.shape[1]):
                for j in range(noisy.states.shape[2]):
                    total += (noisy.states[i, c, j] - ks_truth.states[i, c, j]) ** 2
                    count += 1
            naive_steps.append(total / count)
        assert np.max(np.abs(per_step_mse(noisy, ks_truth) - naive_steps)) < 1e-12
        assert unrolled_mse(noisy, ks_truth) == pytest.approx(float(np.mean(naive_steps)), rel=1e-12)
        assert unrolled_mse(noisy, ks_truth, reduction="sum") == pytest.approx(float(np.sum(naive_steps)), rel=1e-12)

    def test_one_step_mse_zero_with_oracle(self, ks_truth):
        oracle, schedule, lam = oracle_for(ks_truth)
        assert one_step_mse(oracle, schedule, lam, ks_truth, rng=0) < 1e-16

    def test_one_step_mse_constant_offset(self, ks_truth):
        c = 0.25
        off = shifted(ks_truth, c)
        targets = [dft_forward(off.state(i)) for i in range(1, len(off))]
        schedule = make_schedule(num_steps=2, direction="down", sigma_b=2.0)
        lam = scaling_vector(ks_truth.grid)
        oracle = OracleVelocityPredictor(targets, schedule, lam)
        assert one_step_mse(oracle, schedule, lam, ks_truth, rng=0) == pytest.approx(c**2, rel=1e-9)

    def test_shape_mismatch_rejected(self, ks_truth):
        clipped = Trajectory(ks_truth.grid, ks_truth.times[:5], ks_truth.states[:5], ks_truth.channels)
        with pytest.raises(ValueError, match="shapes"):
            unrolled_mse(clipped, ks_truth)


class TestCorrelationTime:
    def test_identical_gives_horizon(self, ks_truth):
        assert correlation_time(ks_truth, ks_truth) == ks_truth.times[-1]

    def test_negated_crosses_at_first_step(self, ks_truth):
        states = ks_truth.states.copy()
        states[1:] = -states[1:]
        flipped = Trajectory(ks_truth.grid, ks_truth.times, states, ks_truth.channels)
        assert correlation_time(flipped, ks_truth) == ks_truth.times[1]

    def test_constructed_crossing_step(self):
        # correlation sequence designed to cross 0.8 exactly at index 3
        grid = Grid((64,), (1.0,))
        rng = np.random.default_rng(1)
        base = rng.standard_normal((6, 1, 64))
        base -= base.mean(axis=2, keepdims=True)
        noise = rng.standard_normal((6, 1, 64))
        noise -= noise.mean(axis=2, keepdims=True)
        # project noise orthogonal to base per step to control correlation
        states = np.empty_like(base)
        targets = [1.0, 0.95, 0.9, 0.5, 0.4, 0.3]
        for i, rho in enumerate(targets):
            b = base[i, 0] / np.linalg.norm(base[i, 0])
            n = noise[i, 0] - (noise[i, 0] @ b) * b
            n /= np.linalg.norm(n)
            states[i, 0] = rho * b + np.sqrt(1 - rho**2) * n
        truth = Trajectory(grid, np.arange(6) * 0.5, base, ("u",))
        pred = Trajectory(grid, np.arange(6) * 0.5, states, ("u",))
        corr = per_step_correlation(pred, truth)
        assert np.allclose(corr, targets, atol=1e-12)
        assert correlation_time(pred, truth, threshold=0.8) == pytest.approx(1.5)

    def test_monotone_in_threshold(self, ks_truth):
        rng = np.random.default_rng(2)
        degraded = Trajectory(
            ks_truth.grid, ks_truth.times,
            ks_truth.states + np.linspace(0, 2, len(ks_truth))[:, None, None]
            * rng.standard_normal(ks_truth.states.shape),
            ks_truth.channels,
        )
        times = [correlation_time(degraded, ks_truth, threshold=th) for th in (0.5, 0.7, 0.9)]
        assert times[0] >= times[1] >= times[2]


class TestSpectrumCompare:
    def test_identical_gives_zero_log_ratio(self, ks_truth):
        comparison = spectrum_compare(ks_truth, ks_truth)
        assert np.max(np.abs(comparison.log_ratio)) == 0.0

    def test_low_pass_shows_negative_high_bands_only(self):
        # broadband truth so every band carries solid power
        grid = Grid((32,), (1.0,))
        rng = np.random.default_rng(8)
        truth_states = rng.standard_normal((6, 1, 32))
        truth = Trajectory(grid, np.arange(6.0), truth_states, ("u",))
        cut = 8
        coeffs = np.fft.rfft(truth_states[:, 0], axis=1)
        coeffs[:, cut:] = 0.0
        states = np.fft.irfft(coeffs, n=32, axis=1)[:, None, :]
        filtered = Trajectory(grid, truth.times, states, ("u",))
        comparison = spectrum_compare(filtered, truth)
        assert np.all(comparison.log_ratio[0, cut:] < -1.0)
        assert np.max(np.abs(comparison.log_ratio[0, :cut])) < 1e-9

    def test_antisymmetric_under_swap(self, ks_truth):
        rng = np.random.default_rng(3)
        other = Trajectory(
            ks_truth.grid, ks_truth.times,
            ks_truth.states + 0.2 * rng.standard_normal(ks_truth.states.shape),
            ks_truth.channels,
        )
        ab = spectrum_compare(other, ks_truth).log_ratio
        ba = spectrum_compare(ks_truth, other).log_ratio
        assert np.allclose(ab, -ba, atol=1e-12)

    def test_parseval_cross_check(self, ks_truth):
        from spectralrefiner import power_spectrum

        table = power_spectrum(ks_truth.state(3))
        energy = np.sum(ks_truth.states[3] ** 2)
        assert table.power.sum() == pytest.approx(energy, rel=1e-10)

    def test_high_band_magnitude_uses_top_quartile(self, ks_truth):
        comparison = spectrum_compare(ks_truth, ks_truth)
        assert high_band_log_ratio_magnitude(comparison) == 0.0


class TestReports:
    def test_csv_header_bit_exact(self):
        report = MetricsReport(seed=3, config_hash="abc")
        report.add("one_step_mse", "all", -1, 0.5)
        lines = report.to_csv().splitlines()
        assert lines[0] == "metric,channel,step,value,seed,config_hash"
        assert lines[1] == "one_step_mse,all,-1,0.5,3,abc"
        assert METRICS_CSV_HEADER == ("metric", "channel", "step", "value", "seed", "config_hash")

    def test_channel_groups_mapping(self):
        groups = channel_groups(("vx", "vy", "vorticity"))
        assert groups == {"scalar_loss": ("vorticity",), "vector_loss": ("vx", "vy")}
        assert channel_groups(("u",)) == {"scalar_loss": ("u",), "vector_loss": ()}

    def test_evaluate_model_with_oracle_all_zero_losses(self, ks_truth):
        oracle, schedule, lam = oracle_for(ks_truth)
        report = evaluate_model(
            oracle, schedule, lam, [ks_truth], seed=0, config_hash="x",
        )
        values = {(m, s): v for m, c, s, v in report.rows}
        assert values[("one_step_mse", -1)] < 1e-14
        assert values[("unrolled_mse", -1)] < 1e-14
        assert values[("correlation_time", -1)] == ks_truth.times[-1]
        assert values[("scalar_loss", -1)] < 1e-14

    def test_report_json_and_write(self, ks_truth, tmp_path):
        import json

        oracle, schedule, lam = oracle_for(ks_truth)
        report = evaluate_model(oracle, schedule, lam, [ks_truth], seed=0, config_hash="y")
        report.write(csv_path=tmp_path / "m.csv", json_path=tmp_path / "m.json")
        doc = json.loads((tmp_path / "m.json").read_text())
        assert doc["config_hash"] == "y"
        assert doc["metadata"]["channel_groups"]["scalar_loss"] == ["u"]
        assert (tmp_path / "m.csv").read_text().startswith("metric,channel,step,value")

    def test_spectrum_report_rows(self, ks_truth):
        comparison = spectrum_compare(ks_truth, ks_truth)
        report = spectrum_report(comparison, seed=1, config_hash="z")
        metrics = {m for m, _, _, _ in report.rows}
        assert metrics == {"spectrum_truth", "spectrum_pred", "spectrum_log_ratio"}
        n_bins = comparison.num_bins
        assert len(report.rows) == 3 * n_bins * len(comparison.channels)

    def test_per_channel_mse_naive(self, ks_truth):
        off = shifted(ks_truth, 0.1)
        channel_losses = per_channel_mse(off, ks_truth)
        assert channel_losses["u"] == pytest.approx(0.01, rel=1e-12)
