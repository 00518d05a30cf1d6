import numpy as np
import pytest

from spectralrefiner import (
    KsParams,
    fit_least_squares,
    load_model,
    make_schedule,
    make_training_pairs,
    save_model,
    scaling_vector,
    simulate_ks,
)
from spectralrefiner.refiner import TrainingPair
from spectralrefiner.surrogate import training_loss

from conftest import random_spectral_field


def planted_pairs(grid, seed, count, k=0, noise=0.0, coeffs=None):
    rng_seed = seed * 1000
    if coeffs is None:
        coeffs = (
            random_spectral_field(grid, rng_seed + 1).coefficients,
            random_spectral_field(grid, rng_seed + 2).coefficients,
            random_spectral_field(grid, rng_seed + 3).coefficients,
        )
    A, B, c0 = coeffs
    pairs = []
    for i in range(count):
        u_z = random_spectral_field(grid, rng_seed + 10 + 2 * i)
        cond = random_spectral_field(grid, rng_seed + 11 + 2 * i)
        target = A * u_z.coefficients + B * cond.coefficients + c0
        if noise:
            target = target + noise * random_spectral_field(grid, rng_seed + 5000 + i).coefficients
        pairs.append(TrainingPair(u_z, cond, k, u_z.with_coefficients(target)))
    return pairs, (A, B, c0)


class TestFit:
    def test_planted_model_recovered_exactly(self, grid_small):
        pairs, (A, B, c0) = planted_pairs(grid_small, seed=1, count=8)
        model = fit_least_squares(pairs, 0, ridge=0.0)
        assert np.max(np.abs(model.coeff_uz[0] - A)) < 1e-10
        assert np.max(np.abs(model.coeff_cond[0] - B)) < 1e-10
        assert np.max(np.abs(model.intercept[0] - c0)) < 1e-10

    def test_zero_targets_with_ridge_shrink_to_zero(self, grid_small):
        pairs, _ = planted_pairs(grid_small, seed=2, count=6)
        zeroed = [
            TrainingPair(p.u_z, p.cond, 0, p.target.with_coefficients(np.zeros_like(p.target.coefficients)))
            for p in pairs
        ]
        model = fit_least_squares(zeroed, 0, ridge=1e-6)
        assert np.max(np.abs(model.coeff_uz)) < 1e-10
        assert np.max(np.abs(model.coeff_cond)) < 1e-10
        assert np.max(np.abs(model.intercept)) < 1e-10

    def test_nested_models_non_increasing_loss(self, grid_small):
        pairs, _ = planted_pairs(grid_small, seed=3, count=30, noise=0.3)
        losses = []
        for features in ((), ("cond",), ("uz", "cond")):
            model = fit_least_squares(pairs, 0, ridge=0.0, features=features)
            losses.append(sum(training_loss(model, pairs).values()))
        assert losses[0] >= losses[1] >= losses[2]

    def test_residuals_orthogonal_to_features_without_ridge(self, grid_small):
        pairs, _ = planted_pairs(grid_small, seed=4, count=20, noise=0.5)
        model = fit_least_squares(pairs, 0, ridge=0.0)
        resid = np.stack([
            (model.predict(p.u_z, p.cond, 0).coefficients - p.target.coefficients) for p in pairs
        ])
        uz = np.stack([p.u_z.coefficients for p in pairs])
        cond = np.stack([p.cond.coefficients for p in pairs])
        for feature in (uz, cond, np.ones_like(uz)):
            inner = np.abs(np.sum(np.conj(feature) * resid, axis=0))
            assert np.max(inner) < 1e-8

    def test_singular_normal_matrix_suggests_ridge(self, grid_small):
        # identical rows make the gram matrix exactly rank one
        base, _ = planted_pairs(grid_small, seed=5, count=1)
        pairs = base * 4
        with pytest.raises(np.linalg.LinAlgError, match="ridge"):
            fit_least_squares(pairs, 0, ridge=0.0)

    def test_too_few_pairs_per_step_rejected(self, grid_small):
        pairs, _ = planted_pairs(grid_small, seed=6, count=2)
        with pytest.raises(ValueError, match="need >="):
            fit_least_squares(pairs, 0)

    def test_consistency_improves_with_more_data(self, grid_small):
        coeffs = None
        errs = []
        for count in (20, 400):
            pairs, (A, B, c0) = planted_pairs(grid_small, seed=7, count=count, noise=0.5, coeffs=coeffs)
            coeffs = (A, B, c0)
            model = fit_least_squares(pairs, 0, ridge=0.0)
            errs.append(float(np.mean(np.abs(model.coeff_cond[0] - B))))
        assert errs[1] < errs[0]


class TestPredict:
    def test_zero_inputs_return_intercept(self, grid_small):
        pairs, (A, B, c0) = planted_pairs(grid_small, seed=8, count=8)
        model = fit_least_squares(pairs, 0, ridge=0.0)
        zero = pairs[0].u_z.with_coefficients(np.zeros_like(pairs[0].u_z.coefficients))
        out = model.predict(zero, zero, 0)
        assert np.allclose(out.coefficients, model.intercept[0], rtol=1e-12)

    def test_affine_superposition(self, grid_small):
        pairs, _ = planted_pairs(grid_small, seed=9, count=8)
        model = fit_least_squares(pairs, 0, ridge=0.0)
        u_z, cond = pairs[0].u_z, pairs[0].cond
        base = model.predict(u_z, cond, 0).coefficients - model.intercept[0]
        scaled = (
            model.predict(u_z.with_coefficients(2.5 * u_z.coefficients),
                          cond.with_coefficients(2.5 * cond.coefficients), 0).coefficients
            - model.intercept[0]
        )
        assert np.allclose(scaled, 2.5 * base, rtol=1e-12)

    def test_matches_per_mode_loop_reference(self, grid_small):
        pairs, _ = planted_pairs(grid_small, seed=10, count=8)
        model = fit_least_squares(pairs, 0, ridge=0.0)
        u_z, cond = pairs[1].u_z, pairs[1].cond
        fast = model.predict(u_z, cond, 0).coefficients
        slow = np.empty_like(fast)
        for c in range(fast.shape[0]):
            for m in range(fast.shape[1]):
                slow[c, m] = (
                    model.coeff_uz[0, c, m] * u_z.coefficients[c, m]
                    + model.coeff_cond[0, c, m] * cond.coefficients[c, m]
                    + model.intercept[0, c, m]
                )
        assert np.max(np.abs(fast - slow)) < 1e-14

    def test_step_out_of_range_rejected(self, grid_small):
        pairs, _ = planted_pairs(grid_small, seed=11, count=8)
        model = fit_least_squares(pairs, 0)
        with pytest.raises(ValueError, match="trained range"):
            model.predict(pairs[0].u_z, pairs[0].cond, 1)


class TestSerialization:
    def test_save_load_save_byte_identical(self, grid_small, tmp_path):
        pairs, _ = planted_pairs(grid_small, seed=12, count=8)
        model = fit_least_squares(pairs, 0)
        p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
        save_model(model, p1)
        save_model(load_model(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_predictions_survive_round_trip_exactly(self, grid_small, tmp_path):
        pairs, _ = planted_pairs(grid_small, seed=13, count=8)
        model = fit_least_squares(pairs, 0)
        path = tmp_path / "m.json"
        save_model(model, path)
        restored = load_model(path)
        u_z, cond = pairs[0].u_z, pairs[0].cond
        assert np.array_equal(
            model.predict(u_z, cond, 0).coefficients,
            restored.predict(u_z, cond, 0).coefficients,
        )

    def test_version_mismatch_rejected(self, grid_small, tmp_path):
        import json

        pairs, _ = planted_pairs(grid_small, seed=14, count=8)
        model = fit_least_squares(pairs, 0)
        path = tmp_path / "m.json"
        save_model(model, path)
        doc = json.loads(path.read_text())
        doc["version"] = 999
        path.write_text(json.dumps(doc))
        with pytest.raises(ValueError, match="version"):
            load_model(path)


class TestPhysicsConnection:
    def test_step_zero_map_approximates_linear_propagator(self):
        # near-linear KS data: the k=0 velocity target is the negated next
        # state, so -coeff_cond should match the exact one-step linear
        # propagator exp((k^2 - k^4) dt) on the driven low modes
        length = 2 * np.pi
        n = 32
        dt_out = 0.05
        trajectories = []
        for seed in range(12):
            rng = np.random.default_rng(seed)
            x = np.arange(n) * (length / n)
            u0 = np.zeros(n)
            for mode in range(1, 5):
                u0 += 1e-4 * rng.standard_normal() * np.cos(mode * x + rng.uniform(0, 2 * np.pi))
            trajectories.append(
                simulate_ks(
                    KsParams(points=n, domain_length=length, dt=0.0025, output_dt=dt_out,
                             num_output_steps=10, initial_state=tuple(u0))
                )
            )
        schedule = make_schedule(num_steps=0)
        lam = scaling_vector(trajectories[0].grid)
        rng = np.random.default_rng(0)
        pairs = []
        for trajectory in trajectories:
            pairs.extend(make_training_pairs(trajectory, schedule, lam, rng, pairs_per_transition=1))
        model = fit_least_squares(pairs, 0, ridge=1e-12)
        k = np.arange(1, 5, dtype=float)
        expected = np.exp((k**2 - k**4) * dt_out)
        fitted = -model.coeff_cond[0, 0, 1:5]
        assert np.max(np.abs(fitted - expected) / expected) < 0.05

    def test_k0_subset_equals_mse_only_fit(self, ks_pairs_setup):
        # the k=0 slice of a K=3 training set poses the same regression
        # problem as a pure regression fit on those pairs
        pairs_k3, schedule, lam = ks_pairs_setup
        subset = [p for p in pairs_k3 if p.k == 0]
        retagged = [TrainingPair(p.u_z, p.cond, 0, p.target) for p in subset]
        model_k3 = fit_least_squares(pairs_k3, 3, ridge=1e-10)
        model_mse = fit_least_squares(retagged, 0, ridge=1e-10)
        loss_k3 = training_loss(model_k3, subset)[0]
        loss_mse = training_loss(model_mse, retagged)[0]
        assert loss_k3 == pytest.approx(loss_mse, rel=1e-9, abs=1e-15)


@pytest.fixture
def ks_pairs_setup():
    trajectory = simulate_ks(KsParams(points=32, domain_length=32.0, num_output_steps=14, seed=4, warmup_time=2.0))
    schedule = make_schedule(num_steps=3)
    lam = scaling_vector(trajectory.grid)
    pairs = make_training_pairs(trajectory, schedule, lam, np.random.default_rng(2), pairs_per_transition=6)
    return pairs, schedule, lam
