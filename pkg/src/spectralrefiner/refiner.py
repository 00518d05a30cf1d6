"""Diffusion-style refinement in spectral space: forward noising, blurred
velocity targets, exact velocity-to-sample reconstruction, posterior
transitions, and the per-timestep refinement loop.

The velocity target and the reconstruction are exact algebraic inverses of
each other by construction; the round-trip identity is the load-bearing
consistency check between them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .schedules import RefinementSchedule, step_coefficients
from .spectral import (
    FrequencyScaling,
    RealField,
    SpectralField,
    dft_forward,
    dft_inverse,
    sample_spectral_noise,
)


class VelocityPredictor(Protocol):
    """Anything that estimates the velocity target from a noisy latent, the
    conditioning state, and the refinement-step index."""

    def predict(self, u_z: SpectralField, cond: SpectralField, k: int) -> SpectralField: ...


@dataclass(frozen=True)
class TrainingPair:
    """One supervised example: (noisy latent, conditioning, step) -> velocity."""

    u_z: SpectralField
    cond: SpectralField
    k: int
    target: SpectralField


@dataclass
class RefinerState:
    """Mutable loop state while refining one timestep."""

    u_z: SpectralField
    cond: SpectralField
    k: int


def _check_same_layout(a: SpectralField, b: SpectralField, what: str) -> None:
    if a.coefficients.shape != b.coefficients.shape or a.grid != b.grid:
        raise ValueError(
            f"{what}: shape/grid mismatch {a.coefficients.shape} vs {b.coefficients.shape}"
        )


def forward_noise(
    u_x: SpectralField,
    k: int,
    noise: SpectralField,
    schedule: RefinementSchedule,
    lam: FrequencyScaling,
) -> SpectralField:
    """Noise the clean spectral state to step k: alpha_k d_k * u_x + sigma_k * noise."""
    _check_same_layout(u_x, noise, "forward_noise")
    c = step_coefficients(schedule, k, lam)
    u_z = c.alpha * (c.d * u_x.coefficients) + c.sigma * noise.coefficients
    return u_x.with_coefficients(u_z)


def v_target(
    u_x: SpectralField,
    noise: SpectralField,
    k: int,
    schedule: RefinementSchedule,
    lam: FrequencyScaling,
) -> SpectralField:
    """Velocity training target at step k.

    The first term is the constant-radius velocity (alpha eps - sigma d x)/r;
    the second accounts for the per-mode radius change, proportional to
    d(r^2)/dphi times the noised latent. With no blur this reduces exactly to
    alpha eps - sigma x, and at k=0 it is exactly the negated clean state.
    """
    _check_same_layout(u_x, noise, "v_target")
    c = step_coefficients(schedule, k, lam)
    x = u_x.coefficients
    eps = noise.coefficients
    u_z = c.alpha * (c.d * x) + c.sigma * eps
    v = (c.alpha * eps - c.sigma * (c.d * x)) / c.r + (c.dr2_dphi / (2.0 * c.r**2)) * u_z
    return u_x.with_coefficients(v)


def reconstruct_x(
    u_z: SpectralField,
    v_hat: SpectralField,
    k: int,
    schedule: RefinementSchedule,
    lam: FrequencyScaling,
) -> SpectralField:
    """Recover the clean spectral state from the latent and a velocity estimate.

    Exact algebraic inverse of (:func:`forward_noise`, :func:`v_target`):

        x = ((alpha + sigma * dr2_dphi / (2 r)) u_z - sigma r v) / d

    Raises if any blur entry is zero (prevented by d_min or the up direction).
    """
    _check_same_layout(u_z, v_hat, "reconstruct_x")
    c = step_coefficients(schedule, k, lam)
    if np.any(c.d == 0.0):
        raise ValueError(f"blur vector has zero entries at step {k}; use d_min > 0")
    z = u_z.coefficients
    x = ((c.alpha + c.sigma * c.dr2_dphi / (2.0 * c.r)) * z - c.sigma * c.r * v_hat.coefficients) / c.d
    return u_z.with_coefficients(x)


def posterior_step(
    u_z_t: SpectralField,
    x_hat: SpectralField,
    t_index: int,
    s_index: int,
    schedule: RefinementSchedule,
    lam: FrequencyScaling,
    rng,
) -> SpectralField:
    """Ancestral transition from rung t to the adjacent cleaner rung s.

    Step indices follow the refinement ladder (k=0 pure noise, k=K cleanest),
    so the denoising chain moves s_index = t_index + 1. Samples from the
    Gaussian posterior with vectorized coefficients (alpha_vec = alpha * d
    per mode, sigma shared across modes):

        var = (1/sigma_s^2 + a_ts^2/s_ts^2)^-1
        mu  = var * (a_ts/s_ts^2 * u_t + a_s/sigma_s^2 * x_hat)

    with a_ts = a_t/a_s and s_ts^2 = sigma_t^2 - a_ts^2 sigma_s^2. The noise
    is drawn directly in spectral space. Targeting the pure-noise rung
    (s_index = 0, where alpha = 0) is an error; the sampling loop never
    requests it.
    """
    _check_same_layout(u_z_t, x_hat, "posterior_step")
    if s_index != t_index + 1:
        raise ValueError(
            f"posterior step must target the adjacent cleaner rung, got {t_index} -> {s_index}"
        )
    ct = step_coefficients(schedule, t_index, lam)
    cs = step_coefficients(schedule, s_index, lam)
    a_t = ct.alpha * ct.d
    a_s = cs.alpha * cs.d
    if np.any(a_s == 0.0):
        raise ValueError("posterior undefined at the pure-noise rung (alpha_s = 0)")
    a_ts = a_t / a_s
    sigma2_ts = ct.sigma**2 - a_ts**2 * cs.sigma**2
    if cs.sigma == 0.0:
        # degenerate posterior: all mass at the rescaled estimate
        return u_z_t.with_coefficients(a_s * x_hat.coefficients)
    var = 1.0 / (1.0 / cs.sigma**2 + a_ts**2 / sigma2_ts)
    mu = var * ((a_ts / sigma2_ts) * u_z_t.coefficients + (a_s / cs.sigma**2) * x_hat.coefficients)
    noise = sample_spectral_noise(u_z_t.grid, rng, u_z_t.channels)
    return u_z_t.with_coefficients(mu + np.sqrt(var) * noise.coefficients)


def refine_step(
    prev_state: RealField,
    predictor: VelocityPredictor,
    schedule: RefinementSchedule,
    lam: FrequencyScaling,
    rng,
    sampler: str = "renoise",
) -> RealField:
    """Predict the next PDE state from the previous one, refining K times.

    Step 0 predicts from pure spectral noise (the rough, regression-style
    output); each later step re-noises the current estimate at level k,
    predicts the velocity, and reconstructs. ``sampler="posterior"`` switches
    the update to ancestral transitions through the Gaussian posterior.
    Deterministic given the rng seed.
    """
    if sampler not in ("renoise", "posterior"):
        raise ValueError(f"unknown sampler {sampler!r}")
    rng = np.random.default_rng(rng)
    cond = dft_forward(prev_state)
    grid, channels = cond.grid, cond.channels

    u_z = sample_spectral_noise(grid, rng, channels)
    v_hat = predictor.predict(u_z, cond, 0)
    _check_finite_prediction(v_hat, 0)
    x_hat = reconstruct_x(u_z, v_hat, 0, schedule, lam)

    if sampler == "renoise":
        for k in range(1, schedule.num_steps + 1):
            noise = sample_spectral_noise(grid, rng, channels)
            u_z = forward_noise(x_hat, k, noise, schedule, lam)
            v_hat = predictor.predict(u_z, cond, k)
            _check_finite_prediction(v_hat, k)
            x_hat = reconstruct_x(u_z, v_hat, k, schedule, lam)
    else:
        # ancestral chain: walk the posterior from the pure-noise rung upward
        for s in range(1, schedule.num_steps + 1):
            u_z = posterior_step(u_z, x_hat, s - 1, s, schedule, lam, rng)
            v_hat = predictor.predict(u_z, cond, s)
            _check_finite_prediction(v_hat, s)
            x_hat = reconstruct_x(u_z, v_hat, s, schedule, lam)
    return dft_inverse(x_hat)


def _check_finite_prediction(v_hat: SpectralField, k: int) -> None:
    if not np.all(np.isfinite(v_hat.coefficients)):
        raise ValueError(f"predictor returned non-finite velocity at step {k}")


def make_training_pairs(
    trajectory,
    schedule: RefinementSchedule,
    lam: FrequencyScaling,
    rng,
    pairs_per_transition: int = 1,
) -> list[TrainingPair]:
    """Turn consecutive trajectory states into velocity-regression pairs.

    For each transition (u_t, u_{t+dt}) and each of ``pairs_per_transition``
    draws: sample k uniformly from 0..K, noise the next state to step k, and
    record the velocity target.
    """
    if len(trajectory.times) < 2:
        raise ValueError("trajectory must contain at least two states")
    if pairs_per_transition < 1:
        raise ValueError("pairs_per_transition must be >= 1")
    rng = np.random.default_rng(rng)
    pairs: list[TrainingPair] = []
    num_states = len(trajectory.times)
    for i in range(num_states - 1):
        cond = dft_forward(trajectory.state(i))
        u_next = dft_forward(trajectory.state(i + 1))
        for _ in range(pairs_per_transition):
            k = int(rng.integers(0, schedule.num_steps + 1))
            noise = sample_spectral_noise(cond.grid, rng, cond.channels)
            u_z = forward_noise(u_next, k, noise, schedule, lam)
            target = v_target(u_next, noise, k, schedule, lam)
            pairs.append(TrainingPair(u_z=u_z, cond=cond, k=k, target=target))
    return pairs


class OracleVelocityPredictor:
    """Plug-in oracle that emits the exact velocity for a known target state.

    Recovers the effective noise from the latent, then returns the true
    velocity target, so reconstruction returns the target state exactly
    whatever noise the sampler drew. Advances to the next target each time a
    fresh refinement loop starts (k=0), which makes it usable inside
    autoregressive rollouts.
    """

    def __init__(
        self,
        targets: Sequence[SpectralField],
        schedule: RefinementSchedule,
        lam: FrequencyScaling,
    ):
        self._targets = list(targets)
        self._schedule = schedule
        self._lam = lam
        self._cursor = -1

    def predict(self, u_z: SpectralField, cond: SpectralField, k: int) -> SpectralField:
        if k == 0:
            self._cursor += 1
        x = self._targets[self._cursor % len(self._targets)]
        c = step_coefficients(self._schedule, k, self._lam)
        eps = (u_z.coefficients - c.alpha * (c.d * x.coefficients)) / c.sigma
        return v_target(x, x.with_coefficients(eps), k, self._schedule, self._lam)
