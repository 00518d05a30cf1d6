"""Refinement-schedule algebra: scalar noise ladder, per-mode blur vectors,
radius, and the exact radius-change term needed by the blurred velocity
target.

Step index k runs 0..K with k=0 the initial prediction (alpha=0, sigma=1)
and k=K the cleanest step (sigma=sigma_min). The normalized step time is
t = k/K. All per-mode quantities are functions of the frequency scaling
vector Lambda.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import FrequencyScaling

DIRECTIONS = ("none", "down", "up")
BLUR_EXPONENTS = ("sin4", "sin2", "cos2")


@dataclass(frozen=True)
class RefinementSchedule:
    """Noise/blur schedule shared by training and sampling.

    ``alphas``/``sigmas`` hold the scalar ladder for steps 0..K with
    alpha_k^2 + sigma_k^2 = 1. Use :func:`make_schedule` to construct a
    validated instance.
    """

    num_steps: int
    sigma_min: float
    sigma_b: float
    direction: str
    d_min: float
    blur_exponent: str
    alphas: np.ndarray
    sigmas: np.ndarray


def make_schedule(
    num_steps: int = 3,
    sigma_min: float = 1e-3,
    sigma_b: float = 2.0,
    direction: str = "down",
    d_min: float = 1e-3,
    blur_exponent: str = "sin4",
) -> RefinementSchedule:
    """Build a geometric noise ladder sigma_k = sigma_min^(k/K).

    sigma_0 is exactly 1 and alpha_0 exactly 0, which makes the k=0 velocity
    target collapse to plain negated-state regression. ``num_steps`` = 0 is
    the degenerate single-prediction schedule (no refinement loop).
    """
    if num_steps < 0:
        raise ValueError("num_steps must be >= 0")
    if not 0.0 < sigma_min < 1.0:
        raise ValueError(f"sigma_min must lie in (0, 1), got {sigma_min}")
    if sigma_b < 0:
        raise ValueError("sigma_b must be >= 0")
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    if not 0.0 <= d_min < 1.0:
        raise ValueError(f"d_min must lie in [0, 1), got {d_min}")
    if blur_exponent not in BLUR_EXPONENTS:
        raise ValueError(f"blur_exponent must be one of {BLUR_EXPONENTS}, got {blur_exponent!r}")

    k = np.arange(num_steps + 1, dtype=np.float64)
    exponents = k / num_steps if num_steps > 0 else k
    sigmas = sigma_min**exponents
    alphas = np.sqrt(1.0 - sigmas**2)
    if num_steps > 0:
        if not np.all(np.diff(sigmas) < 0):
            raise ValueError("sigma ladder is not strictly decreasing")
        if not np.all(np.diff(alphas) > 0):
            raise ValueError("alpha ladder is not strictly increasing")
    return RefinementSchedule(
        num_steps=num_steps,
        sigma_min=float(sigma_min),
        sigma_b=float(sigma_b),
        direction=direction,
        d_min=float(d_min),
        blur_exponent=blur_exponent,
        alphas=alphas,
        sigmas=sigmas,
    )


def _check_step(schedule: RefinementSchedule, k: int) -> None:
    if not 0 <= k <= schedule.num_steps:
        raise ValueError(f"step {k} outside 0..{schedule.num_steps}")


def step_time(schedule: RefinementSchedule, k: int) -> float:
    _check_step(schedule, k)
    if schedule.num_steps == 0:
        return 0.0
    return k / schedule.num_steps


def _blur_profile(schedule: RefinementSchedule, t: float) -> float:
    half = np.pi * t / 2.0
    if schedule.blur_exponent == "sin4":
        return np.sin(half) ** 4
    if schedule.blur_exponent == "sin2":
        return np.sin(half) ** 2
    return np.cos(half) ** 2


def _blur_profile_derivative(schedule: RefinementSchedule, t: float) -> float:
    half = np.pi * t / 2.0
    if schedule.blur_exponent == "sin4":
        return 2.0 * np.pi * np.sin(half) ** 3 * np.cos(half)
    if schedule.blur_exponent == "sin2":
        return (np.pi / 2.0) * np.sin(np.pi * t)
    return -(np.pi / 2.0) * np.sin(np.pi * t)


def tau_at(schedule: RefinementSchedule, k: int) -> float:
    """Blur amount tau at step k: (sigma_b^2 / 2) times the chosen profile."""
    t = step_time(schedule, k)
    return 0.5 * schedule.sigma_b**2 * _blur_profile(schedule, t)


def tau_derivative_at(schedule: RefinementSchedule, k: int) -> float:
    """d(tau)/dt at t = k/K."""
    t = step_time(schedule, k)
    return 0.5 * schedule.sigma_b**2 * _blur_profile_derivative(schedule, t)


def _lam_array(lam) -> np.ndarray:
    if isinstance(lam, FrequencyScaling):
        return lam.lam
    return np.asarray(lam, dtype=np.float64)


def blur_at(schedule: RefinementSchedule, k: int, lam) -> np.ndarray:
    """Per-mode signal multiplier d at step k.

    direction=none gives exactly ones; down gives
    (1 - d_min) * exp(-Lambda tau) + d_min; up gives exp(+Lambda tau)
    with no floor (d >= 1 there).
    """
    lam = _lam_array(lam)
    if schedule.direction == "none":
        return np.ones_like(lam)
    tau = tau_at(schedule, k)
    if schedule.direction == "down":
        return (1.0 - schedule.d_min) * np.exp(-lam * tau) + schedule.d_min
    return np.exp(lam * tau)


def blur_derivative_at(schedule: RefinementSchedule, k: int, lam) -> np.ndarray:
    """d(d)/dt at t = k/K, elementwise over modes."""
    lam = _lam_array(lam)
    if schedule.direction == "none":
        return np.zeros_like(lam)
    tau = tau_at(schedule, k)
    dtau = tau_derivative_at(schedule, k)
    if schedule.direction == "down":
        return -(1.0 - schedule.d_min) * lam * dtau * np.exp(-lam * tau)
    return lam * dtau * np.exp(lam * tau)


def radius_at(schedule: RefinementSchedule, k: int, lam) -> np.ndarray:
    """Per-mode radius r = sqrt(alpha^2 d^2 + sigma^2); identically 1 in the
    unblurred (variance-preserving) case."""
    lam = _lam_array(lam)
    if schedule.direction == "none":
        return np.ones_like(lam)
    _check_step(schedule, k)
    alpha = schedule.alphas[k]
    sigma = schedule.sigmas[k]
    d = blur_at(schedule, k, lam)
    return np.sqrt(alpha**2 * d**2 + sigma**2)


def dr2_dphi_at(schedule: RefinementSchedule, k: int, lam) -> np.ndarray:
    """Exact derivative of r^2 with respect to phi = arctan(sigma/alpha).

    Derived by the chain rule through t(phi): with sigma = sin(phi) and
    sigma(t) = sigma_min^t,

        d(r^2)/dphi = 2 alpha sigma (1 - d^2) + 2 alpha^3 d d'(t) / sigma'(t),

    where sigma'(t) = sigma ln(sigma_min). Zero elementwise at k=0 (alpha=0),
    at Lambda=0, and everywhere when direction=none.
    """
    lam = _lam_array(lam)
    if schedule.direction == "none":
        return np.zeros_like(lam)
    _check_step(schedule, k)
    alpha = schedule.alphas[k]
    sigma = schedule.sigmas[k]
    d = blur_at(schedule, k, lam)
    ddt = blur_derivative_at(schedule, k, lam)
    sigma_prime = sigma * np.log(schedule.sigma_min)
    return 2.0 * alpha * sigma * (1.0 - d**2) + 2.0 * alpha**3 * d * ddt / sigma_prime


def radius_squared_of_phi(schedule: RefinementSchedule, phi: float, lam) -> np.ndarray:
    """r^2 as a function of the angle phi, for derivative cross-checks.

    Inverts phi -> t via sigma = sin(phi), t = ln(sigma)/ln(sigma_min), then
    evaluates the same blur/radius algebra at that continuous time.
    """
    lam = _lam_array(lam)
    sigma = np.sin(phi)
    if not 0.0 < sigma <= 1.0:
        raise ValueError(f"phi {phi} maps outside the schedule range")
    t = np.log(sigma) / np.log(schedule.sigma_min)
    alpha = np.sqrt(1.0 - sigma**2)
    if schedule.direction == "none":
        d = np.ones_like(lam)
    else:
        tau = 0.5 * schedule.sigma_b**2 * _blur_profile(schedule, t)
        if schedule.direction == "down":
            d = (1.0 - schedule.d_min) * np.exp(-lam * tau) + schedule.d_min
        else:
            d = np.exp(lam * tau)
    return alpha**2 * d**2 + sigma**2


@dataclass(frozen=True)
class StepCoefficients:
    """All schedule quantities needed at one refinement step."""

    k: int
    alpha: float
    sigma: float
    tau: float
    phi: float
    d: np.ndarray
    r: np.ndarray
    dr2_dphi: np.ndarray

    @property
    def alpha_vec(self) -> np.ndarray:
        return self.alpha * self.d


def step_coefficients(schedule: RefinementSchedule, k: int, lam) -> StepCoefficients:
    _check_step(schedule, k)
    alpha = float(schedule.alphas[k])
    sigma = float(schedule.sigmas[k])
    return StepCoefficients(
        k=k,
        alpha=alpha,
        sigma=sigma,
        tau=float(tau_at(schedule, k)),
        phi=float(np.arctan2(sigma, alpha)),
        d=blur_at(schedule, k, lam),
        r=radius_at(schedule, k, lam),
        dr2_dphi=dr2_dphi_at(schedule, k, lam),
    )


def schedule_table(schedule: RefinementSchedule, lam_values=(0.0, 0.25, 0.5, 0.75, 1.0)) -> dict:
    """Schedule audit table at representative Lambda values.

    Returns column name -> list of per-step values, suitable for CSV dumps.
    """
    lam = np.asarray(lam_values, dtype=np.float64)
    cols: dict[str, list] = {"k": [], "t": [], "alpha": [], "sigma": [], "tau": []}
    suffixes = [f"lam{int(round(100 * v)):03d}" for v in lam]
    for name in ("d", "r", "dr2dphi"):
        for s in suffixes:
            cols[f"{name}_{s}"] = []
    for k in range(schedule.num_steps + 1):
        cols["k"].append(k)
        cols["t"].append(step_time(schedule, k))
        cols["alpha"].append(float(schedule.alphas[k]))
        cols["sigma"].append(float(schedule.sigmas[k]))
        cols["tau"].append(float(tau_at(schedule, k)))
        d = blur_at(schedule, k, lam)
        r = radius_at(schedule, k, lam)
        dr2 = dr2_dphi_at(schedule, k, lam)
        for j, s in enumerate(suffixes):
            cols[f"d_{s}"].append(float(d[j]))
            cols[f"r_{s}"].append(float(r[j]))
            cols[f"dr2dphi_{s}"].append(float(dr2[j]))
    return cols
