"""Per-step, per-mode complex linear velocity predictor fit by exact ridge
least squares. The diagonal structure keeps fitting closed-form and the whole
refinement pipeline deterministic; cross-mode coupling is deliberately not
modeled."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .refiner import TrainingPair
from .spectral import Grid, SpectralField

MODEL_FORMAT_VERSION = 1
MIN_PAIRS_PER_STEP = 3

FEATURE_UZ = "uz"
FEATURE_COND = "cond"


@dataclass(frozen=True)
class PerModeLinearPredictor:
    """v_hat[m] = A[k,c,m] * u_z[m] + B[k,c,m] * cond[m] + c0[k,c,m].

    Coefficient arrays have shape (K+1, channels, *mode_shape). Inactive
    feature blocks (see ``fit_least_squares``) are stored as zeros.
    """

    grid: Grid
    channels: tuple[str, ...]
    num_steps: int
    coeff_uz: np.ndarray
    coeff_cond: np.ndarray
    intercept: np.ndarray
    ridge: float

    def predict(self, u_z: SpectralField, cond: SpectralField, k: int) -> SpectralField:
        if not 0 <= k <= self.num_steps:
            raise ValueError(f"step {k} outside trained range 0..{self.num_steps}")
        if u_z.coefficients.shape != self.coeff_uz.shape[1:]:
            raise ValueError(
                f"input shape {u_z.coefficients.shape} != trained shape {self.coeff_uz.shape[1:]}"
            )
        v = (
            self.coeff_uz[k] * u_z.coefficients
            + self.coeff_cond[k] * cond.coefficients
            + self.intercept[k]
        )
        return u_z.with_coefficients(v)


def predict(model: PerModeLinearPredictor, u_z: SpectralField, cond: SpectralField, k: int) -> SpectralField:
    return model.predict(u_z, cond, k)


def fit_least_squares(
    pairs: list[TrainingPair],
    num_steps: int,
    ridge: float = 1e-8,
    features: tuple[str, ...] = (FEATURE_UZ, FEATURE_COND),
) -> PerModeLinearPredictor:
    """Solve the per-(step, channel, mode) complex ridge regression by normal
    equations.

    Minimizes sum |v - (A u_z + B cond + c)|^2 + ridge (|A|^2 + |B|^2); the
    intercept is never penalized. ``features`` selects which linear blocks
    are active (nested-model comparisons); inactive blocks are zero in the
    returned model. Requires at least MIN_PAIRS_PER_STEP pairs at every step.

    Raises ``np.linalg.LinAlgError`` with a hint to use ridge > 0 if the
    normal matrix is singular.
    """
    if not pairs:
        raise ValueError("no training pairs")
    for f in features:
        if f not in (FEATURE_UZ, FEATURE_COND):
            raise ValueError(f"unknown feature {f!r}")
    grid = pairs[0].u_z.grid
    channels = pairs[0].u_z.channels
    coeff_shape = (num_steps + 1, len(channels), *grid.mode_shape)
    coeff_uz = np.zeros(coeff_shape, dtype=np.complex128)
    coeff_cond = np.zeros(coeff_shape, dtype=np.complex128)
    intercept = np.zeros(coeff_shape, dtype=np.complex128)

    by_step: dict[int, list[TrainingPair]] = {k: [] for k in range(num_steps + 1)}
    for p in pairs:
        if p.k not in by_step:
            raise ValueError(f"pair has step {p.k} outside 0..{num_steps}")
        by_step[p.k].append(p)

    for k, step_pairs in by_step.items():
        if len(step_pairs) < MIN_PAIRS_PER_STEP:
            raise ValueError(
                f"step {k} has {len(step_pairs)} pairs; need >= {MIN_PAIRS_PER_STEP}"
            )
        n = len(step_pairs)
        flat = (len(channels) * int(np.prod(grid.mode_shape)),)
        uz = np.stack([p.u_z.coefficients.reshape(flat) for p in step_pairs])
        cond = np.stack([p.cond.coefficients.reshape(flat) for p in step_pairs])
        target = np.stack([p.target.coefficients.reshape(flat) for p in step_pairs])

        columns = []
        penalized = []
        if FEATURE_UZ in features:
            columns.append(uz)
            penalized.append(True)
        if FEATURE_COND in features:
            columns.append(cond)
            penalized.append(True)
        columns.append(np.ones_like(uz))
        penalized.append(False)
        design = np.stack(columns, axis=-1)  # (n, modes, p)

        gram = np.einsum("nmi,nmj->mij", np.conj(design), design)
        rhs = np.einsum("nmi,nm->mi", np.conj(design), target)
        reg = np.diag([ridge if pen else 0.0 for pen in penalized]).astype(np.complex128)
        try:
            theta = np.linalg.solve(gram + reg, rhs[..., None])[..., 0]  # (modes, p)
        except np.linalg.LinAlgError as err:
            raise np.linalg.LinAlgError(
                f"singular normal matrix at step {k}; set ridge > 0 to regularize"
            ) from err

        col = 0
        full_shape = (len(channels), *grid.mode_shape)
        if FEATURE_UZ in features:
            coeff_uz[k] = theta[:, col].reshape(full_shape)
            col += 1
        if FEATURE_COND in features:
            coeff_cond[k] = theta[:, col].reshape(full_shape)
            col += 1
        intercept[k] = theta[:, col].reshape(full_shape)

    return PerModeLinearPredictor(
        grid=grid,
        channels=channels,
        num_steps=num_steps,
        coeff_uz=coeff_uz,
        coeff_cond=coeff_cond,
        intercept=intercept,
        ridge=float(ridge),
    )


def training_loss(model: PerModeLinearPredictor, pairs: list[TrainingPair]) -> dict[int, float]:
    """Mean squared residual per step over the given pairs."""
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    for p in pairs:
        v_hat = model.predict(p.u_z, p.cond, p.k)
        resid = np.mean(np.abs(v_hat.coefficients - p.target.coefficients) ** 2)
        sums[p.k] = sums.get(p.k, 0.0) + float(resid)
        counts[p.k] = counts.get(p.k, 0) + 1
    return {k: sums[k] / counts[k] for k in sorted(sums)}


def _complex_to_json(arr: np.ndarray):
    stacked = np.stack([arr.real, arr.imag], axis=-1)
    return stacked.tolist()


def _complex_from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    return arr[..., 0] + 1j * arr[..., 1]


def save_model(model: PerModeLinearPredictor, path) -> None:
    """Serialize losslessly to JSON (complex numbers as [re, im] pairs).

    The encoding is canonical: saving a loaded model reproduces the file
    byte for byte.
    """
    doc = {
        "version": MODEL_FORMAT_VERSION,
        "num_steps": model.num_steps,
        "grid": {"points": list(model.grid.points), "spacing": list(model.grid.spacing)},
        "channels": list(model.channels),
        "ridge": model.ridge,
        "coeff_uz": _complex_to_json(model.coeff_uz),
        "coeff_cond": _complex_to_json(model.coeff_cond),
        "intercept": _complex_to_json(model.intercept),
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
    os.replace(tmp, path)


def load_model(path) -> PerModeLinearPredictor:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"model format version {version} != supported {MODEL_FORMAT_VERSION}")
    grid = Grid(tuple(doc["grid"]["points"]), tuple(doc["grid"]["spacing"]))
    return PerModeLinearPredictor(
        grid=grid,
        channels=tuple(doc["channels"]),
        num_steps=int(doc["num_steps"]),
        coeff_uz=_complex_from_json(doc["coeff_uz"]),
        coeff_cond=_complex_from_json(doc["coeff_cond"]),
        intercept=_complex_from_json(doc["intercept"]),
        ridge=float(doc["ridge"]),
    )
