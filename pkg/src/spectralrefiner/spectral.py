"""Spectral core: orthonormal FFTs on periodic grids, complex-Gaussian noise
drawn directly in frequency space, per-mode frequency scaling, and power
spectra.

All transforms use the real-input (half-spectrum) layout and the orthonormal
normalization (1/sqrt(N) both ways), so Parseval holds without extra factors
and white real-space noise maps to unit-variance complex spectral noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Hermitian-symmetry violations beyond this (relative to the field scale)
# make a half-spectrum non-invertible to a real field.
HERMITIAN_RTOL = 1e-8

_SQRT_HALF = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid in 1 or 2 dimensions.

    Parameters
    ----------
    points : tuple of int
        Grid points per dimension, each even (required by the half-spectrum
        layout and 2/3 dealiasing). Array axes follow this order; the last
        axis is the one halved by the real-input transform.
    spacing : tuple of float
        Grid spacing per dimension, same order as ``points``.
    """

    points: tuple[int, ...]
    spacing: tuple[float, ...]

    def __post_init__(self):
        points = tuple(int(n) for n in self.points)
        spacing = tuple(float(s) for s in self.spacing)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "spacing", spacing)
        if len(points) not in (1, 2):
            raise ValueError(f"grid must be 1D or 2D, got {len(points)} dims")
        if len(spacing) != len(points):
            raise ValueError("spacing and points must have the same length")
        if any(n <= 0 or n % 2 != 0 for n in points):
            raise ValueError(f"points per dim must be positive and even, got {points}")
        if any(s <= 0 for s in spacing):
            raise ValueError(f"spacing must be positive, got {spacing}")

    @property
    def ndim(self) -> int:
        return len(self.points)

    @property
    def num_points(self) -> int:
        return int(np.prod(self.points))

    @property
    def mode_shape(self) -> tuple[int, ...]:
        """Shape of the retained half-spectrum (last axis halved)."""
        *lead, last = self.points
        return (*lead, last // 2 + 1)

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(n * s for n, s in zip(self.points, self.spacing))


@dataclass(frozen=True)
class RealField:
    """Real grid field with named channels; values shaped (channels, *points)."""

    grid: Grid
    values: np.ndarray
    channels: tuple[str, ...] = ("u",)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        channels = tuple(str(c) for c in self.channels)
        expected = (len(channels), *self.grid.points)
        if values.shape != expected:
            raise ValueError(f"values shape {values.shape} != expected {expected}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channels", channels)

    @property
    def num_channels(self) -> int:
        return len(self.channels)


@dataclass(frozen=True)
class SpectralField:
    """Half-spectrum complex coefficients of a real field.

    Layout: 1D keeps modes 0..N/2; 2D keeps full rows x half columns
    (last axis 0..N/2). Normalization is orthonormal and recorded
    explicitly; any other convention is rejected.
    """

    grid: Grid
    coefficients: np.ndarray
    channels: tuple[str, ...] = ("u",)
    normalization: str = field(default="ortho")

    def __post_init__(self):
        coeff = np.asarray(self.coefficients, dtype=np.complex128)
        channels = tuple(str(c) for c in self.channels)
        expected = (len(channels), *self.grid.mode_shape)
        if coeff.shape != expected:
            raise ValueError(f"coefficients shape {coeff.shape} != expected {expected}")
        if self.normalization != "ortho":
            raise ValueError(f"unsupported normalization {self.normalization!r}")
        object.__setattr__(self, "coefficients", coeff)
        object.__setattr__(self, "channels", channels)

    @property
    def num_channels(self) -> int:
        return len(self.channels)

    def with_coefficients(self, coefficients: np.ndarray) -> "SpectralField":
        """Same grid/channels, new coefficient array."""
        return SpectralField(self.grid, coefficients, self.channels)


def integer_wavenumbers(grid: Grid) -> list[np.ndarray]:
    """Integer wavenumbers per axis, broadcastable over ``grid.mode_shape``.

    The last axis carries 0..N/2 (rfft order); leading axes carry the full
    signed fftfreq order.
    """
    axes = []
    nd = grid.ndim
    for ax, n in enumerate(grid.points):
        if ax == nd - 1:
            k = np.arange(n // 2 + 1)
        else:
            k = np.rint(np.fft.fftfreq(n) * n).astype(np.int64)
        shape = [1] * nd
        shape[ax] = k.size
        axes.append(k.reshape(shape))
    return axes


def _self_conjugate_mask(grid: Grid) -> np.ndarray:
    """True where a retained mode is its own conjugate partner (must be real)."""
    mask = np.zeros(grid.mode_shape, dtype=bool)
    if grid.ndim == 1:
        mask[0] = True
        mask[-1] = True
    else:
        ny = grid.points[0]
        for row in (0, ny // 2):
            for col in (0, grid.mode_shape[-1] - 1):
                mask[row, col] = True
    return mask


def hermitian_violation(spec: SpectralField) -> float:
    """Largest absolute deviation from the Hermitian symmetry implied by the
    half-spectrum layout (self-conjugate modes real; in 2D the kx=0 and
    kx=Nyquist columns conjugate-symmetric in ky)."""
    coeff = spec.coefficients
    worst = 0.0
    if spec.grid.ndim == 1:
        worst = max(worst, float(np.max(np.abs(coeff[:, [0, -1]].imag), initial=0.0)))
    else:
        ny = spec.grid.points[0]
        rows = np.arange(ny)
        mirror = (-rows) % ny
        for col in (0, spec.grid.mode_shape[-1] - 1):
            column = coeff[:, :, col]
            worst = max(worst, float(np.max(np.abs(column - np.conj(column[:, mirror])))))
    return worst


def dft_forward(real_field: RealField) -> SpectralField:
    """Orthonormal real-to-complex transform over the spatial axes.

    Round-trips with :func:`dft_inverse` to 1e-12 relative error.
    """
    values = real_field.values
    spatial_axes = tuple(range(1, values.ndim))
    coeff = np.fft.rfftn(values, axes=spatial_axes, norm="ortho")
    return SpectralField(real_field.grid, coeff, real_field.channels)


def dft_inverse(spec: SpectralField) -> RealField:
    """Orthonormal complex-to-real transform.

    The half-spectrum layout guarantees a real inverse once Hermitian
    symmetry holds, so the residual-imaginary check reduces to validating
    that symmetry on the modes the layout leaves free.

    Raises
    ------
    ValueError
        If the coefficients violate Hermitian symmetry beyond
        ``HERMITIAN_RTOL`` relative to the field scale.
    """
    coeff = spec.coefficients
    scale = float(np.max(np.abs(coeff), initial=0.0))
    violation = hermitian_violation(spec)
    if violation > HERMITIAN_RTOL * max(scale, 1e-300):
        raise ValueError(
            f"Hermitian symmetry violated: residual {violation:.3e} exceeds "
            f"{HERMITIAN_RTOL:.0e} of field scale {scale:.3e}"
        )
    spatial_axes = tuple(range(1, coeff.ndim))
    values = np.fft.irfftn(coeff, s=spec.grid.points, axes=spatial_axes, norm="ortho")
    return RealField(spec.grid, values, spec.channels)


def sample_spectral_noise(grid: Grid, rng, channels: tuple[str, ...] = ("u",)) -> SpectralField:
    """Draw spectral white noise directly in frequency space.

    Each retained non-self-conjugate mode is circular complex Gaussian with
    unit total variance (real and imaginary parts variance 1/2 each);
    self-conjugate modes are real with variance 1. The resulting field is
    distributed identically to ``dft_forward`` of i.i.d. standard-normal
    real noise, but costs no transform.

    ``rng`` is an integer seed or a ``numpy.random.Generator``.
    """
    rng = np.random.default_rng(rng)
    shape = (len(channels), *grid.mode_shape)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)

    re_scale = np.full(grid.mode_shape, _SQRT_HALF)
    im_scale = np.full(grid.mode_shape, _SQRT_HALF)
    self_conj = _self_conjugate_mask(grid)
    re_scale[self_conj] = 1.0
    im_scale[self_conj] = 0.0
    coeff = re * re_scale + 1j * (im * im_scale)

    if grid.ndim == 2:
        # Columns kx=0 and kx=Nyquist pair rows (ky, -ky); the upper half is
        # determined by conjugation, not drawn independently.
        ny = grid.points[0]
        rows = np.arange(ny)
        mirror = (-rows) % ny
        upper = rows[ny // 2 + 1 :]
        for col in (0, grid.mode_shape[-1] - 1):
            coeff[:, upper, col] = np.conj(coeff[:, mirror[upper], col])

    return SpectralField(grid, coeff, channels)


@dataclass(frozen=True)
class FrequencyScaling:
    """Per-mode frequency scaling: normalized sum of squared integer
    wavenumbers, 0 at DC and 1 at the highest retained mode."""

    grid: Grid
    lam: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=np.float64)
        if lam.shape != self.grid.mode_shape:
            raise ValueError(f"lam shape {lam.shape} != mode shape {self.grid.mode_shape}")
        object.__setattr__(self, "lam", lam)


def scaling_vector(grid: Grid) -> FrequencyScaling:
    """Frequency scaling Lambda = (sum_d k_d^2) / k_max^2 over retained modes."""
    k2 = np.zeros(grid.mode_shape)
    for k in integer_wavenumbers(grid):
        k2 = k2 + k.astype(np.float64) ** 2
    return FrequencyScaling(grid, k2 / k2.max())


def _hermitian_weights(grid: Grid) -> np.ndarray:
    """Multiplicity of each retained mode in the full spectrum (1 or 2)."""
    w = np.full(grid.mode_shape, 2.0)
    if grid.ndim == 1:
        w[0] = 1.0
        w[-1] = 1.0
    else:
        # kx=0 and kx=Nyquist columns retain all ky rows; no partner dropped.
        w[:, 0] = 1.0
        w[:, -1] = 1.0
    return w


@dataclass(frozen=True)
class PowerSpectrum:
    """Radially (2D) or per-mode (1D) binned power table.

    ``power`` sums Hermitian-weighted squared amplitudes per band per
    channel, so band powers add up to the field's total squared values
    (Parseval, orthonormal convention). ``mean_power`` divides by the
    full-spectrum mode count per band and is flat for white noise.
    """

    channels: tuple[str, ...]
    bin_edges: np.ndarray  # (bins + 1,) integer-wavenumber magnitude edges
    count: np.ndarray  # (bins,) full-spectrum modes per band
    power: np.ndarray  # (channels, bins)
    axis: int | None = None

    @property
    def mean_power(self) -> np.ndarray:
        safe = np.where(self.count > 0, self.count, 1.0)
        return self.power / safe

    @property
    def num_bins(self) -> int:
        return self.count.size


def _bin_indices(kmag: np.ndarray, bins: int) -> tuple[np.ndarray, np.ndarray]:
    kmax = float(kmag.max())
    edges = np.linspace(0.0, kmax, bins + 1)
    idx = np.minimum((kmag / (kmax * (1 + 1e-12)) * bins).astype(np.int64), bins - 1)
    return idx, edges


def power_spectrum(real_field: RealField, bins: int | None = None, axis: int | None = None) -> PowerSpectrum:
    """Band-averaged power of a real field.

    Parameters
    ----------
    bins : int, optional
        Number of bands over integer-wavenumber magnitude. Defaults to one
        band per integer shell (1D: one per mode).
    axis : int, optional
        For 2D fields only: compute a 1D spectrum along this spatial axis,
        averaging the per-row spectra over the other axis (the per-direction
        reduction used when comparing anisotropic channels).
    """
    grid = real_field.grid
    if axis is not None:
        if grid.ndim != 2:
            raise ValueError("axis reduction requires a 2D field")
        if axis not in (0, 1):
            raise ValueError(f"axis must be 0 or 1, got {axis}")
        n = grid.points[axis]
        spatial_axis = 1 + axis  # skip channel axis
        coeff = np.fft.rfft(real_field.values, axis=spatial_axis, norm="ortho")
        power_modes = np.abs(coeff) ** 2
        w = np.full(n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        per_mode = np.moveaxis(power_modes, spatial_axis, -1)  # (C, n_other, n_modes)
        per_mode = per_mode.mean(axis=1)
        kmag = np.arange(n // 2 + 1, dtype=np.float64)
        if bins is None:
            bins = n // 2 + 1
        idx, edges = _bin_indices(kmag, bins)
        weighted = per_mode * w
        power = np.zeros((len(real_field.channels), bins))
        count = np.zeros(bins)
        for b in range(bins):
            sel = idx == b
            power[:, b] = weighted[:, sel].sum(axis=1)
            count[b] = w[sel].sum()
        return PowerSpectrum(real_field.channels, edges, count, power, axis=axis)

    if bins is not None and bins < 1:
        raise ValueError("bins must be >= 1")
    spec = dft_forward(real_field)
    kint = integer_wavenumbers(grid)
    k2 = np.zeros(grid.mode_shape)
    for k in kint:
        k2 = k2 + k.astype(np.float64) ** 2
    kmag = np.sqrt(k2)
    if bins is None:
        bins = int(np.floor(kmag.max())) + 1
    idx, edges = _bin_indices(kmag, bins)
    w = _hermitian_weights(grid)
    weighted = (np.abs(spec.coefficients) ** 2) * w

    flat_idx = idx.reshape(-1)
    flat_weighted = weighted.reshape(len(real_field.channels), -1)
    power = np.zeros((len(real_field.channels), bins))
    for c in range(len(real_field.channels)):
        power[c] = np.bincount(flat_idx, weights=flat_weighted[c], minlength=bins)[:bins]
    count = np.bincount(flat_idx, weights=w.reshape(-1), minlength=bins)[:bins]
    return PowerSpectrum(real_field.channels, edges, count, power, axis=None)
