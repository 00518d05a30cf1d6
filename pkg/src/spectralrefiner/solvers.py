"""Desk-scale ground-truth generators: 1D Kuramoto-Sivashinsky and 2D
incompressible Navier-Stokes (vorticity form), both pseudo-spectral on
periodic grids, plus the trajectory container, its binary file format, and
seeded dataset splitting.

KS uses exponential time differencing RK4 on the stiff linear part
(Kassam & Trefethen-style contour coefficients); NS uses RK4 with an exact
integrating factor for the viscous term. Both dealias the nonlinear term
with the 2/3 rule. Everything is bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .spectral import Grid, RealField

BLOWUP_LIMIT = 1e6
TRAJECTORY_DTYPE = "f64"


class BlowUpError(RuntimeError):
    """Simulation left the physical range (|state| > BLOWUP_LIMIT)."""


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered sequence of real grid states.

    ``states`` has shape (times, channels, *grid.points); spacing between
    ``times`` entries must be uniform.
    """

    grid: Grid
    times: np.ndarray
    states: np.ndarray
    channels: tuple[str, ...]

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        states = np.asarray(self.states, dtype=np.float64)
        channels = tuple(str(c) for c in self.channels)
        expected = (times.size, len(channels), *self.grid.points)
        if states.shape != expected:
            raise ValueError(f"states shape {states.shape} != expected {expected}")
        if times.size >= 2:
            dts = np.diff(times)
            if not np.allclose(dts, dts[0], rtol=1e-9, atol=1e-12):
                raise ValueError("trajectory times must be uniformly spaced")
        if not np.all(np.isfinite(states)):
            raise ValueError("trajectory states must be finite")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "channels", channels)

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def dt(self) -> float:
        if self.times.size < 2:
            return 0.0
        return float(self.times[1] - self.times[0])

    def state(self, i: int) -> RealField:
        return RealField(self.grid, self.states[i], self.channels)


def write_trajectory(trajectory: Trajectory, path) -> None:
    """Write the bit-exact trajectory format: one JSON header line, then raw
    little-endian float64 in [time][channel][y][x] order."""
    header = {
        "dims": trajectory.grid.ndim,
        "points": list(trajectory.grid.points),
        "spacing": list(trajectory.grid.spacing),
        "dt": trajectory.dt,
        "channels": list(trajectory.channels),
        "endianness": "little",
        "dtype": TRAJECTORY_DTYPE,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        fh.write(trajectory.states.astype("<f8").tobytes())


def read_trajectory(path) -> Trajectory:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    header = json.loads(header_line.decode("utf-8"))
    if header.get("dtype") != TRAJECTORY_DTYPE or header.get("endianness") != "little":
        raise ValueError(f"unsupported trajectory encoding in {path}")
    grid = Grid(tuple(header["points"]), tuple(header["spacing"]))
    channels = tuple(header["channels"])
    frame = len(channels) * grid.num_points
    raw = np.frombuffer(payload, dtype="<f8")
    if raw.size % frame != 0:
        raise ValueError(f"trajectory payload size {raw.size} not a multiple of frame {frame}")
    num_steps = raw.size // frame
    states = raw.reshape(num_steps, len(channels), *grid.points).astype(np.float64)
    times = np.arange(num_steps) * float(header["dt"])
    return Trajectory(grid, times, states, channels)


def _band_limited_noise(rng, n_modes: int, max_mode: int, amplitude: float) -> np.ndarray:
    """Random half-spectrum limited to |k| <= max_mode, zero mean."""
    coeff = np.zeros(n_modes, dtype=np.complex128)
    m = np.arange(1, min(max_mode, n_modes - 1) + 1)
    coeff[m] = rng.standard_normal(m.size) + 1j * rng.standard_normal(m.size)
    return coeff * amplitude


def _substeps(internal_dt: float, output_dt: float) -> tuple[int, float]:
    if internal_dt <= 0 or output_dt <= 0:
        raise ValueError("time steps must be positive")
    if internal_dt >= output_dt:
        raise ValueError(f"internal dt {internal_dt} must be smaller than output dt {output_dt}")
    n = int(round(output_dt / internal_dt))
    if abs(n * internal_dt - output_dt) > 1e-9 * output_dt:
        raise ValueError(f"output dt {output_dt} is not a multiple of internal dt {internal_dt}")
    return n, output_dt / n


# ---------------------------------------------------------------------------
# Kuramoto-Sivashinsky: u_t = -u u_x - u_xx - u_xxxx
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KsParams:
    """Configuration for the 1D Kuramoto-Sivashinsky run.

    The ETDRK4 integrator treats the stiff linear part (k^2 - k^4) exactly,
    so the practical stability bound is the advective CFL of the dealiased
    nonlinearity: dt < ~dx / max|u| (with max|u| of order a few on the
    attractor, dt = 0.025 at N=64, L=64 has a wide margin).
    """

    domain_length: float = 64.0
    points: int = 64
    dt: float = 0.025
    output_dt: float = 0.5
    num_output_steps: int = 14
    seed: int = 0
    ic_amplitude: float = 0.6
    ic_max_mode: int = 8
    warmup_time: float = 0.0
    initial_state: tuple[float, ...] | None = None


def _ks_initial_condition(params: KsParams) -> np.ndarray:
    if params.initial_state is not None:
        u0 = np.asarray(params.initial_state, dtype=np.float64)
        if u0.shape != (params.points,):
            raise ValueError(f"initial_state must have shape ({params.points},)")
        return u0
    rng = np.random.default_rng(params.seed)
    coeff = _band_limited_noise(rng, params.points // 2 + 1, params.ic_max_mode, 1.0)
    u0 = np.fft.irfft(coeff, n=params.points)
    u0 -= u0.mean()
    peak = np.max(np.abs(u0))
    if peak > 0:
        u0 *= params.ic_amplitude / peak
    return u0


def _etdrk4_coefficients(lin: np.ndarray, dt: float, n_contour: int = 32):
    """Contour-integral phi-function coefficients for ETDRK4 on a diagonal
    linear operator (removes the removable singularities at lin ~ 0)."""
    e_full = np.exp(dt * lin)
    e_half = np.exp(0.5 * dt * lin)
    roots = np.exp(1j * np.pi * (np.arange(n_contour) + 0.5) / n_contour)
    lr = dt * lin[:, None] + roots[None, :]
    q = dt * ((np.exp(lr / 2.0) - 1.0) / lr).mean(axis=1).real
    f1 = dt * ((-4.0 - lr + np.exp(lr) * (4.0 - 3.0 * lr + lr**2)) / lr**3).mean(axis=1).real
    f2 = dt * ((2.0 + lr + np.exp(lr) * (lr - 2.0)) / lr**3).mean(axis=1).real
    f3 = dt * ((-4.0 - 3.0 * lr - lr**2 + np.exp(lr) * (4.0 - lr)) / lr**3).mean(axis=1).real
    return e_full, e_half, q, f1, f2, f3


def simulate_ks(params: KsParams) -> Trajectory:
    """Integrate KS and return ``num_output_steps`` states at ``output_dt``
    spacing (the initial state is the first entry).

    Raises :class:`BlowUpError` naming the output step if |u| exceeds
    ``BLOWUP_LIMIT``. A zero-mean initial condition keeps the spatial mean
    pinned; the k=0 tendency vanishes analytically.
    """
    n = params.points
    n_sub, dt = _substeps(params.dt, params.output_dt)
    grid = Grid((n,), (params.domain_length / n,))
    k = 2.0 * np.pi * np.arange(n // 2 + 1) / params.domain_length
    lin = k**2 - k**4
    ik = 1j * k
    kmax = np.max(k)
    dealias = np.abs(k) <= (2.0 / 3.0) * kmax
    e_full, e_half, q, f1, f2, f3 = _etdrk4_coefficients(lin, dt)

    def nonlinear(u_hat):
        u = np.fft.irfft(u_hat, n=n)
        return dealias * (-0.5 * ik * np.fft.rfft(u**2))

    def step(u_hat):
        n0 = nonlinear(u_hat)
        a = e_half * u_hat + q * n0
        n1 = nonlinear(a)
        b = e_half * u_hat + q * n1
        n2 = nonlinear(b)
        c = e_half * a + q * (2.0 * n2 - n0)
        n3 = nonlinear(c)
        return e_full * u_hat + f1 * n0 + 2.0 * f2 * (n1 + n2) + f3 * n3

    u_hat = np.fft.rfft(_ks_initial_condition(params))
    warmup_steps = int(round(params.warmup_time / dt))
    for _ in range(warmup_steps):
        u_hat = step(u_hat)

    states = np.empty((params.num_output_steps, 1, n))
    states[0, 0] = np.fft.irfft(u_hat, n=n)
    for i in range(1, params.num_output_steps):
        for _ in range(n_sub):
            u_hat = step(u_hat)
        u = np.fft.irfft(u_hat, n=n)
        if np.max(np.abs(u)) > BLOWUP_LIMIT or not np.all(np.isfinite(u)):
            raise BlowUpError(f"KS solution blew up at output step {i}")
        states[i, 0] = u
    times = np.arange(params.num_output_steps) * params.output_dt
    return Trajectory(grid, times, states, ("u",))


# ---------------------------------------------------------------------------
# Incompressible Navier-Stokes, vorticity-streamfunction form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NsParams:
    """Configuration for the 2D incompressible Navier-Stokes run.

    Square periodic grid, vorticity transported pseudo-spectrally; pressure
    is eliminated by the streamfunction construction, so the reconstructed
    velocity is divergence-free to spectral precision. The viscous term uses
    an exact integrating factor; the advective CFL dt < ~dx / max|u| bounds
    the internal step.
    """

    points: int = 64
    spacing: float = 0.25
    viscosity: float = 1e-3
    dt: float = 0.075
    output_dt: float = 1.5
    num_output_steps: int = 14
    seed: int = 0
    ic_amplitude: float = 1.0
    ic_max_mode: int = 8
    warmup_time: float = 0.0
    forcing_amplitude: float = 0.0
    forcing_mode: int = 1
    initial_vorticity: tuple | None = None


def _ns_initial_vorticity(params: NsParams, rng) -> np.ndarray:
    if params.initial_vorticity is not None:
        w0 = np.asarray(params.initial_vorticity, dtype=np.float64)
        if w0.shape != (params.points, params.points):
            raise ValueError(f"initial_vorticity must have shape ({params.points}, {params.points})")
        return w0
    n = params.points
    ky = np.fft.fftfreq(n, d=1.0 / n)[:, None]
    kx = np.arange(n // 2 + 1)[None, :]
    mask = (np.abs(ky) <= params.ic_max_mode) & (kx <= params.ic_max_mode)
    coeff = (rng.standard_normal((n, n // 2 + 1)) + 1j * rng.standard_normal((n, n // 2 + 1))) * mask
    coeff[0, 0] = 0.0
    w0 = np.fft.irfft2(coeff, s=(n, n))
    peak = np.max(np.abs(w0))
    if peak > 0:
        w0 *= params.ic_amplitude / peak
    return w0


def simulate_ns(params: NsParams) -> Trajectory:
    """Integrate NS vorticity and return states with channels
    (vx, vy, vorticity) at ``output_dt`` spacing."""
    n = params.points
    n_sub, dt = _substeps(params.dt, params.output_dt)
    length = n * params.spacing
    grid = Grid((n, n), (params.spacing, params.spacing))

    ky = (2.0 * np.pi / length) * np.fft.fftfreq(n, d=1.0 / n)[:, None]
    kx = (2.0 * np.pi / length) * np.arange(n // 2 + 1)[None, :]
    k2 = kx**2 + ky**2
    inv_k2 = np.zeros_like(k2)
    nonzero = k2 > 0
    inv_k2[nonzero] = 1.0 / k2[nonzero]
    kcut = (2.0 / 3.0) * np.pi / params.spacing
    dealias = (np.abs(kx) <= kcut) & (np.abs(ky) <= kcut)

    e_full = np.exp(-params.viscosity * k2 * dt)
    e_half = np.exp(-params.viscosity * k2 * dt / 2.0)

    if params.forcing_amplitude != 0.0:
        kf = 2.0 * np.pi * params.forcing_mode / length
        y = (np.arange(n) * params.spacing)[:, None]
        f_omega = -params.forcing_amplitude * kf * np.cos(kf * y) * np.ones((n, n))
        f_hat = dealias * np.fft.rfft2(f_omega)
    else:
        f_hat = None

    def velocity_hat(w_hat):
        psi_hat = w_hat * inv_k2
        return 1j * ky * psi_hat, -1j * kx * psi_hat

    def tendency(w_hat):
        w_hat = dealias * w_hat
        ux_hat, uy_hat = velocity_hat(w_hat)
        ux = np.fft.irfft2(ux_hat, s=(n, n))
        uy = np.fft.irfft2(uy_hat, s=(n, n))
        wx = np.fft.irfft2(1j * kx * w_hat, s=(n, n))
        wy = np.fft.irfft2(1j * ky * w_hat, s=(n, n))
        adv = dealias * np.fft.rfft2(ux * wx + uy * wy)
        out = -adv
        if f_hat is not None:
            out = out + f_hat
        return out

    def step(w_hat):
        # RK4 with integrating factor exp(-nu k^2 t) on the viscous term
        k1 = tendency(w_hat)
        k2_ = tendency(e_half * (w_hat + 0.5 * dt * k1))
        k3 = tendency(e_half * w_hat + 0.5 * dt * k2_)
        k4 = tendency(e_full * w_hat + dt * e_half * k3)
        return e_full * w_hat + (dt / 6.0) * (e_full * k1 + 2.0 * e_half * (k2_ + k3) + k4)

    rng = np.random.default_rng(params.seed)
    w_hat = np.fft.rfft2(_ns_initial_vorticity(params, rng))
    warmup_steps = int(round(params.warmup_time / dt))
    for _ in range(warmup_steps):
        w_hat = step(w_hat)

    states = np.empty((params.num_output_steps, 3, n, n))

    def record(i, w_hat):
        ux_hat, uy_hat = velocity_hat(w_hat)
        states[i, 0] = np.fft.irfft2(ux_hat, s=(n, n))
        states[i, 1] = np.fft.irfft2(uy_hat, s=(n, n))
        states[i, 2] = np.fft.irfft2(w_hat, s=(n, n))

    record(0, w_hat)
    for i in range(1, params.num_output_steps):
        for _ in range(n_sub):
            w_hat = step(w_hat)
        record(i, w_hat)
        if not np.all(np.isfinite(states[i])) or np.max(np.abs(states[i])) > BLOWUP_LIMIT:
            raise BlowUpError(f"NS solution blew up at output step {i}")
    times = np.arange(params.num_output_steps) * params.output_dt
    return Trajectory(grid, times, states, ("vx", "vy", "vorticity"))


def spectral_divergence(trajectory: Trajectory, step: int) -> float:
    """Max |ikx vx + iky vy| over modes at one output step (NS channels)."""
    if trajectory.channels[:2] != ("vx", "vy"):
        raise ValueError("divergence check expects vx/vy channels")
    n_y, n_x = trajectory.grid.points
    ly, lx = trajectory.grid.lengths
    ky = (2.0 * np.pi / ly) * np.fft.fftfreq(n_y, d=1.0 / n_y)[:, None]
    kx = (2.0 * np.pi / lx) * np.arange(n_x // 2 + 1)[None, :]
    vx_hat = np.fft.rfft2(trajectory.states[step, 0], norm="ortho")
    vy_hat = np.fft.rfft2(trajectory.states[step, 1], norm="ortho")
    return float(np.max(np.abs(1j * kx * vx_hat + 1j * ky * vy_hat)))


# ---------------------------------------------------------------------------
# Dataset split
# ---------------------------------------------------------------------------


def dataset_split(trajectories, ratios, seed: int):
    """Split whole trajectories into disjoint groups by ``ratios``.

    Deterministic for a fixed seed; every item lands in exactly one group.
    Raises if there are fewer trajectories than groups or the ratios do not
    sum to 1.
    """
    items = list(trajectories)
    ratios = [float(r) for r in ratios]
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {sum(ratios)}")
    if any(r < 0 for r in ratios):
        raise ValueError("split ratios must be nonnegative")
    if len(items) < len(ratios):
        raise ValueError(f"cannot split {len(items)} trajectories into {len(ratios)} groups")
    order = np.random.default_rng(seed).permutation(len(items))
    boundaries = np.rint(np.cumsum(ratios) * len(items)).astype(int)
    groups = []
    start = 0
    for end in boundaries:
        groups.append([items[i] for i in order[start:end]])
        start = end
    return tuple(groups)
