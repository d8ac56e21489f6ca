"""2-D staggered-grid FDTD solver for the layered arm section.

Pressure lives at cell centres, particle velocities on cell faces; both are
advanced with a second-order leapfrog scheme. The physical domain is
surrounded by an exponential sponge so that the tissue layers themselves are
never damped by the boundary treatment. Absorption inside tissue is a per-cell
amplitude damping equal to ``exp(-alpha c dt)`` per step, with ``alpha``
evaluated once at the source centre frequency.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.signal import find_peaks, hilbert

from ._util import data_path, fmt_float, load_toml
from .channel import ChannelImpulseResponse, MediumParams, attenuation_coefficient, load_tissues


class CFLError(ValueError):
    """Time step too large for the explicit scheme."""


class ResolutionError(ValueError):
    """Grid too coarse for the requested geometry."""


@dataclass
class TissueGeometry:
    """Per-cell tissue labels on a ``nx x ny`` grid (x along the arm, y across it)."""

    width: float
    height: float
    dx: float
    labels: np.ndarray  # (nx, ny) int indices into ``names``
    names: tuple[str, ...]
    media: dict[str, MediumParams]

    def __post_init__(self) -> None:
        if self.dx <= 0:
            raise ValueError("dx must be positive")
        if self.labels.shape != self.shape:
            raise ValueError("label grid does not match the domain size")
        if self.labels.min() < 0 or self.labels.max() >= len(self.names):
            raise ValueError("cell with unknown tissue label")

    @property
    def shape(self) -> tuple[int, int]:
        return (int(round(self.width / self.dx)), int(round(self.height / self.dx)))

    def field(self, attr: str) -> np.ndarray:
        values = np.array([getattr(self.media[n], attr) for n in self.names])
        return values[self.labels]

    def cell(self, pos: Sequence[float]) -> tuple[int, int]:
        """Index of the cell containing ``pos = (x, y)``."""
        x, y = pos
        if not (0 <= x <= self.width and 0 <= y <= self.height):
            raise ValueError(f"position {pos} outside the {self.width} x {self.height} m domain")
        nx, ny = self.shape
        return min(int(x / self.dx), nx - 1), min(int(y / self.dx), ny - 1)

    def centre(self, cell: tuple[int, int]) -> tuple[float, float]:
        return ((cell[0] + 0.5) * self.dx, (cell[1] + 0.5) * self.dx)


def _check_divides(length: float, dx: float, what: str) -> int:
    n = length / dx
    if abs(n - round(n)) > 1e-6 * max(1.0, n):
        raise ResolutionError(f"dx = {dx} does not divide the domain {what} {length}")
    return int(round(n))


def homogeneous_geometry(width: float, height: float, dx: float, medium: MediumParams) -> TissueGeometry:
    nx, ny = _check_divides(width, dx, "width"), _check_divides(height, dx, "height")
    name = medium.name or "medium"
    return TissueGeometry(width, height, dx, np.zeros((nx, ny), dtype=np.int64), (name,), {name: medium})


def build_arm_geometry(
    dx: float,
    tissue_file: str | Path | None = None,
    min_layer_cells: int = 6,
) -> TissueGeometry:
    """Layered arm section symmetric about the horizontal centre line.

    Layers and their half-section widths come from the ``[arm]`` table of the
    tissue file (bone innermost). The thinnest layer must span at least
    ``min_layer_cells`` cells.
    """
    raw = load_toml(tissue_file or data_path("tissues.toml"))
    media = load_tissues(tissue_file)
    arm = raw["arm"]
    width, height = float(arm["width"]), float(arm["height"])
    layers, widths = list(arm["layers"]), [float(w) for w in arm["half_widths"]]
    if len(layers) != len(widths):
        raise ValueError("arm layers and half_widths differ in length")
    if sum(widths) > height / 2 + 1e-12:
        raise ValueError("layer half-widths exceed half the domain height")
    if dx <= 0:
        raise ValueError("dx must be positive")
    # report the thinnest layer, it is the binding one
    for name, w in sorted(zip(layers, widths), key=lambda p: p[1]):
        if w < min_layer_cells * dx * (1 - 1e-9):
            raise ResolutionError(
                f"{name} layer ({w * 1e3:g} mm) spans {w / dx:.2f} cells; need >= {min_layer_cells} (reduce dx)"
            )
    nx, ny = _check_divides(width, dx, "width"), _check_divides(height, dx, "height")
    yc = (np.arange(ny) + 0.5) * dx
    dist = np.abs(yc - height / 2)
    edges = np.cumsum(widths)
    col = np.searchsorted(edges, dist, side="right")
    # cells beyond the outermost layer (if any) are assigned to it
    col = np.minimum(col, len(layers) - 1)
    labels = np.broadcast_to(col, (nx, ny)).copy()
    return TissueGeometry(width, height, dx, labels, tuple(layers), media)


def default_transceivers(geom: TissueGeometry, margin: float = 0.01) -> tuple[tuple[float, float], tuple[float, float]]:
    """Source in the upper muscle layer near the left edge, sink in the lower one near the right edge.

    Both sit mid-layer, ``margin`` from the domain ends, so the link spans the
    whole section and has to cross the bone.
    """
    if "muscle" not in geom.names:
        y = geom.height / 2
        return (margin, y), (geom.width - margin, y)
    idx = geom.names.index("muscle")
    rows = np.nonzero(geom.labels[0] == idx)[0]
    mid = geom.shape[1] / 2
    upper = (rows[rows >= mid].mean() + 0.5) * geom.dx
    lower = (rows[rows < mid].mean() + 0.5) * geom.dx
    return (margin, upper), (geom.width - margin, lower)


# --- source waveforms ------------------------------------------------------


def ricker(f0: float, dt: float, n: int, delay: float | None = None) -> np.ndarray:
    """Ricker wavelet of peak frequency ``f0``, peak at ``delay`` (default ``1.2/f0``)."""
    t = np.arange(n) * dt - (1.2 / f0 if delay is None else delay)
    a = (math.pi * f0 * t) ** 2
    return (1 - 2 * a) * np.exp(-a)


def gaussian_pulse(dt: float, n: int, width: float | None = None, delay: float | None = None) -> np.ndarray:
    """Narrow Gaussian standing in for a Dirac impulse; ``width`` defaults to ``2 dt``."""
    width = 2 * dt if width is None else width
    delay = 4 * width if delay is None else delay
    t = np.arange(n) * dt - delay
    return np.exp(-0.5 * (t / width) ** 2)


def dirac(n: int, at: int = 0) -> np.ndarray:
    s = np.zeros(n)
    s[at] = 1.0
    return s


# --- solver ----------------------------------------------------------------


def max_stable_dt(dx: float, c_max: float) -> float:
    return dx / (c_max * math.sqrt(2.0))


@dataclass
class FieldSnapshot:
    time: float
    pressure: np.ndarray


@dataclass
class WaveResult:
    dt: float
    sink: np.ndarray
    source_cell: np.ndarray
    snapshots: list[FieldSnapshot] = field(default_factory=list)

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.sink.size) * self.dt


def _pad(a: np.ndarray, n: int) -> np.ndarray:
    return np.pad(a, n, mode="edge")


def simulate_field(
    geom: TissueGeometry,
    source_pos: Sequence[float],
    sink_pos: Sequence[float],
    source_waveform: np.ndarray,
    dt: float,
    n_steps: int,
    f_ref_mhz: float = 0.1,
    sponge_cells: int = 20,
    sponge_reflection: float = 1e-3,
    snapshot_every: int = 0,
    attenuation: bool = True,
) -> WaveResult:
    """Run the FDTD solver and record pressure at the sink cell.

    ``source_waveform`` is added to the pressure of the source cell at each
    step (zero-padded to ``n_steps``). ``f_ref_mhz`` is the frequency at which
    tissue absorption is evaluated.
    """
    c = geom.field("c")
    rho = geom.field("rho")
    c_max = float(c.max())
    dt_max = max_stable_dt(geom.dx, c_max)
    if dt > dt_max:
        raise CFLError(f"dt = {dt:.4g} s violates the CFL limit; use dt <= {dt_max:.6g} s")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    src = geom.cell(source_pos)
    snk = geom.cell(sink_pos)
    n = sponge_cells
    dx = geom.dx

    c = _pad(c, n)
    rho = _pad(rho, n)
    nx, ny = c.shape
    kappa = rho * c * c
    # buoyancy on faces, averaged from the adjacent cells
    inv_rho = 1.0 / rho
    bx = 0.5 * (inv_rho[1:, :] + inv_rho[:-1, :])
    by = 0.5 * (inv_rho[:, 1:] + inv_rho[:, :-1])

    # per-step damping: tissue absorption plus the sponge ramp
    if attenuation:
        alpha = np.array([attenuation_coefficient(f_ref_mhz, geom.media[k]) for k in geom.names])[geom.labels]
        absorb = _pad(alpha, n) * c
    else:
        absorb = np.zeros_like(c)
    if n > 0:
        sig_max = 3.0 * c_max * math.log(1.0 / sponge_reflection) / (2.0 * n * dx)
        ix = np.arange(nx)
        iy = np.arange(ny)
        dxn = np.maximum(np.maximum(n - ix, ix - (nx - 1 - n)), 0) / n
        dyn = np.maximum(np.maximum(n - iy, iy - (ny - 1 - n)), 0) / n
        sponge = sig_max * (dxn[:, None] ** 2 + dyn[None, :] ** 2)
    else:
        sponge = 0.0
    damp_p = np.exp(-(absorb + sponge) * dt)
    damp_ux = 0.5 * (damp_p[1:, :] + damp_p[:-1, :])
    damp_uy = 0.5 * (damp_p[:, 1:] + damp_p[:, :-1])

    p = np.zeros((nx, ny))
    ux = np.zeros((nx - 1, ny))
    uy = np.zeros((nx, ny - 1))
    sx, sy = src[0] + n, src[1] + n
    kx, ky = snk[0] + n, snk[1] + n
    wave = np.zeros(n_steps)
    w = np.asarray(source_waveform, dtype=float)[:n_steps]
    wave[: w.size] = w
    sink = np.zeros(n_steps)
    at_src = np.zeros(n_steps)
    snaps: list[FieldSnapshot] = []
    cu = dt / dx
    kp = kappa * cu
    for it in range(n_steps):
        ux -= cu * bx * (p[1:, :] - p[:-1, :])
        ux *= damp_ux
        uy -= cu * by * (p[:, 1:] - p[:, :-1])
        uy *= damp_uy
        # divergence at cell i: face i (right) minus face i - 1 (left)
        div = np.zeros_like(p)
        div[:-1, :] += ux
        div[1:, :] -= ux
        div[:, :-1] += uy
        div[:, 1:] -= uy
        p -= kp * div
        p[sx, sy] += wave[it]
        p *= damp_p
        sink[it] = p[kx, ky]
        at_src[it] = p[sx, sy]
        if snapshot_every and it % snapshot_every == 0:
            snaps.append(FieldSnapshot((it + 1) * dt, p[n : nx - n, n : ny - n].copy()))
    return WaveResult(dt, sink, at_src, snaps)


# --- post-processing -------------------------------------------------------


def green2d_response(source: np.ndarray, dt: float, distance: float, c: float, n_u: int = 4000) -> np.ndarray:
    """Pressure at ``distance`` in a lossless homogeneous 2-D medium, up to scale.

    For a pressure-injection source ``s`` the field is the time derivative of
    ``s`` convolved with the 2-D Green's function ``H(t - r/c) / sqrt(t^2 - r^2/c^2)``.
    The convolution is evaluated with ``tau = (r/c) cosh(u)``, which removes
    the integrable singularity at the wavefront.
    """
    source = np.asarray(source, dtype=float)
    n = source.size
    t = np.arange(n) * dt
    t0 = distance / c
    u_max = math.acosh(max(t[-1] / t0, 1.0) + 1.0) if t0 > 0 else 0.0
    u = np.linspace(0.0, u_max, n_u)
    du = u[1] - u[0] if n_u > 1 else 0.0
    conv = np.zeros(n)
    for uk in u:
        conv += np.interp(t - t0 * math.cosh(uk), t, source, left=0.0, right=0.0)
    conv *= du
    return np.gradient(conv, dt)


def estimate_delay(series: np.ndarray, reference: np.ndarray, dt: float) -> float:
    """Delay of ``series`` relative to ``reference`` from the cross-correlation peak (parabolic refinement)."""
    a = np.asarray(series, dtype=float)
    b = np.asarray(reference, dtype=float)
    m = max(a.size, b.size)
    nfft = 1 << (2 * m - 1).bit_length()
    xc = np.fft.irfft(np.fft.rfft(a, nfft) * np.conj(np.fft.rfft(b, nfft)), nfft)
    xc = np.concatenate([xc[-(m - 1) :], xc[:m]])
    k = int(np.argmax(xc))
    frac = 0.0
    if 0 < k < xc.size - 1:
        y0, y1, y2 = xc[k - 1], xc[k], xc[k + 1]
        den = y0 - 2 * y1 + y2
        if den != 0:
            frac = 0.5 * (y0 - y2) / den
    return (k - (m - 1) + frac) * dt


def envelope(series: np.ndarray) -> np.ndarray:
    return np.abs(hilbert(np.asarray(series, dtype=float)))


def arrival_clusters(
    series: np.ndarray,
    dt: float,
    threshold: float = 0.05,
    prominence: float = 0.2,
    min_gap: float = 10e-6,
) -> list[tuple[float, float]]:
    """Distinct arrivals as ``(time, relative height)`` envelope peaks.

    A peak counts when it reaches ``threshold`` of the envelope maximum, stands
    out from its surroundings by ``prominence`` (same scale) and lies at least
    ``min_gap`` from a higher peak.
    """
    env = envelope(series)
    peak = env.max()
    if peak == 0:
        return []
    env = env / peak
    idx, _ = find_peaks(env, height=threshold, prominence=prominence, distance=max(1, int(round(min_gap / dt))))
    return [(float(i * dt), float(env[i])) for i in idx]


def extract_impulse_response(
    series: np.ndarray,
    dt: float,
    energy_fraction: float = 0.999,
    distance: float = 0.0,
) -> ChannelImpulseResponse:
    """Tap-delay form of a recorded sink series.

    The series is scaled to unit peak magnitude; samples before the first
    non-zero one are dropped, and taps are kept in time order until their
    cumulative energy reaches ``energy_fraction`` of the total. Zero samples
    are not taps. Delays stay absolute (sample index times ``dt``).
    """
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        raise ValueError("empty series")
    peak = np.abs(x).max()
    if peak == 0:
        raise ValueError("all-zero series has no impulse response")
    x = x / peak
    e = x * x
    cum = np.cumsum(e) / e.sum()
    last = int(np.searchsorted(cum, energy_fraction * (1 - 1e-12)))
    keep = np.flatnonzero(x[: last + 1] != 0)
    return ChannelImpulseResponse(keep * dt, x[keep].astype(complex), distance)


def series_delay_stats(series: np.ndarray, dt: float):
    """Delay moments of the raw series, weighting each sample by its power."""
    from .channel import power_delay_moments

    x = np.asarray(series, dtype=float)
    nz = np.flatnonzero(x)
    if nz.size == 0:
        raise ValueError("all-zero series")
    x = x[nz[0] :]
    return power_delay_moments(np.arange(x.size) * dt, x * x)


def write_series_csv(t: np.ndarray, values: np.ndarray, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "value"])
        for a, b in zip(t, values):
            w.writerow([fmt_float(a), fmt_float(b)])


@dataclass(frozen=True)
class WaveConfig:
    """Defaults of the arm experiment."""

    dx: float = 0.5e-3
    cfl: float = 0.9
    duration: float = 400e-6
    f0: float = 100e3  # Ricker peak frequency [Hz]
    source: str = "ricker"  # ricker | gaussian | dirac
    sponge_cells: int = 20
    source_pos: tuple[float, float] | None = None
    sink_pos: tuple[float, float] | None = None

    def time_step(self, geom: TissueGeometry) -> float:
        return self.cfl * max_stable_dt(geom.dx, float(geom.field("c").max()))

    def waveform(self, dt: float, n: int) -> np.ndarray:
        if self.source == "ricker":
            return ricker(self.f0, dt, n)
        if self.source == "gaussian":
            return gaussian_pulse(dt, n)
        if self.source == "dirac":
            return dirac(n)
        raise ValueError(f"unknown source waveform {self.source!r}")


def run_arm(cfg: WaveConfig = WaveConfig(), tissue_file=None, snapshot_every: int = 0) -> tuple[TissueGeometry, WaveResult]:
    geom = build_arm_geometry(cfg.dx, tissue_file)
    src, snk = default_transceivers(geom)
    src = cfg.source_pos or src
    snk = cfg.sink_pos or snk
    dt = cfg.time_step(geom)
    n = int(math.ceil(cfg.duration / dt))
    res = simulate_field(
        geom, src, snk, cfg.waveform(dt, n), dt, n,
        f_ref_mhz=cfg.f0 / 1e6, sponge_cells=cfg.sponge_cells, snapshot_every=snapshot_every,
    )
    return geom, res
