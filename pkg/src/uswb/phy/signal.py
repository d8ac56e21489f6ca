"""Pulse shape, time-hopping plans and the two spread-PPM modulators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

BPSK = "ppm-bpsk"  # polarity carries the code, PPM shift carries the bit
PPM = "ppm-ppm"  # code XOR bit selects the PPM shift
SCHEMES = (BPSK, PPM)

# Gaussian width of the pulse relative to its duration: the pulse spans +-4 sigma.
_SIGMAS_PER_WIDTH = 8.0
# Seed-sequence domain for hopping plans, kept apart from simulation streams.
_PLAN_DOMAIN = 0x48_50


def check_scheme(scheme: str) -> str:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    return scheme


@dataclass(frozen=True)
class PhyParams:
    """Chip timing and pulse geometry.

    ``delta`` defaults to ``tc/2`` and ``pulse_width`` to ``tc/4``. Both must be
    whole numbers of samples so that grid-aligned pulses match the receiver
    templates exactly.
    """

    tc: float = 0.5e-6
    delta: float | None = None
    pulse_width: float | None = None
    samples_per_chip: int = 40

    def __post_init__(self) -> None:
        if self.delta is None:
            object.__setattr__(self, "delta", self.tc / 2)
        if self.pulse_width is None:
            object.__setattr__(self, "pulse_width", self.tc / 4)
        for msg in self.violations():
            raise ValueError(msg)

    def violations(self) -> list[str]:
        out = []
        if self.tc <= 0:
            out.append("tc must be positive")
            return out
        if not 0 < self.delta < self.tc:
            out.append(f"delta < tc violated: 0 < delta={self.delta} < tc={self.tc} required")
        if self.samples_per_chip < 8:
            out.append("samples_per_chip must be >= 8")
        if not 0 < self.pulse_width <= self.delta:
            out.append("pulse_width must be in (0, delta] so shifted pulses do not overlap")
        elif self.delta + self.pulse_width > self.tc * (1 + 1e-9):
            out.append("delta + pulse_width must fit in one chip")
        if not out:
            for name in ("delta", "pulse_width"):
                n = getattr(self, name) / self.dt
                if abs(n - round(n)) > 1e-6:
                    out.append(f"{name} must be a whole number of samples (got {n:.4f})")
        return out

    @property
    def dt(self) -> float:
        return self.tc / self.samples_per_chip

    @property
    def sigma_p(self) -> float:
        return self.pulse_width / _SIGMAS_PER_WIDTH

    @property
    def delta_samples(self) -> int:
        return int(round(self.delta / self.dt))

    @property
    def pulse_samples(self) -> int:
        return int(round(self.pulse_width / self.dt))


def _mexican_hat(t: np.ndarray, sigma: float) -> np.ndarray:
    x2 = (t / sigma) ** 2
    return (1.0 - x2) * np.exp(-0.5 * x2)


def pulse_waveform(params: PhyParams, t_grid: np.ndarray) -> np.ndarray:
    """Second-derivative-of-Gaussian pulse centred at ``t = 0``, unit energy on ``t_grid``.

    ``t_grid`` must be uniformly spaced; energy means ``sum(p**2) * dt``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    dt = float(t_grid[1] - t_grid[0])
    p = _mexican_hat(t_grid, params.sigma_p)
    return p / math.sqrt(float(np.sum(p**2)) * dt)


@dataclass(frozen=True)
class PulseShape:
    """Pulse occupying ``[0, pulse_width]`` after its start time, sampled on the receiver grid."""

    params: PhyParams

    @property
    def scale(self) -> float:
        return _pulse_scale(self.params)

    @property
    def template(self) -> np.ndarray:
        """Grid-aligned samples ``0 .. pulse_samples`` (unit energy)."""
        p = self.params
        return self.at(np.arange(p.pulse_samples + 1, dtype=float))

    def at(self, offset_samples: np.ndarray) -> np.ndarray:
        """Pulse value at ``offset_samples`` samples after the pulse start; zero outside the support."""
        p = self.params
        off = np.asarray(offset_samples, dtype=float)
        t = off * p.dt - p.pulse_width / 2
        v = _mexican_hat(t, p.sigma_p) * self.scale
        return np.where((off >= 0) & (off <= p.pulse_samples), v, 0.0)


_SCALE_CACHE: dict[PhyParams, float] = {}


def _pulse_scale(params: PhyParams) -> float:
    s = _SCALE_CACHE.get(params)
    if s is None:
        n = np.arange(params.pulse_samples + 1, dtype=float)
        raw = _mexican_hat(n * params.dt - params.pulse_width / 2, params.sigma_p)
        s = 1.0 / math.sqrt(float(np.sum(raw**2)) * params.dt)
        _SCALE_CACHE[params] = s
    return s


@dataclass(frozen=True)
class HoppingPlan:
    """Per-bit time-hopping chips and spreading code of one node.

    Chip ``j`` of bit ``i`` occupies frame ``i * n_s + j`` and is sent in chip
    ``th[j]`` of that frame. ``code`` is in {-1, +1} for PPM-BPSK and {0, 1}
    for PPM-PPM.
    """

    node_id: int
    n_h: int
    n_s: int
    scheme: str
    th: tuple[int, ...]
    code: tuple[int, ...]

    def __post_init__(self) -> None:
        check_scheme(self.scheme)
        if self.n_h < 1 or self.n_s < 1:
            raise ValueError("n_h and n_s must be >= 1")
        if len(self.th) != self.n_s or len(self.code) != self.n_s:
            raise ValueError("th and code must have n_s entries")
        if any(not 0 <= c < self.n_h for c in self.th):
            raise ValueError("hopping chip outside [0, n_h)")
        allowed = {-1, 1} if self.scheme == BPSK else {0, 1}
        if not set(self.code) <= allowed:
            raise ValueError(f"code chips for {self.scheme} must be in {sorted(allowed)}")

    @classmethod
    def explicit(
        cls, th: Sequence[int], code: Sequence[int], n_h: int, scheme: str = BPSK, node_id: int = -1
    ) -> HoppingPlan:
        return cls(node_id, n_h, len(th), scheme, tuple(int(c) for c in th), tuple(int(a) for a in code))

    @property
    def th_array(self) -> np.ndarray:
        return np.asarray(self.th, dtype=np.int64)

    @property
    def code_array(self) -> np.ndarray:
        return np.asarray(self.code, dtype=np.int64)

    def inverted(self) -> HoppingPlan:
        """Same hops, complemented code."""
        code = tuple(-a for a in self.code) if self.scheme == BPSK else tuple(1 - a for a in self.code)
        return HoppingPlan(self.node_id, self.n_h, self.n_s, self.scheme, self.th, code)


def derive_hopping_plan(node_id: int, n_h: int, n_s: int, scheme: str) -> HoppingPlan:
    """Plan generated by PCG64 seeded with ``SeedSequence(node_id)``.

    Hops are drawn first (``n_s`` integers in ``[0, n_h)``), then ``n_s`` code
    bits; BPSK maps bit ``b`` to ``2b - 1``.
    """
    check_scheme(scheme)
    if n_h < 1 or n_s < 1:
        raise ValueError("n_h and n_s must be >= 1")
    ss = np.random.SeedSequence(entropy=int(node_id), spawn_key=(_PLAN_DOMAIN,))
    rng = np.random.Generator(np.random.PCG64(ss))
    th = rng.integers(0, n_h, size=n_s)
    chips = rng.integers(0, 2, size=n_s)
    code = 2 * chips - 1 if scheme == BPSK else chips
    return HoppingPlan(int(node_id), n_h, n_s, scheme, tuple(th.tolist()), tuple(code.tolist()))


@dataclass(frozen=True)
class PulseTrain:
    """Pulse start positions (in samples, possibly fractional) and signed amplitudes."""

    positions: np.ndarray
    amplitudes: np.ndarray


def _check_bits(bits) -> np.ndarray:
    bits = np.asarray(bits)
    if bits.ndim != 1:
        raise ValueError("bits must be one-dimensional")
    if not np.all((bits == 0) | (bits == 1)):
        raise ValueError("bit values must be 0 or 1")
    return bits.astype(np.int64)


def pulse_train(
    bits, plan: HoppingPlan, params: PhyParams, t0: float = 0.0, amplitude: float = 1.0
) -> PulseTrain:
    """Where every pulse of ``bits`` starts, in samples after stream time 0.

    PPM-BPSK: chip ``j`` has polarity ``code[j]`` and shift ``bit * delta``.
    PPM-PPM: unit polarity and shift ``(code[j] XOR bit) * delta``.
    """
    bits = _check_bits(bits)
    n_h, n_s, spc = plan.n_h, plan.n_s, params.samples_per_chip
    frames = np.arange(bits.size * n_s, dtype=np.int64)
    th = np.tile(plan.th_array, bits.size)
    code = np.tile(plan.code_array, bits.size)
    d = np.repeat(bits, n_s)
    if plan.scheme == BPSK:
        shift, pol = d, code.astype(float)
    else:
        shift, pol = code ^ d, np.ones(frames.size)
    start = (frames * n_h + th) * spc + shift * params.delta_samples
    return PulseTrain(start + t0 / params.dt, amplitude * pol)


def render(train: PulseTrain, params: PhyParams, n_samples: int) -> np.ndarray:
    """Sum the pulses of ``train`` onto a real sample stream of length ``n_samples``."""
    out = np.zeros(n_samples)
    if train.positions.size == 0:
        return out
    shape = PulseShape(params)
    first = np.ceil(train.positions - 1e-9).astype(np.int64)
    idx = first[:, None] + np.arange(params.pulse_samples + 2)[None, :]
    vals = shape.at(idx - train.positions[:, None]) * train.amplitudes[:, None]
    keep = (idx >= 0) & (idx < n_samples) & (vals != 0)
    np.add.at(out, idx[keep], vals[keep])
    return out


def stream_length(n_bits: int, plan: HoppingPlan, params: PhyParams) -> int:
    return n_bits * plan.n_s * plan.n_h * params.samples_per_chip


def modulate(
    bits,
    plan: HoppingPlan,
    params: PhyParams,
    t0: float = 0.0,
    n_samples: int | None = None,
    amplitude: float = 1.0,
) -> np.ndarray:
    """Baseband sample stream for ``bits``; one pulse per frame, ``n_s`` pulses per bit.

    ``t0`` delays the whole stream (seconds, need not be on the sample grid).
    """
    bits = _check_bits(bits)
    if n_samples is None:
        n_samples = stream_length(bits.size, plan, params)
    return render(pulse_train(bits, plan, params, t0, amplitude), params, n_samples)
