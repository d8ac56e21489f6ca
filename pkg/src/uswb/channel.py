"""Ultrasonic attenuation law, path gains and tap-delay channel statistics.

Units: frequencies in MHz for the attenuation law (``a`` is given in
Np m^-1 MHz^-b), everything else SI.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from ._util import data_path, fmt_float, load_toml, substream

NP_TO_DB = 20.0 * math.log10(math.e)  # 8.6859 dB per neper

# Coherence bandwidth is taken as COHERENCE_K / tau_rms.
COHERENCE_K = 1.0 / 5.0

# Reported arm-channel statistics that the synthetic profile is calibrated to.
ARM_TAU_M = 1.2779e-5
ARM_TAU_RMS = 2.6883e-5


@dataclass(frozen=True)
class MediumParams:
    """Acoustic parameters of one tissue."""

    c: float
    rho: float
    a: float
    b: float
    name: str = ""

    def __post_init__(self) -> None:
        if not (self.c > 0 and self.rho > 0):
            raise ValueError(f"{self.name or 'medium'}: c and rho must be positive")
        if self.a < 0 or self.b < 0:
            raise ValueError(f"{self.name or 'medium'}: a and b must be non-negative")

    @property
    def impedance(self) -> float:
        return self.rho * self.c


def load_tissues(path: str | Path | None = None) -> dict[str, MediumParams]:
    """Read the ``[tissue.*]`` tables of a tissue TOML file (bundled one by default)."""
    raw = load_toml(path or data_path("tissues.toml"))
    try:
        table = raw["tissue"]
    except KeyError:
        raise ValueError(f"{path}: no [tissue] section") from None
    return {name: MediumParams(name=name, **vals) for name, vals in table.items()}


def attenuation_coefficient(f_mhz: float, medium: MediumParams) -> float:
    """Amplitude attenuation ``a * f**b`` in Np/m."""
    if f_mhz <= 0:
        raise ValueError("frequency must be positive")
    return medium.a * f_mhz**medium.b


def pressure_ratio(d: float, alpha: float) -> float:
    """``P(d)/P0 = exp(-alpha d)``."""
    if d < 0 or alpha < 0:
        raise ValueError("d and alpha must be non-negative")
    return math.exp(-alpha * d)


def attenuation_db(ratio: float) -> float:
    return -20.0 * math.log10(ratio)


def max_frequency_for_budget(d: float, medium: MediumParams, budget_db: float) -> float:
    """Largest frequency (MHz) whose attenuation over ``d`` stays within ``budget_db``.

    Solves ``NP_TO_DB * a f^b d = budget_db`` for ``f``.
    """
    if budget_db <= 0:
        raise ValueError("budget must be positive")
    if d <= 0 or medium.a == 0:
        return math.inf
    budget_np = budget_db / NP_TO_DB
    base = budget_np / (medium.a * d)
    if medium.b == 0:
        # attenuation independent of f: either always or never within budget
        return math.inf if base >= 1.0 else 0.0
    return base ** (1.0 / medium.b)


def path_gain(d: float, f_mhz: float, medium: MediumParams, spreading: bool = False) -> float:
    """Power gain of a link of length ``d``: ``exp(-2 alpha d)``.

    With ``spreading`` a spherical ``1/d**2`` factor is applied on top (d in m,
    referenced to 1 m).
    """
    if d < 0 or (spreading and d == 0):
        raise ValueError("distance must be non-negative (positive with spreading)")
    g = pressure_ratio(d, attenuation_coefficient(f_mhz, medium)) ** 2
    if spreading:
        g /= d * d
    return g


@dataclass(frozen=True)
class DelayStats:
    tau_m: float
    tau_rms: float

    @property
    def coherence_bandwidth(self) -> float:
        return math.inf if self.tau_rms == 0 else COHERENCE_K / self.tau_rms


@dataclass(frozen=True)
class ChannelImpulseResponse:
    """Complex low-pass tap-delay line.

    ``delays`` are absolute (seconds) and strictly increasing; ``distance`` is
    the link length the response was measured or synthesised for.
    """

    delays: np.ndarray
    amplitudes: np.ndarray
    distance: float = 0.0

    def __post_init__(self) -> None:
        delays = np.asarray(self.delays, dtype=float).reshape(-1)
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if delays.size == 0:
            raise ValueError("impulse response needs at least one tap")
        if delays.shape != amps.shape:
            raise ValueError("delays and amplitudes differ in length")
        if np.any(np.diff(delays) <= 0):
            raise ValueError("tap delays must be strictly increasing")
        if not (np.all(np.isfinite(delays)) and np.all(np.isfinite(amps))):
            raise ValueError("non-finite tap")
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_taps(self) -> int:
        return self.delays.size

    @property
    def powers(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def strongest(self) -> int:
        return int(np.argmax(self.powers))

    def normalized(self) -> ChannelImpulseResponse:
        """Copy scaled to unit total power."""
        scale = 1.0 / math.sqrt(float(self.powers.sum()))
        return ChannelImpulseResponse(self.delays, self.amplitudes * scale, self.distance)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ChannelImpulseResponse):
            return NotImplemented
        return (
            np.array_equal(self.delays, other.delays)
            and np.array_equal(self.amplitudes, other.amplitudes)
            and self.distance == other.distance
        )

    __hash__ = None  # type: ignore[assignment]


def single_tap(amplitude: complex = 1.0, delay: float = 0.0) -> ChannelImpulseResponse:
    return ChannelImpulseResponse(np.array([delay]), np.array([amplitude]))


def power_delay_moments(delays: np.ndarray, powers: np.ndarray) -> DelayStats:
    """Power-weighted mean excess delay and RMS spread, relative to the first delay."""
    delays = np.asarray(delays, dtype=float)
    powers = np.asarray(powers, dtype=float)
    total = powers.sum()
    if total <= 0:
        raise ValueError("profile carries no power")
    excess = delays - delays[0]
    tau_m = float(np.dot(powers, excess) / total)
    second = float(np.dot(powers, excess**2) / total)
    return DelayStats(tau_m=tau_m, tau_rms=math.sqrt(max(second - tau_m**2, 0.0)))


def delay_stats(cir: ChannelImpulseResponse) -> DelayStats:
    return power_delay_moments(cir.delays, cir.powers)


def exponential_profile(
    n_taps: int, tap_spacing: float, decay_constant: float, direct_ratio: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Delays and tap powers of an exponentially decaying profile.

    Tap ``n`` has power ``exp(-n * tap_spacing / decay_constant)``. When
    ``direct_ratio`` is given, the first tap is replaced by a direct path whose
    power is ``direct_ratio`` times the total power of the tail.
    """
    if n_taps < 1:
        raise ValueError("n_taps must be >= 1")
    if tap_spacing <= 0 or decay_constant <= 0:
        raise ValueError("tap_spacing and decay_constant must be positive")
    delays = np.arange(n_taps) * tap_spacing
    powers = np.exp(-delays / decay_constant)
    if direct_ratio is not None and n_taps > 1:
        # tail referenced to its own first tap so tiny decay constants cannot underflow
        powers[1:] = np.exp(-(delays[1:] - tap_spacing) / decay_constant)
        powers[0] = direct_ratio * powers[1:].sum()
    return delays, powers / powers.sum()


def synth_impulse_response(
    n_taps: int,
    tap_spacing: float,
    decay_constant: float,
    rng_seed: int,
    direct_ratio: float | None = None,
    distance: float = 0.0,
) -> ChannelImpulseResponse:
    """Synthetic multipath response: deterministic power profile, uniform random tap phases."""
    delays, powers = exponential_profile(n_taps, tap_spacing, decay_constant, direct_ratio)
    phases = substream(rng_seed, 0xC1).uniform(0.0, 2 * np.pi, n_taps)
    return ChannelImpulseResponse(delays, np.sqrt(powers) * np.exp(1j * phases), distance)


@dataclass(frozen=True)
class ProfileCalibration:
    n_taps: int
    tap_spacing: float
    decay_constant: float
    direct_ratio: float | None

    def synthesize(self, rng_seed: int = 0, distance: float = 0.20) -> ChannelImpulseResponse:
        return synth_impulse_response(
            self.n_taps, self.tap_spacing, self.decay_constant, rng_seed, self.direct_ratio, distance
        )


def calibrate_profile(
    tau_rms: float = ARM_TAU_RMS,
    tau_m: float | None = ARM_TAU_M,
    n_taps: int = 200,
    tap_spacing: float = 1e-6,
) -> ProfileCalibration:
    """Fit the exponential profile to a target RMS delay spread.

    With ``tau_m`` also given, the direct-path ratio is fitted as well, which is
    what makes ``tau_m < tau_rms`` reachable (a pure exponential has them equal).
    Tap phases do not enter the statistics, so the fit is exact for any seed.
    """

    def rms_for(decay: float, ratio: float | None) -> float:
        d, p = exponential_profile(n_taps, tap_spacing, decay, ratio)
        return power_delay_moments(d, p).tau_rms

    span = n_taps * tap_spacing

    def decay_for(ratio: float | None) -> float:
        return brentq(lambda dc: rms_for(dc, ratio) - tau_rms, tap_spacing * 0.05, span * 50, xtol=1e-15)

    if tau_m is None:
        return ProfileCalibration(n_taps, tap_spacing, decay_for(None), None)

    def mean_gap(log_ratio: float) -> float:
        ratio = math.exp(log_ratio)
        d, p = exponential_profile(n_taps, tap_spacing, decay_for(ratio), ratio)
        return power_delay_moments(d, p).tau_m - tau_m

    log_ratio = brentq(mean_gap, math.log(0.05), math.log(5.0), xtol=1e-12)
    ratio = math.exp(log_ratio)
    return ProfileCalibration(n_taps, tap_spacing, decay_for(ratio), ratio)


def write_cir_csv(cir: ChannelImpulseResponse, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delay_s", "re", "im"])
        for d, h in zip(cir.delays, cir.amplitudes):
            w.writerow([fmt_float(d), fmt_float(h.real), fmt_float(h.imag)])


def read_cir_csv(path: str | Path, distance: float = 0.0) -> ChannelImpulseResponse:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    delays = [float(r["delay_s"]) for r in rows]
    amps = [complex(float(r["re"]), float(r["im"])) for r in rows]
    return ChannelImpulseResponse(np.array(delays), np.array(amps), distance)
