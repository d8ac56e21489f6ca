"""Channel application and the coherent / energy-detection receivers."""

from __future__ import annotations

import math

import numpy as np

from ..channel import ChannelImpulseResponse
from .signal import BPSK, PPM, HoppingPlan, PhyParams, PulseShape


def noise_std(eta: float, params: PhyParams) -> float:
    """Per-component standard deviation of complex AWGN with energy density ``eta``.

    Each real component has variance ``eta / (2 dt)``; after correlation with a
    unit-energy template (``sum(p**2) dt = 1``) the real part of the statistic
    then has variance ``eta / 2``, i.e. ``eta`` plays the role of ``N0``.
    """
    if eta < 0:
        raise ValueError("noise energy must be non-negative")
    return math.sqrt(eta / (2.0 * params.dt))


def tap_offsets(cir: ChannelImpulseResponse, params: PhyParams) -> np.ndarray:
    """Tap delays rounded to whole samples."""
    return np.rint(cir.delays / params.dt).astype(np.int64)


def apply_channel(
    stream: np.ndarray,
    cir: ChannelImpulseResponse,
    eta: float,
    rng: np.random.Generator | None,
    params: PhyParams,
) -> np.ndarray:
    """Tap-delay convolution plus complex AWGN; output is extended by the longest delay."""
    stream = np.asarray(stream)
    offsets = tap_offsets(cir, params)
    out = np.zeros(stream.size + int(offsets.max()), dtype=complex)
    for k, h in zip(offsets, cir.amplitudes):
        out[k : k + stream.size] += h * stream
    if eta > 0:
        if rng is None:
            raise ValueError("an rng is required when eta > 0")
        s = noise_std(eta, params)
        out += s * (rng.standard_normal(out.size) + 1j * rng.standard_normal(out.size))
    return out


def _chip_starts(n_bits: int, plan: HoppingPlan, params: PhyParams, lag: int) -> np.ndarray:
    frames = np.arange(n_bits * plan.n_s, dtype=np.int64)
    th = np.tile(plan.th_array, n_bits)
    return (frames * plan.n_h + th) * params.samples_per_chip + lag


def _gather(rx: np.ndarray, starts: np.ndarray, length: int) -> np.ndarray:
    """Rows ``rx[s : s + length]``, zero-padded past the end of ``rx``."""
    idx = starts[:, None] + np.arange(length)[None, :]
    valid = idx < rx.size
    out = np.zeros(idx.shape, dtype=rx.dtype)
    out[valid] = rx[idx[valid]]
    return out


def chip_windows(
    rx: np.ndarray, n_bits: int, plan: HoppingPlan, params: PhyParams, lag_samples: int = 0
) -> np.ndarray:
    """Received samples of every chip the plan occupies, shape ``(n_bits * n_s, samples_per_chip)``."""
    starts = _chip_starts(n_bits, plan, params, lag_samples)
    return _gather(np.asarray(rx), starts, params.samples_per_chip)


def coherent_decisions(windows: np.ndarray, plan: HoppingPlan, params: PhyParams, phase: complex = 1.0):
    """Bit decisions and soft statistics from chip windows (PPM-BPSK-spread)."""
    tmpl = PulseShape(params).template * params.dt
    n = tmpl.size
    dsh = params.delta_samples
    rot = np.conj(phase) / abs(phase)
    z0 = (windows[:, :n] @ tmpl * rot).real
    z1 = (windows[:, dsh : dsh + n] @ tmpl * rot).real
    code = np.tile(plan.code_array, windows.shape[0] // plan.n_s).astype(float)
    per_chip = (code * (z1 - z0)).reshape(-1, plan.n_s)
    soft = per_chip.sum(axis=1)
    return (soft > 0).astype(np.int64), soft


def noncoherent_decisions(windows: np.ndarray, plan: HoppingPlan, params: PhyParams):
    """Bit decisions from chip windows by energy detection, XOR de-spreading and majority vote.

    An even split of chip votes is settled by the summed energy differences.
    """
    dsh = params.delta_samples
    hi = min(2 * dsh, windows.shape[1])
    e = np.abs(windows) ** 2
    e0 = e[:, :dsh].sum(axis=1)
    e1 = e[:, dsh:hi].sum(axis=1)
    code = np.tile(plan.code_array, windows.shape[0] // plan.n_s)
    chip_bits = ((e1 > e0).astype(np.int64) ^ code).reshape(-1, plan.n_s)
    votes = chip_bits.sum(axis=1)
    sign = np.where(code == 1, -1.0, 1.0)
    soft = (sign * (e1 - e0)).reshape(-1, plan.n_s).sum(axis=1)
    twice = 2 * votes
    bits = np.where(twice > plan.n_s, 1, np.where(twice < plan.n_s, 0, (soft > 0).astype(np.int64)))
    return bits.astype(np.int64), votes


def demodulate_coherent(
    rx: np.ndarray,
    plan: HoppingPlan,
    params: PhyParams,
    n_bits: int,
    cir: ChannelImpulseResponse | None = None,
) -> np.ndarray:
    """Correlator receiver locked to the strongest tap of ``cir`` (delay and phase known)."""
    if plan.scheme != BPSK:
        raise ValueError("coherent receiver expects a PPM-BPSK plan")
    lag, phase = 0, 1.0 + 0j
    if cir is not None:
        k = cir.strongest
        lag = int(np.rint(cir.delays[k] / params.dt))
        phase = complex(cir.amplitudes[k])
    w = chip_windows(rx, n_bits, plan, params, lag)
    return coherent_decisions(w, plan, params, phase)[0]


def demodulate_noncoherent(
    rx: np.ndarray,
    plan: HoppingPlan,
    params: PhyParams,
    n_bits: int,
    frame_lag: float = 0.0,
) -> np.ndarray:
    """Energy-detection receiver; only frame timing (``frame_lag`` seconds) is needed."""
    if plan.scheme != PPM:
        raise ValueError("energy detector expects a PPM-PPM plan")
    lag = int(np.rint(frame_lag / params.dt))
    w = chip_windows(rx, n_bits, plan, params, lag)
    return noncoherent_decisions(w, plan, params)[0]
