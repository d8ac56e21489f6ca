"""Bit-level UsWB transceiver: pulses, time hopping, spreading, receivers, BER and SINR."""

from .ber import BerEstimate, BerSimConfig, BerTable, build_ber_table, estimate_ber, wilson_half_width
from .receiver import apply_channel, demodulate_coherent, demodulate_noncoherent
from .signal import (
    BPSK,
    PPM,
    SCHEMES,
    HoppingPlan,
    PhyParams,
    derive_hopping_plan,
    modulate,
    pulse_waveform,
)
from .sinr import LinkConfig, fit_sigma2, gaussian_ber, sinr, sinr_for_ber, symmetric_sinr

__all__ = [
    "BPSK",
    "PPM",
    "SCHEMES",
    "BerEstimate",
    "BerSimConfig",
    "BerTable",
    "HoppingPlan",
    "LinkConfig",
    "PhyParams",
    "apply_channel",
    "build_ber_table",
    "demodulate_coherent",
    "demodulate_noncoherent",
    "derive_hopping_plan",
    "estimate_ber",
    "fit_sigma2",
    "gaussian_ber",
    "modulate",
    "pulse_waveform",
    "sinr",
    "sinr_for_ber",
    "symmetric_sinr",
    "wilson_half_width",
]
