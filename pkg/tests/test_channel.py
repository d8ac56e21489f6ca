import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uswb.channel import (
    ARM_TAU_RMS,
    COHERENCE_K,
    ChannelImpulseResponse,
    MediumParams,
    attenuation_coefficient,
    attenuation_db,
    calibrate_profile,
    delay_stats,
    load_tissues,
    max_frequency_for_budget,
    path_gain,
    pressure_ratio,
    read_cir_csv,
    single_tap,
    synth_impulse_response,
    write_cir_csv,
)

MUSCLE = load_tissues()["muscle"]


def medium(a=1.0, b=1.0):
    return MediumParams(c=1500.0, rho=1000.0, a=a, b=b, name="m")


def test_attenuation_coefficient_examples():
    assert attenuation_coefficient(5.0, medium(a=0.0)) == 0.0
    assert attenuation_coefficient(3.0, medium(a=1.0, b=2.0)) == pytest.approx(9.0)
    assert attenuation_coefficient(10.0, medium(a=0.5, b=1.1)) == pytest.approx(6.295, abs=1e-3)


def test_pressure_ratio_examples():
    assert pressure_ratio(0.0, 3.0) == 1.0
    assert pressure_ratio(1.0, math.log(10)) == pytest.approx(0.1)
    # 100 dB of attenuation at alpha d = 100 / (20 log10 e) Np
    x = 100.0 / (20.0 * math.log10(math.e))
    assert x == pytest.approx(11.51, abs=0.01)
    assert attenuation_db(pressure_ratio(1.0, x)) == pytest.approx(100.0)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 100), st.floats(0, 100))
def test_pressure_ratio_monotone(d1, d2, a1, a2):
    lo_d, hi_d = sorted((d1, d2))
    lo_a, hi_a = sorted((a1, a2))
    assert pressure_ratio(hi_d, a1) <= pressure_ratio(lo_d, a1)
    assert pressure_ratio(d1, hi_a) <= pressure_ratio(d1, lo_a)


def test_max_frequency_budget_closed_form_for_linear_law():
    m = medium(a=2.0, b=1.0)
    budget_np = 60.0 / (20.0 * math.log10(math.e))
    assert max_frequency_for_budget(0.05, m, 60.0) == pytest.approx(budget_np / (2.0 * 0.05))


def test_max_frequency_budget_order_of_magnitude_in_muscle():
    # mm-to-cm range with a 100 dB budget lands around 100 MHz
    f = max_frequency_for_budget(0.01, MUSCLE, 100.0)
    assert 10.0 <= f <= 1000.0
    assert max_frequency_for_budget(0.05, MUSCLE, 100.0) <= f


@given(st.floats(1e-3, 0.5), st.floats(1e-3, 0.5), st.floats(0.1, 20), st.floats(0.1, 20))
def test_max_frequency_budget_monotone(d1, d2, a1, a2):
    lo_d, hi_d = sorted((d1, d2))
    assert max_frequency_for_budget(hi_d, medium(a=a1), 80.0) <= max_frequency_for_budget(lo_d, medium(a=a1), 80.0) * (1 + 1e-12)
    lo_a, hi_a = sorted((a1, a2))
    assert max_frequency_for_budget(d1, medium(a=hi_a), 80.0) <= max_frequency_for_budget(d1, medium(a=lo_a), 80.0) * (1 + 1e-12)


def test_path_gain_is_squared_pressure_ratio():
    alpha = attenuation_coefficient(5.0, MUSCLE)
    assert path_gain(0.20, 5.0, MUSCLE) == pytest.approx(pressure_ratio(0.20, alpha) ** 2)
    assert path_gain(0.0, 5.0, MUSCLE) == 1.0


@given(st.floats(0, 0.3), st.floats(0, 0.3), st.floats(0.1, 10))
def test_path_gain_multiplicative_without_spreading(d1, d2, f):
    assert path_gain(d1 + d2, f, MUSCLE) == pytest.approx(path_gain(d1, f, MUSCLE) * path_gain(d2, f, MUSCLE), rel=1e-9)


def test_delay_stats_examples():
    s = delay_stats(single_tap())
    assert s.tau_m == 0 and s.tau_rms == 0
    two = ChannelImpulseResponse(np.array([0.0, 4e-6]), np.array([1.0, 1.0j]))
    s = delay_stats(two)
    assert s.tau_m == pytest.approx(2e-6)
    assert s.tau_rms == pytest.approx(2e-6)


def test_coherence_bandwidth_of_arm_spread():
    s = delay_stats(ChannelImpulseResponse(np.array([0.0, 2 * ARM_TAU_RMS]), np.array([1.0, 1.0])))
    assert s.tau_rms == pytest.approx(ARM_TAU_RMS)
    assert s.coherence_bandwidth == pytest.approx(COHERENCE_K / ARM_TAU_RMS)
    assert s.coherence_bandwidth == pytest.approx(7.44e3, rel=0.01)


@given(st.floats(1e-3, 1e3), st.integers(0, 2**31))
@settings(max_examples=50)
def test_delay_stats_scale_invariant(scale, seed):
    cir = synth_impulse_response(20, 1e-6, 5e-6, seed)
    a, b = delay_stats(cir), delay_stats(ChannelImpulseResponse(cir.delays, cir.amplitudes * scale))
    assert b.tau_m == pytest.approx(a.tau_m, rel=1e-9)
    assert b.tau_rms == pytest.approx(a.tau_rms, rel=1e-9)


def test_synth_impulse_response_single_tap_and_determinism():
    assert delay_stats(synth_impulse_response(1, 1e-6, 1e-5, 3)).tau_rms == 0
    assert synth_impulse_response(50, 1e-6, 1e-5, 3) == synth_impulse_response(50, 1e-6, 1e-5, 3)


def test_calibrated_profile_hits_target():
    cal = calibrate_profile()
    s = delay_stats(cal.synthesize(rng_seed=0))
    assert s.tau_rms == pytest.approx(ARM_TAU_RMS, rel=0.05)


def test_cir_csv_round_trip(tmp_path):
    cir = synth_impulse_response(30, 1e-6, 5e-6, 11)
    write_cir_csv(cir, tmp_path / "cir.csv")
    assert read_cir_csv(tmp_path / "cir.csv") == cir


def test_bad_medium_rejected():
    with pytest.raises(ValueError):
        MediumParams(c=-1.0, rho=1.0, a=0.0, b=1.0)
