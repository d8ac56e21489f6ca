import numpy as np
import pytest

from uswb.channel import ChannelImpulseResponse, single_tap
from uswb.phy.receiver import apply_channel, demodulate_coherent, demodulate_noncoherent
from uswb.phy.signal import BPSK, PPM, PhyParams, derive_hopping_plan, modulate

P = PhyParams()


def test_unit_tap_noiseless_is_identity(rng):
    x = modulate(rng.integers(0, 2, 5), derive_hopping_plan(1, 4, 3, BPSK), P)
    assert np.array_equal(apply_channel(x, single_tap(), 0.0, None, P), x.astype(complex))


def test_two_taps_superpose(rng):
    x = modulate(rng.integers(0, 2, 5), derive_hopping_plan(1, 4, 3, BPSK), P)
    k = 17
    cir = ChannelImpulseResponse(np.array([0.0, k * P.dt]), np.array([1.0, 0.5j]))
    y = apply_channel(x, cir, 0.0, None, P)
    want = np.zeros(x.size + k, dtype=complex)
    want[: x.size] += x
    want[k:] += 0.5j * x
    assert np.allclose(y, want)


def test_noise_is_seeded():
    x = np.zeros(100)
    a = apply_channel(x, single_tap(), 0.1, np.random.default_rng(3), P)
    b = apply_channel(x, single_tap(), 0.1, np.random.default_rng(3), P)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("n_h,n_s", [(1, 1), (3, 7), (15, 20)])
def test_noiseless_loopback(n_h, n_s, rng):
    bits = rng.integers(0, 2, 200)
    for scheme, demod in ((BPSK, demodulate_coherent), (PPM, demodulate_noncoherent)):
        plan = derive_hopping_plan(11, n_h, n_s, scheme)
        rx = apply_channel(modulate(bits, plan, P), single_tap(), 0.0, None, P)
        assert np.array_equal(demod(rx, plan, P, bits.size), bits)


def test_loopback_through_delayed_tap(rng):
    bits = rng.integers(0, 2, 100)
    cir = single_tap(amplitude=0.8j, delay=13 * P.dt)
    plan = derive_hopping_plan(4, 5, 4, BPSK)
    rx = apply_channel(modulate(bits, plan, P), cir, 0.0, None, P)
    assert np.array_equal(demodulate_coherent(rx, plan, P, bits.size, cir), bits)


def test_inverted_code_flips_every_bit(rng):
    bits = rng.integers(0, 2, 100)
    plan = derive_hopping_plan(2, 6, 5, BPSK)
    rx = apply_channel(modulate(bits, plan, P), single_tap(), 0.0, None, P)
    assert np.array_equal(demodulate_coherent(rx, plan.inverted(), P, bits.size), 1 - bits)


def test_energy_detector_on_pure_noise_is_a_coin_flip():
    n = 1000
    plan = derive_hopping_plan(8, 2, 3, PPM)
    rx = apply_channel(np.zeros(n * 6 * P.samples_per_chip), single_tap(), 1.0, np.random.default_rng(5), P)
    bits = np.random.default_rng(6).integers(0, 2, n)
    ber = np.mean(demodulate_noncoherent(rx, plan, P, n) != bits)
    assert ber == pytest.approx(0.5, abs=0.05)


def test_wrong_scheme_rejected():
    with pytest.raises(ValueError):
        demodulate_coherent(np.zeros(10), derive_hopping_plan(1, 1, 1, PPM), P, 1)
    with pytest.raises(ValueError):
        demodulate_noncoherent(np.zeros(10), derive_hopping_plan(1, 1, 1, BPSK), P, 1)
