import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from uswb.phy.ber import BerEstimate, BerTable
from uswb.phy.sinr import LinkConfig, fit_sigma2, gaussian_ber, sinr, sinr_for_ber, symmetric_sinr

TC = 0.5e-6


def links(n_h, n_s, others, power=1.0, gain=1.0):
    n = 1 + len(others)
    me = LinkConfig(0, n_h, n_s, power, (gain,) * n)
    return [me] + [LinkConfig(i + 1, h, 1, power, (gain,) * n) for i, h in enumerate(others)]


def test_no_interferers():
    assert sinr(0, links(3, 4, []), eta=0.01, sigma2=1.0, tc=TC) == pytest.approx(4 * 3 * TC / 0.01)


def test_one_equal_interferer_noise_free_limit():
    v = sinr(0, links(5, 6, [5]), eta=1e-15, sigma2=2.0, tc=TC)
    assert v == pytest.approx(6 * 5 / 2.0, rel=1e-6)


def test_interferer_frame_length_doubling_doubles_sinr():
    a = sinr(0, links(4, 3, [2, 5]), eta=0.0, sigma2=1.0, tc=TC)
    b = sinr(0, links(4, 3, [4, 10]), eta=0.0, sigma2=1.0, tc=TC)
    assert b == pytest.approx(2 * a)


def test_undefined_sinr_raises():
    with pytest.raises(ZeroDivisionError):
        sinr(0, links(1, 1, []), eta=0.0, sigma2=1.0, tc=TC)


@given(st.integers(1, 15), st.integers(1, 19), st.lists(st.integers(1, 15), max_size=8), st.floats(1e-6, 1.0))
def test_strictly_increasing_in_own_code(n_h, n_s, others, eta):
    a = sinr(0, links(n_h, n_s, others), eta, 1.0, TC)
    b = sinr(0, links(n_h, n_s + 1, others), eta, 1.0, TC)
    assert b > a


def test_symmetric_matches_general():
    v = symmetric_sinr(3, 7, 4, 0.01, 1.0, TC, power=2e6)
    w = sinr(0, links(3, 7, [3] * 4, power=2e6), 0.01, 1.0, TC)
    assert v == pytest.approx(w)


def test_gaussian_ber_inverse():
    for b in (1e-2, 1e-6, 1e-9):
        assert gaussian_ber(sinr_for_ber(b)) == pytest.approx(b, rel=1e-9)
    assert sinr_for_ber(1e-6) == pytest.approx(22.6, abs=0.05)


def test_fit_sigma2_recovers_model():
    s2, eta = 0.3, 0.01
    t = BerTable()
    for k in range(1, 5):
        for h in range(1, 4):
            for s in range(1, 4):
                b = float(gaussian_ber(s * h / (eta + s2 * k)))
                t.add("ppm-bpsk", k, h, s, BerEstimate(b, 1, 10**6, 0.0))
    assert fit_sigma2(t, "ppm-bpsk", eta) == pytest.approx(s2, rel=1e-3)
