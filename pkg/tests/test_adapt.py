import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from uswb.adapt import (
    AdaptConstraints,
    InfeasibleError,
    InterferenceReport,
    PiezoParams,
    RelaxedProblem,
    RelaxedSolution,
    RoundingRejected,
    SinrModel,
    energy_metrics,
    max_safe_pressure,
    nh_lower_bound,
    own_sinr_oracle,
    pulse_energy,
    rate,
    round_relaxed,
    solve_energy_min,
    solve_explicit,
    solve_implicit,
    solve_relaxed,
    symmetric_oracle,
)

ALWAYS = lambda h, s: True  # noqa: E731


def small(**kw):
    base = dict(r_min=1.0, sinr_min=1.0, ber_max=None, nh_max=3, ns_max=3)
    base.update(kw)
    return AdaptConstraints(**base)


def test_rate_examples():
    assert rate(1, 1) == pytest.approx(2e6)
    assert rate(15, 20) == pytest.approx(6666.6667, rel=1e-7)
    with pytest.raises(ValueError):
        rate(0, 3)


def test_implicit_unconstrained_is_full_rate():
    sol = solve_implicit(AdaptConstraints(), ALWAYS)
    assert sol.pair == (1, 1) and sol.rate == pytest.approx(2e6)


def test_implicit_synthetic_grid_tie_break():
    sol = solve_implicit(small(), lambda h, s: h + s >= 4)
    assert sol.pair == (3, 1)


def test_implicit_rate_floor_infeasible():
    with pytest.raises(InfeasibleError):
        solve_implicit(AdaptConstraints(r_min=1e5), lambda h, s: h * s >= 40)


def test_explicit_without_reports_matches_implicit():
    c = AdaptConstraints()
    o = symmetric_oracle(c, 0)
    assert solve_explicit(c, o) == solve_implicit(c, o)


def test_explicit_report_forces_frame_length():
    c = AdaptConstraints(sinr_min=1.0, ber_max=None)
    rep = InterferenceReport(gamma=1.0, delta=0.0, epsilon=6.5)
    assert nh_lower_bound([rep], 1.0, 0.0) == 7
    sol = solve_explicit(c, lambda h, s: s >= 2, [rep], eta=0.0)
    assert sol.pair == (7, 2)


def test_explicit_saturated_receiver_is_infeasible():
    c = AdaptConstraints(sinr_min=2.0, ber_max=None)
    rep = InterferenceReport(gamma=1.0, delta=0.45, epsilon=1.0)
    with pytest.raises(InfeasibleError):
        solve_explicit(c, ALWAYS, [rep], eta=0.05)


def test_invalid_report_rejected():
    with pytest.raises(ValueError):
        InterferenceReport(gamma=0.0, delta=0.0, epsilon=1.0)


@given(st.floats(0.5, 50), st.floats(0.5, 50))
def test_implicit_monotone_in_threshold(s_lo, s_hi):
    assume(s_lo <= s_hi)
    model = SinrModel(sigma2=0.5)
    lo = AdaptConstraints(sinr_min=s_lo, ber_max=None)
    hi = AdaptConstraints(sinr_min=s_hi, ber_max=None)
    try:
        r_hi = solve_implicit(hi, symmetric_oracle(hi, 3, model)).rate
    except InfeasibleError:
        return
    assert solve_implicit(lo, symmetric_oracle(lo, 3, model)).rate >= r_hi


@given(st.lists(st.tuples(st.floats(1, 100), st.floats(0, 0.5), st.floats(0, 5)), max_size=4))
def test_reports_only_shrink_the_feasible_set(raw):
    c = AdaptConstraints(sinr_min=1.0, ber_max=None)
    reps = [InterferenceReport(g, d, e) for g, d, e in raw]
    oracle = lambda h, s: h * s >= 6  # noqa: E731
    base = solve_explicit(c, oracle)
    try:
        sol = solve_explicit(c, oracle, reps, eta=0.01)
    except InfeasibleError:
        return
    assert sol.rate <= base.rate
    assert all(sol.n_h >= r.nh_bound(1.0, 0.01) * (1 - 1e-9) for r in reps)


def test_relaxed_single_constraint_on_hyperbola():
    c = AdaptConstraints(sinr_min=10.0, ber_max=None)
    eta, alpha = 0.2, 0.5
    sol = solve_relaxed(c, RelaxedProblem.explicit(c, alpha, 0.0, eta))
    assert sol.n_h * sol.n_s == pytest.approx(eta * 10.0 / alpha, rel=1e-5)
    assert sol.p_rlx == pytest.approx(4.0 * c.tc, rel=1e-5)


def test_relaxed_infeasible():
    c = AdaptConstraints(sinr_min=10.0, ber_max=None, nh_max=2, ns_max=2)
    with pytest.raises(InfeasibleError):
        solve_relaxed(c, RelaxedProblem.explicit(c, 0.01, 0.0, 1.0))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.0, 0.3), st.floats(0.001, 0.05), st.floats(0, 1))
def test_relaxed_brackets_integer_optimum(alpha, beta_sum, eta, t):
    c = AdaptConstraints(sinr_min=5.0, ber_max=None)
    oracle = own_sinr_oracle(c, alpha, beta_sum, eta)
    try:
        integer = solve_implicit(c, oracle)
    except InfeasibleError:
        return
    relaxed = solve_relaxed(c, RelaxedProblem.explicit(c, alpha, beta_sum, eta))
    assert relaxed.p_rlx <= integer.inverse_rate * (1 + 1e-6)
    try:
        r = round_relaxed(relaxed, t, oracle, c)
    except RoundingRejected:
        return
    assert r.lower <= integer.inverse_rate * (1 + 1e-6)
    assert integer.inverse_rate <= r.upper * (1 + 1e-9)


def test_rounding_thresholds():
    c = AdaptConstraints()
    x = RelaxedSolution(2.4, 3.6, 2.4 * 3.6 * c.tc)
    assert (round_relaxed(x, 0.5, ALWAYS, c).n_h, round_relaxed(x, 0.5, ALWAYS, c).n_s) == (2, 4)
    r = round_relaxed(x, 0.3, ALWAYS, c)
    assert (r.n_h, r.n_s) == (3, 4)
    assert r.upper == pytest.approx(12 * c.tc) and r.gap > 0


def test_integral_optimum_is_kept_and_rejection_raised():
    c = AdaptConstraints()
    x = RelaxedSolution(3.0, 2.0, 6 * c.tc)
    r = round_relaxed(x, 0.5, ALWAYS, c)
    assert (r.n_h, r.n_s, r.gap) == (3, 2, 0.0)
    with pytest.raises(RoundingRejected):
        round_relaxed(x, 0.5, lambda h, s: False, c)
    with pytest.raises(ValueError):
        round_relaxed(x, 1.5, ALWAYS, c)


def test_safe_pressure():
    assert max_safe_pressure(1e4, 1050, 1580) == pytest.approx(0.13e6, rel=0.01)
    assert max_safe_pressure(0.0) == 0.0
    assert max_safe_pressure(4e4) == pytest.approx(2 * max_safe_pressure(1e4))


def test_pulse_energy():
    # 1 nF at 1 V
    p = PiezoParams(g33=1.0, p_out=1e4, thickness=1e-4, c0=1e-9)
    assert pulse_energy(p) == pytest.approx(1e-9)
    p2 = PiezoParams(g33=1.0, p_out=2e4, thickness=1e-4, c0=1e-9)
    assert pulse_energy(p2) == pytest.approx(4e-9)
    with pytest.raises(ValueError, match="safety cap"):
        pulse_energy(PiezoParams(p_out=0.2e6))


def test_disc_capacitance_uses_vacuum_permittivity():
    p = PiezoParams()
    assert p.c0 == pytest.approx(math.pi * 0.25e-6 * 8.8542e-12 * 1700 / 1e-4)
    assert pulse_energy(p) == pytest.approx(7.27e-12, rel=0.01)


def test_energy_metrics():
    assert energy_metrics(3e-9, 7, 1)[0] == 3e-9
    assert energy_metrics(1e-9, 10, 5)[1] == pytest.approx(0.2e-3)
    assert energy_metrics(1.0, 2, 5)[0] == energy_metrics(1.0, 9, 5)[0]
    assert energy_metrics(1.0, 4, 2)[1] == energy_metrics(1.0, 4, 11)[1]


def test_energy_minimisers():
    c = AdaptConstraints()
    assert solve_energy_min("Eb", c, ALWAYS).n_s == 1
    # product cap 1/(R_min Tc) = 2000 is never binding on a 15x20 grid, so use a tighter floor
    c2 = AdaptConstraints(r_min=2e6 / 12, nh_max=15, ns_max=20)
    s = solve_energy_min("Es", c2, ALWAYS)
    assert s.n_h == 12 and s.n_h * s.n_s <= 12
    with pytest.raises(ValueError):
        solve_energy_min("power", c, ALWAYS)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 8), st.sampled_from(["Eb", "Es"]), st.floats(0.05, 2.0))
def test_energy_optimum_never_faster(k, objective, sigma2):
    c = AdaptConstraints()
    o = symmetric_oracle(c, k, SinrModel(sigma2=sigma2))
    try:
        best = solve_implicit(c, o)
    except InfeasibleError:
        return
    assert solve_energy_min(objective, c, o).rate <= best.rate
