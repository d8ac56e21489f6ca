"""Rate and energy adaptation: integer enumeration, the geometric-program
relaxation with rounding bounds, and the piezoelectric energy model.

Feasibility of a candidate ``(N_h, N_s)`` is delegated to an *oracle*, a
callable ``(n_h, n_s) -> bool``. Oracles are built either from the closed-form
SINR or from a BER table; the solvers never look inside them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from .phy.sinr import sinr_for_ber, symmetric_sinr

Oracle = Callable[[int, int], bool]

EPS0 = 8.8542e-12  # vacuum permittivity [F/m]
INTENSITY_LIMIT = 1e4  # W/m^2


class InfeasibleError(Exception):
    """No integer pair satisfies the constraints."""


class RoundingRejected(InfeasibleError):
    """The rounded relaxed solution violates a constraint."""


@dataclass(frozen=True)
class AdaptConstraints:
    """Requirements shared by every solver.

    Exactly one of ``sinr_min`` / ``ber_max`` is normally used, depending on
    the oracle; ``sinr_min`` is derived from ``ber_max`` through the Gaussian
    approximation when only the latter is given.
    """

    r_min: float = 1000.0
    sinr_min: float | None = None
    ber_max: float | None = 1e-6
    nh_max: int = 15
    ns_max: int = 20
    tc: float = 0.5e-6

    def __post_init__(self) -> None:
        if self.r_min <= 0 or self.tc <= 0:
            raise ValueError("r_min and tc must be positive")
        if self.nh_max < 1 or self.ns_max < 1:
            raise ValueError("nh_max and ns_max must be >= 1")
        if self.sinr_min is not None and self.sinr_min <= 0:
            raise ValueError("sinr_min must be positive")
        if self.ber_max is not None and not 0 < self.ber_max < 1:
            raise ValueError("ber_max must lie in (0, 1)")

    @property
    def effective_sinr_min(self) -> float:
        if self.sinr_min is not None:
            return self.sinr_min
        if self.ber_max is None:
            raise ValueError("neither sinr_min nor ber_max is set")
        return sinr_for_ber(self.ber_max)


@dataclass(frozen=True)
class Solution:
    n_h: int
    n_s: int
    tc: float

    @property
    def rate(self) -> float:
        return rate(self.n_h, self.n_s, self.tc)

    @property
    def inverse_rate(self) -> float:
        return self.n_h * self.n_s * self.tc

    @property
    def pair(self) -> tuple[int, int]:
        return (self.n_h, self.n_s)


def rate(n_h: int, n_s: int, tc: float = 0.5e-6) -> float:
    """Information rate ``1 / (N_s N_h Tc)`` in bit/s."""
    if n_h < 1 or n_s < 1:
        raise ValueError("n_h and n_s must be >= 1")
    return 1.0 / (n_s * n_h * tc)


def _meets_rate(c: AdaptConstraints, n_h: int, n_s: int) -> bool:
    # compare inverse rates to avoid rounding at equality
    return n_h * n_s * c.tc <= 1.0 / c.r_min * (1 + 1e-12)


def _rate_order(c: AdaptConstraints, nh_min: int = 1) -> Iterable[tuple[int, int]]:
    """Grid pairs meeting ``R_min`` by decreasing rate; ties: smaller N_s, then smaller N_h."""
    pairs = [
        (h * s, s, h)
        for h in range(max(1, nh_min), c.nh_max + 1)
        for s in range(1, c.ns_max + 1)
        if _meets_rate(c, h, s)
    ]
    for _, s, h in sorted(pairs):
        yield h, s


def solve_implicit(constraints: AdaptConstraints, oracle: Oracle) -> Solution:
    """Rate-maximal feasible pair by exhaustive enumeration.

    The oracle already encodes the symmetric assumption (interferers at the
    candidate pair). Raises ``InfeasibleError``.
    """
    for h, s in _rate_order(constraints):
        if oracle(h, s):
            return Solution(h, s, constraints.tc)
    raise InfeasibleError("no (N_h, N_s) meets the rate and SINR/BER constraints")


@dataclass(frozen=True)
class InterferenceReport:
    """Tolerable-interference terms broadcast by an interfered receiver ``i``.

    ``gamma`` is its useful term, ``delta`` the interference it already sees
    from everyone except the deciding link, and ``epsilon`` the deciding link's
    contribution times the deciding link's ``N_h``.
    """

    gamma: float
    delta: float
    epsilon: float
    source: int = -1

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.delta < 0 or self.epsilon < 0:
            raise ValueError("delta and epsilon must be non-negative")
        if not all(map(math.isfinite, (self.gamma, self.delta, self.epsilon))):
            raise ValueError("report terms must be finite")

    def nh_bound(self, sinr_min: float, eta: float) -> float:
        """Smallest real ``N_h`` of the deciding link that keeps this receiver above ``sinr_min``."""
        denom = self.gamma / sinr_min - eta - self.delta
        if denom <= 0:
            return math.inf
        return self.epsilon / denom


def nh_lower_bound(reports: Sequence[InterferenceReport], sinr_min: float, eta: float) -> int:
    """Integer lower bound on ``N_h`` implied by all reports (1 when there are none)."""
    lb = 1
    for r in reports:
        b = r.nh_bound(sinr_min, eta)
        if math.isinf(b):
            raise InfeasibleError(f"receiver {r.source} tolerates no additional interference")
        lb = max(lb, math.ceil(b * (1 - 1e-12)))
    return lb


def solve_explicit(
    constraints: AdaptConstraints,
    oracle: Oracle,
    reports: Sequence[InterferenceReport] = (),
    eta: float = 0.0,
) -> Solution:
    """Enumeration with the extra per-interferer bounds ``N_h >= eps / (gamma/SINR_min - eta - delta)``."""
    lb = nh_lower_bound(reports, constraints.effective_sinr_min, eta) if reports else 1
    if lb > constraints.nh_max:
        raise InfeasibleError(f"interference reports require N_h >= {lb} > {constraints.nh_max}")
    for h, s in _rate_order(constraints, lb):
        if oracle(h, s):
            return Solution(h, s, constraints.tc)
    raise InfeasibleError("no (N_h, N_s) meets own and reported constraints")


# --- oracles -----------------------------------------------------------------


@dataclass(frozen=True)
class SinrModel:
    """Parameters of the closed-form SINR used by oracles and the relaxation."""

    eta: float = 0.01
    sigma2: float = 1.0
    power: float = 2e6  # W per pulse period; power * tc = unit pulse energy at tc = 0.5 us
    gain: float = 1.0


def symmetric_oracle(constraints: AdaptConstraints, k: int, model: SinrModel = SinrModel()) -> Oracle:
    """Feasible iff the symmetric SINR with ``k`` interferers reaches ``SINR_min``."""
    smin = constraints.effective_sinr_min

    def oracle(n_h: int, n_s: int) -> bool:
        return bool(symmetric_sinr(n_h, n_s, k, model.eta, model.sigma2, constraints.tc, model.power, model.gain) >= smin)

    return oracle


def own_sinr_oracle(constraints: AdaptConstraints, alpha: float, beta_sum: float, eta: float) -> Oracle:
    """Own-link constraint ``eta/(N_s N_h) + beta_sum/N_s <= alpha/SINR_min`` (interferer N_h fixed)."""
    rhs = alpha / constraints.effective_sinr_min

    def oracle(n_h: int, n_s: int) -> bool:
        return eta / (n_s * n_h) + beta_sum / n_s <= rhs * (1 + 1e-12)

    return oracle


def ber_oracle(table, scheme: str, k: int, ber_max: float) -> Oracle:
    """Feasible iff the tabulated BER at ``k`` interferers is at most ``ber_max``."""

    def oracle(n_h: int, n_s: int) -> bool:
        return table.ber(scheme, k, n_h, n_s) <= ber_max

    return oracle


# --- relaxation --------------------------------------------------------------


@dataclass(frozen=True)
class RelaxedProblem:
    """Continuous problem ``min N_h N_s Tc`` subject to

    ``c_hs/(N_h N_s) + c_s/N_s <= rhs``, ``N_h N_s Tc <= 1/R_min``,
    ``nh_lower <= N_h <= N_h,max`` and ``1 <= N_s <= N_s,max``.
    """

    c_hs: float
    c_s: float
    rhs: float
    nh_lower: float = 1.0

    @classmethod
    def explicit(cls, constraints: AdaptConstraints, alpha: float, beta_sum: float, eta: float, reports=()):
        smin = constraints.effective_sinr_min
        lb = 1.0
        for r in reports:
            b = r.nh_bound(smin, eta)
            if math.isinf(b):
                raise InfeasibleError(f"receiver {r.source} tolerates no additional interference")
            lb = max(lb, b)
        return cls(eta, beta_sum, alpha / smin, lb)

    @classmethod
    def symmetric(cls, constraints: AdaptConstraints, k: int, model: SinrModel = SinrModel()):
        tc = constraints.tc
        c = model.eta + model.sigma2 * tc * k * model.power * model.gain
        return cls(c, 0.0, model.power * model.gain * tc / constraints.effective_sinr_min)

    def feasible(self, n_h: float, n_s: float, constraints: AdaptConstraints, tol: float = 1e-9) -> bool:
        lhs = self.c_hs / (n_h * n_s) + self.c_s / n_s
        return (
            lhs <= self.rhs * (1 + tol)
            and n_h * n_s * constraints.tc <= (1 + tol) / constraints.r_min
            and self.nh_lower * (1 - tol) <= n_h <= constraints.nh_max * (1 + tol)
            and 1 - tol <= n_s <= constraints.ns_max * (1 + tol)
        )


@dataclass(frozen=True)
class RelaxedSolution:
    n_h: float
    n_s: float
    p_rlx: float  # optimal inverse rate, seconds per bit


def solve_relaxed(constraints: AdaptConstraints, problem: RelaxedProblem) -> RelaxedSolution:
    """Solve the relaxation as a convex program in ``(log N_h, log N_s)``.

    The objective ``log N_h + log N_s`` is linear and every constraint is a
    log-sum-exp, so SLSQP from a feasible corner converges to the global
    optimum. Raises ``InfeasibleError`` when the continuous program is empty.
    """
    c = constraints
    corner = _easiest_point(c, problem)
    if corner is None or not problem.feasible(*corner, c):
        raise InfeasibleError("relaxed program is infeasible")
    x_lo, x_hi = math.log(max(problem.nh_lower, 1.0)), math.log(c.nh_max)
    y_hi = math.log(c.ns_max)
    log_rmax = -math.log(c.r_min * c.tc)

    def sinr_con(v):
        x, y = v
        terms = []
        if problem.c_hs > 0:
            terms.append(math.log(problem.c_hs) - x - y)
        if problem.c_s > 0:
            terms.append(math.log(problem.c_s) - y)
        if not terms:
            return 1.0
        return math.log(problem.rhs) - float(np.logaddexp.reduce(terms))

    cons = [
        {"type": "ineq", "fun": sinr_con},
        {"type": "ineq", "fun": lambda v: log_rmax - v[0] - v[1]},
    ]
    start = np.log(np.array(corner))
    res = minimize(
        lambda v: v[0] + v[1],
        start,
        jac=lambda v: np.array([1.0, 1.0]),
        bounds=[(x_lo, x_hi), (0.0, y_hi)],
        constraints=cons,
        method="SLSQP",
        options={"ftol": 1e-12, "maxiter": 500},
    )
    n_h, n_s = math.exp(res.x[0]), math.exp(res.x[1])
    if not problem.feasible(n_h, n_s, c, tol=1e-6):
        raise InfeasibleError(f"relaxed solver did not reach a feasible point: {res.message}")
    return RelaxedSolution(n_h, n_s, n_h * n_s * c.tc)


def _easiest_point(c: AdaptConstraints, problem: RelaxedProblem) -> tuple[float, float] | None:
    """Point of the box and rate constraint where the SINR constraint is loosest.

    The SINR left-hand side falls with the product ``N_h N_s`` and, at fixed
    product, with ``N_s``; so take the largest allowed product and put as much
    of it as possible into ``N_s``.
    """
    lb = max(problem.nh_lower, 1.0)
    if lb > c.nh_max * (1 + 1e-12):
        return None
    prod = min(1.0 / (c.r_min * c.tc), c.nh_max * c.ns_max)
    n_s = min(float(c.ns_max), prod / lb)
    if n_s < 1.0:
        return None
    return prod / n_s, n_s


@dataclass(frozen=True)
class RoundedSolution:
    n_h: int
    n_s: int
    lower: float  # L = relaxed optimum (inverse rate)
    upper: float  # U = inverse rate at the rounded point

    @property
    def gap(self) -> float:
        return self.upper - self.lower


def round_up_at(x: float, t: float) -> int:
    """Floor of ``x``, plus one when the fractional part is positive and at least ``t``."""
    base = math.floor(x + 1e-12)
    frac = x - base
    return base + 1 if frac > 1e-9 and frac >= t else base


def round_relaxed(
    relaxed: RelaxedSolution,
    t: float,
    oracle: Oracle,
    constraints: AdaptConstraints,
) -> RoundedSolution:
    """Round both coordinates at threshold ``t``; reject the point if it is infeasible."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    h = min(max(round_up_at(relaxed.n_h, t), 1), constraints.nh_max)
    s = min(max(round_up_at(relaxed.n_s, t), 1), constraints.ns_max)
    if not (_meets_rate(constraints, h, s) and oracle(h, s)):
        raise RoundingRejected(f"rounded point ({h}, {s}) is infeasible")
    return RoundedSolution(h, s, relaxed.p_rlx, h * s * constraints.tc)


# --- energy ------------------------------------------------------------------


def max_safe_pressure(intensity_limit: float = INTENSITY_LIMIT, rho: float = 1050.0, c: float = 1580.0) -> float:
    """RMS pressure at the intensity limit: ``sqrt(I rho c)`` [Pa]."""
    if intensity_limit < 0 or rho <= 0 or c <= 0:
        raise ValueError("intensity must be non-negative, rho and c positive")
    return math.sqrt(intensity_limit * rho * c)


def disc_capacitance(area: float, k_rel: float, thickness: float) -> float:
    """Static capacitance ``A eps0 K / t_h`` of a disc transducer [F]."""
    if area <= 0 or k_rel <= 0 or thickness <= 0:
        raise ValueError("area, dielectric constant and thickness must be positive")
    return area * EPS0 * k_rel / thickness


@dataclass(frozen=True)
class PiezoParams:
    """Disc transducer driven to ``p_out``; ``c0`` is derived from the geometry when omitted.

    Defaults describe a 1 mm diameter, 0.1 mm thick PZT disc.
    """

    g33: float = 24.8e-3
    p_out: float = 0.1e6
    thickness: float = 1e-4
    c0: float | None = None
    area: float | None = math.pi * 0.5e-3**2
    k_rel: float | None = 1700.0
    rho: float = 1050.0
    c: float = 1580.0
    intensity_limit: float = INTENSITY_LIMIT

    def __post_init__(self) -> None:
        if min(self.g33, self.p_out, self.thickness, self.rho, self.c, self.intensity_limit) <= 0:
            raise ValueError("piezo parameters must be positive")
        if self.c0 is None:
            if self.area is None or self.k_rel is None:
                raise ValueError("give either c0 or (area, k_rel)")
            object.__setattr__(self, "c0", disc_capacitance(self.area, self.k_rel, self.thickness))
        elif self.c0 <= 0:
            raise ValueError("c0 must be positive")

    @property
    def voltage(self) -> float:
        return self.g33 * self.p_out * self.thickness

    @property
    def pressure_cap(self) -> float:
        return max_safe_pressure(self.intensity_limit, self.rho, self.c)


def pulse_energy(piezo: PiezoParams) -> float:
    """Energy to fire one pulse: ``C0 (g33 P t_h)^2`` [J]. Pressures above the safety cap are rejected."""
    if piezo.p_out > piezo.pressure_cap * (1 + 1e-12):
        raise ValueError(
            f"output pressure {piezo.p_out:.4g} Pa exceeds the safety cap {piezo.pressure_cap:.4g} Pa"
        )
    return piezo.c0 * piezo.voltage**2


def energy_metrics(e_p: float, n_h: int, n_s: int, tc: float = 0.5e-6) -> tuple[float, float]:
    """``(E_b, E_s)``: energy per bit ``E_p N_s`` and per second ``E_p / (Tc N_h)``."""
    if n_h < 1 or n_s < 1:
        raise ValueError("n_h and n_s must be >= 1")
    return e_p * n_s, e_p / (tc * n_h)


ENERGY_OBJECTIVES = ("Eb", "Es")


def solve_energy_min(
    objective: str,
    constraints: AdaptConstraints,
    oracle: Oracle,
    reports: Sequence[InterferenceReport] = (),
    eta: float = 0.0,
    e_p: float = 1.0,
) -> Solution:
    """Enumeration minimising ``E_b`` or ``E_s``.

    Ties go to the higher rate, then the smaller other metric, then smaller
    ``N_s`` and ``N_h``.
    """
    if objective not in ENERGY_OBJECTIVES:
        raise ValueError(f"objective must be one of {ENERGY_OBJECTIVES}")
    lb = nh_lower_bound(reports, constraints.effective_sinr_min, eta) if reports else 1
    best = None
    for h in range(lb, constraints.nh_max + 1):
        for s in range(1, constraints.ns_max + 1):
            if not (_meets_rate(constraints, h, s) and oracle(h, s)):
                continue
            e_b, e_s = energy_metrics(e_p, h, s, constraints.tc)
            main, other = (e_b, e_s) if objective == "Eb" else (e_s, e_b)
            key = (main, h * s, other, s, h)
            if best is None or key < best[0]:
                best = (key, h, s)
    if best is None:
        raise InfeasibleError("no (N_h, N_s) meets the constraints")
    return Solution(best[1], best[2], constraints.tc)
