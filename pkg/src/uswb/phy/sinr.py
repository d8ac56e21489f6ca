"""Closed-form SINR of a time-hopping link and its Gaussian-approximation BER."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import ndtr, ndtri


@dataclass(frozen=True)
class LinkConfig:
    """One transmitter-receiver pair.

    ``gains[j]`` is the power gain from this link's transmitter to the receiver
    of link ``j`` (so ``gains[i]`` for link ``i`` itself is the useful gain).
    ``power`` is the average power per pulse period.
    """

    link_id: int
    n_h: int
    n_s: int
    power: float
    gains: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.n_h < 1 or self.n_s < 1:
            raise ValueError("n_h and n_s must be >= 1")
        if self.power < 0 or any(g < 0 for g in self.gains):
            raise ValueError("power and gains must be non-negative")

    def gain_to(self, j: int) -> float:
        return self.gains[j]


def sinr(
    i: int,
    links: Sequence[LinkConfig],
    eta: float,
    sigma2: float,
    tc: float,
    interferers: Sequence[int] | None = None,
) -> float:
    """SINR at the receiver of link ``i``.

    ``N_s P g_ii N_h Tc / (eta + sigma2 Tc sum_k (N_h,i / N_h,k) P_k g_ki)``;
    ``interferers`` defaults to every other link.
    """
    me = links[i]
    if interferers is None:
        interferers = [k for k in range(len(links)) if k != i]
    interference = sum(me.n_h / links[k].n_h * links[k].power * links[k].gain_to(i) for k in interferers)
    denom = eta + sigma2 * tc * interference
    if denom <= 0:
        raise ZeroDivisionError("SINR undefined: no noise and no interference")
    return me.n_s * me.power * me.gain_to(i) * me.n_h * tc / denom


def symmetric_sinr(n_h, n_s, k: int, eta: float, sigma2: float, tc: float, power: float = 1.0, gain: float = 1.0):
    """SINR when ``k`` equal-power interferers use the same ``(n_h, n_s)`` as the link itself."""
    denom = eta + sigma2 * tc * k * power * gain
    if denom <= 0:
        raise ZeroDivisionError("SINR undefined: no noise and no interference")
    return np.asarray(n_s) * power * gain * np.asarray(n_h) * tc / denom


def gaussian_ber(sinr_value):
    """``Q(sqrt(SINR))``: BER of antipodal detection with Gaussian interference."""
    return ndtr(-np.sqrt(np.asarray(sinr_value, dtype=float)))


def sinr_for_ber(ber: float) -> float:
    """SINR at which ``gaussian_ber`` equals ``ber``."""
    if not 0 < ber < 0.5:
        raise ValueError("ber must lie in (0, 0.5)")
    return float(ndtri(ber) ** 2)


def fit_sigma2(table, scheme: str, eta: float, bounds=(1e-3, 1e3)) -> float:
    """Fit the pulse-shape factor to Monte Carlo BERs of a table.

    Uses the symmetric model with unit per-pulse energy, ``SINR = N_s N_h /
    (eta + sigma2 K)``, and least squares on log BER over entries with
    ``K >= 1`` and ``0 < ber < 0.5``.
    """
    rows = [
        (k, h, c, table.ber(s, k, h, c))
        for (s, k, h, c) in table.keys()
        if s == scheme and k >= 1 and 0 < table.ber(s, k, h, c) < 0.5
    ]
    if not rows:
        raise ValueError(f"no usable entries for {scheme}")
    k, h, c, b = (np.array(col, dtype=float) for col in zip(*rows))
    target = np.log(b)

    def loss(log_s2: float) -> float:
        pred = gaussian_ber(c * h / (eta + math.exp(log_s2) * k))
        return float(np.sum((np.log(np.maximum(pred, 1e-300)) - target) ** 2))

    res = minimize_scalar(loss, bounds=tuple(math.log(x) for x in bounds), method="bounded")
    return math.exp(res.x)
