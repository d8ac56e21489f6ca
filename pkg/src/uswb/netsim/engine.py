"""Discrete-event simulation of the handshake MAC with per-packet adaptation.

Every connection has a saturated transmitter. A transmitter first reserves its
receiver with an R2T/C2T exchange on the common channel at the fixed common
pair, then sends data packets back to back (stop and wait). The receiver judges
each packet with the BER table at the number of interferers that were connected
during its airtime, picks the pair for the next packet and returns it in the
ACK/NACK. NACKed packets are dropped; there is no data retransmission.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .._util import substream
from ..adapt import (
    AdaptConstraints,
    InfeasibleError,
    InterferenceReport,
    ber_oracle,
    nh_lower_bound,
    own_sinr_oracle,
    solve_energy_min,
    solve_explicit,
    solve_implicit,
)
from ..phy.ber import BerTable
from ..phy.signal import BPSK, check_scheme
from .topology import Topology

MODES = ("implicit", "explicit", "energy_Eb", "energy_Es")

IDLE, WAIT_C2T, CONNECTED = "IDLE", "WAIT_C2T", "CONNECTED"

# event kinds, in tie-break order at equal times
_ACTIVATE, _R2T_SEND, _R2T_ARRIVE, _C2T_ARRIVE, _TIMEOUT, _DATA_ARRIVE, _ACK_ARRIVE = range(7)

# substream tags
_FATE, _BACKOFF, _CONTROL = 1, 2, 3


@dataclass(frozen=True)
class MacConfig:
    data_bits: int = 1024
    control_bits: int = 64
    ack_bits: int = 64
    backoff_min: float = 1e-3
    backoff_max: float = 10e-3
    n_retries: int = 3
    retry_after: float = 1.0  # an aborted reservation is retried after this idle time
    timeout_margin: float = 1e-3
    common_nh: int = 15
    common_ns: int = 20

    def __post_init__(self) -> None:
        if min(self.data_bits, self.control_bits, self.ack_bits) < 1:
            raise ValueError("packet lengths must be >= 1 bit")
        if not 0 <= self.backoff_min <= self.backoff_max:
            raise ValueError("need 0 <= backoff_min <= backoff_max")
        if self.n_retries < 0 or self.retry_after <= 0 or self.timeout_margin < 0:
            raise ValueError("n_retries >= 0, retry_after > 0 and timeout_margin >= 0 required")
        if self.common_nh < 1 or self.common_ns < 1:
            raise ValueError("common pair must be >= 1")


@dataclass(frozen=True)
class NetConfig:
    mode: str = "implicit"
    scheme: str = BPSK
    constraints: AdaptConstraints = field(default_factory=AdaptConstraints)
    mac: MacConfig = field(default_factory=MacConfig)
    duration: float = 50.0
    first_activation: float = 0.0
    activation_spacing: float = 5.0
    window: float = 1.0
    eta: float = 0.01  # noise term of the closed-form SINR (explicit mode)
    sigma2: float = 1.0  # pulse-shape factor of the closed-form SINR (explicit mode)
    explicit_oracle: str = "both"  # own-link check in explicit mode: "ber" (table at current K) | "sinr" (closed form) | "both"
    e_p: float = 1.0  # energy per pulse [J]
    record_events: bool = True

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        check_scheme(self.scheme)
        if self.duration <= 0 or self.window <= 0 or self.activation_spacing < 0 or self.first_activation < 0:
            raise ValueError("duration and window must be positive, activation times non-negative")
        if self.eta < 0 or self.sigma2 <= 0 or self.e_p <= 0:
            raise ValueError("eta >= 0, sigma2 > 0 and e_p > 0 required")
        if self.constraints.ber_max is None:
            raise ValueError("the network simulator needs ber_max")
        if self.explicit_oracle not in ("ber", "sinr", "both"):
            raise ValueError(f"explicit_oracle must be 'ber', 'sinr' or 'both', got {self.explicit_oracle!r}")


def activation_schedule(topo: Topology, cfg: NetConfig) -> list[tuple[float, list[int]]]:
    """Load steps ``(time, connections)``.

    One connection per step in index order; for the cluster layout every
    cluster that still has an idle connection starts one at each step.
    """
    n = topo.n_connections
    if topo.cluster.max() > 0:
        members = [np.flatnonzero(topo.cluster == c).tolist() for c in range(3)]
        steps = max(len(m) for m in members)
        groups = [[m[s] for m in members if s < len(m)] for s in range(steps)]
    else:
        groups = [[i] for i in range(n)]
    return [(cfg.first_activation + s * cfg.activation_spacing, g) for s, g in enumerate(groups)]


@dataclass
class _Conn:
    idx: int
    delay: float
    interferers: list[int]
    state: str = IDLE
    attempt: int = 0
    retries: int = 0
    pair: tuple[int, int] = (0, 0)
    k_peak: int = 0
    in_flight: bool = False
    packets_sent: int = 0


@dataclass
class _Report:
    """Receiver state published after an adaptation (explicit mode)."""

    t: float
    n_h: int
    n_s: int
    interferer_nh: dict[int, int]


@dataclass
class SimResult:
    topology: Topology
    config: NetConfig
    schedule: list[tuple[float, list[int]]]
    connected_at: list[float]
    trace: list[tuple[float, int, int, int, int, int]]  # t, connection, n_h, n_s, feasible, k at choice
    bounds: list[tuple[float, int, float, int]]  # explicit mode: t, connection, N_h lower bound, chosen N_h
    acks: list[list[float]]
    packets: dict[str, np.ndarray]
    events: list[tuple[float, int, str, int, str]]
    generated: int
    delivered: int
    dropped: int
    in_flight: int
    aborted: int
    control_lost: int
    infeasible: int

    @property
    def n_connections(self) -> int:
        return self.topology.n_connections


class Simulator:
    def __init__(self, topo: Topology, table: BerTable, cfg: NetConfig, seed: int):
        self.topo, self.table, self.cfg, self.seed = topo, table, cfg, int(seed)
        inter = topo.interference_sets()
        self.conns = [_Conn(i, topo.link_delay(i), inter[i]) for i in range(topo.n_connections)]
        self.k_table_max = table.max_k(cfg.scheme)
        self._fate = [substream(seed, _FATE, i) for i in range(topo.n_connections)]
        self._backoff = [substream(seed, _BACKOFF, i) for i in range(topo.n_connections)]
        self._control = substream(seed, _CONTROL)
        self._heap: list = []
        self._seq = 0
        self._cache: dict = {}
        self._controls: list[tuple[float, float, int]] = []  # start, end, sender node
        self._reports: list[list[_Report]] = [[] for _ in self.conns]
        self.schedule = activation_schedule(topo, cfg)
        self.connected_at = [math.nan] * topo.n_connections
        self.trace: list = []
        self.bounds: list = []
        self.acks: list[list[float]] = [[] for _ in self.conns]
        self.events: list = []
        self._pk: dict[str, list] = {k: [] for k in ("connection", "t_send", "t_arrive", "n_h", "n_s", "k", "ok")}
        self.generated = self.delivered = self.dropped = 0
        self.aborted = self.control_lost = self.infeasible = 0
        c = cfg.mac
        self.tc = cfg.constraints.tc
        self.ctl_dur = c.control_bits * c.common_nh * c.common_ns * self.tc

    # --- plumbing -------------------------------------------------------------

    def _push(self, t: float, kind: int, conn: int, data=None) -> None:
        heapq.heappush(self._heap, (t, kind, self._seq, conn, data))
        self._seq += 1

    def _log(self, t: float, kind: str, conn: int, detail: str = "") -> None:
        if self.cfg.record_events:
            self.events.append((t, len(self.events), kind, conn, detail))

    def k_now(self, i: int) -> int:
        return sum(1 for j in self.conns[i].interferers if self.conns[j].state == CONNECTED)

    # --- control channel ------------------------------------------------------

    def _control_fails(self, t_start: float, t_end: float, sender: int, receiver: int, conn: int) -> bool:
        d = self.topo.distances
        overlapping = sum(
            1
            for s, e, node in self._controls
            if node != sender and s < t_end and e > t_start and d[node, receiver] <= self.topo.range_m
        )
        k = min(self.k_now(conn) + overlapping, self.k_table_max)
        m = self.cfg.mac
        ber = self.table.ber(self.cfg.scheme, k, m.common_nh, m.common_ns)
        per = 1.0 - (1.0 - ber) ** m.control_bits
        return bool(self._control.random() < per)

    def _send_control(self, t: float, sender: int) -> None:
        self._controls = [c for c in self._controls if c[1] > t - 1.0]
        self._controls.append((t, t + self.ctl_dur, sender))

    def _send_r2t(self, t: float, c: _Conn) -> None:
        c.attempt += 1
        c.state = WAIT_C2T
        self._send_control(t, int(self.topo.tx[c.idx]))
        self._push(t + self.ctl_dur + c.delay, _R2T_ARRIVE, c.idx, (c.attempt, t))
        timeout = t + 2 * (self.ctl_dur + c.delay) + self.cfg.mac.timeout_margin
        self._push(timeout, _TIMEOUT, c.idx, c.attempt)
        self._log(t, "r2t_send", c.idx, f"attempt={c.attempt}")

    # --- adaptation -----------------------------------------------------------

    def _adapt(self, t: float, c: _Conn, k: int) -> tuple[tuple[int, int], bool]:
        cfg = self.cfg
        mode = cfg.mode
        try:
            if mode == "explicit":
                sol = self._adapt_explicit(t, c)
            else:
                key = (mode, k)
                if key not in self._cache:
                    oracle = ber_oracle(self.table, cfg.scheme, k, cfg.constraints.ber_max)
                    try:
                        if mode == "implicit":
                            self._cache[key] = solve_implicit(cfg.constraints, oracle)
                        else:
                            self._cache[key] = solve_energy_min(mode.split("_")[1], cfg.constraints, oracle, e_p=cfg.e_p)
                    except InfeasibleError as exc:
                        self._cache[key] = exc
                sol = self._cache[key]
                if isinstance(sol, InfeasibleError):
                    raise sol
            return sol.pair, True
        except InfeasibleError as exc:
            self.infeasible += 1
            self._log(t, "infeasible", c.idx, str(exc))
            return (cfg.constraints.nh_max, cfg.constraints.ns_max), False

    def _adapt_explicit(self, t: float, c: _Conn):
        cfg = self.cfg
        live = [j for j in c.interferers if self.conns[j].state == CONNECTED]
        # unit pulse energy and unit gain inside the range: alpha = P g Tc = 1
        beta_sum = cfg.sigma2 * sum(1.0 / self.conns[j].pair[0] for j in live)
        sinr_ok = own_sinr_oracle(cfg.constraints, 1.0, beta_sum, cfg.eta)
        # packet errors are drawn from the table, so the own link is checked against it too
        ber_ok = ber_oracle(self.table, cfg.scheme, self.k_now(c.idx), cfg.constraints.ber_max)
        oracle = {"sinr": sinr_ok, "ber": ber_ok, "both": lambda h, s: sinr_ok(h, s) and ber_ok(h, s)}[cfg.explicit_oracle]
        reports = []
        d = self.topo.distances
        me_rx = int(self.topo.rx[c.idx])
        for i in live:
            rep = self._visible_report(i, t, d[int(self.topo.rx[i]), me_rx] / self.topo.sound_speed)
            if rep is None:
                continue
            delta = cfg.sigma2 * rep.n_h * sum(1.0 / nh for j, nh in rep.interferer_nh.items() if j != c.idx)
            reports.append(InterferenceReport(rep.n_h * rep.n_s, delta, cfg.sigma2 * rep.n_h, source=i))
        try:
            lb = nh_lower_bound(reports, cfg.constraints.effective_sinr_min, cfg.eta)
        except InfeasibleError:
            self.bounds.append((t, c.idx, math.inf, cfg.constraints.nh_max))
            raise
        sol = solve_explicit(cfg.constraints, oracle, reports, cfg.eta)
        self.bounds.append((t, c.idx, float(lb), sol.n_h))
        return sol

    def _visible_report(self, i: int, t: float, delay: float) -> _Report | None:
        for rep in reversed(self._reports[i]):
            if rep.t + delay <= t:
                return rep
        return None

    def _publish(self, t: float, c: _Conn, pair: tuple[int, int]) -> None:
        nh = {j: self.conns[j].pair[0] for j in c.interferers if self.conns[j].state == CONNECTED}
        hist = self._reports[c.idx]
        hist.append(_Report(t, pair[0], pair[1], nh))
        if len(hist) > 8:
            del hist[:-8]

    # --- data path ------------------------------------------------------------

    def _send_data(self, t: float, c: _Conn) -> None:
        n_h, n_s = c.pair
        dur = self.cfg.mac.data_bits * n_h * n_s * self.tc
        c.k_peak = self.k_now(c.idx)
        c.in_flight = True
        c.packets_sent += 1
        self.generated += 1
        self._push(t + dur + c.delay, _DATA_ARRIVE, c.idx, (t, n_h, n_s))

    def _on_connected(self, t: float, c: _Conn) -> None:
        c.state = CONNECTED
        self.connected_at[c.idx] = t
        m = self.cfg.mac
        c.pair = (m.common_nh, m.common_ns)
        self.trace.append((t, c.idx, c.pair[0], c.pair[1], 1, self.k_now(c.idx)))
        self._log(t, "connected", c.idx, f"n_h={c.pair[0]} n_s={c.pair[1]}")
        self._touch_neighbours(c)
        self._send_data(t, c)

    def _touch_neighbours(self, c: _Conn) -> None:
        # a join raises the interferer count seen by packets in flight
        for j in c.interferers:
            o = self.conns[j]
            if o.in_flight:
                o.k_peak = max(o.k_peak, self.k_now(j))


    # --- main loop ------------------------------------------------------------

    def run(self) -> SimResult:
        for t, group in self.schedule:
            for i in group:
                self._push(t, _ACTIVATE, i)
        end = self.cfg.duration
        m = self.cfg.mac
        while self._heap and self._heap[0][0] <= end:
            t, kind, _, i, data = heapq.heappop(self._heap)
            c = self.conns[i]
            if kind == _ACTIVATE:
                if c.state == IDLE:
                    c.retries = 0
                    self._log(t, "activate", i)
                    self._send_r2t(t, c)
            elif kind == _R2T_SEND:
                if c.state == WAIT_C2T:
                    self._send_r2t(t, c)
            elif kind == _R2T_ARRIVE:
                attempt, t0 = data
                rx, tx = int(self.topo.rx[i]), int(self.topo.tx[i])
                if self._control_fails(t0, t0 + self.ctl_dur, tx, rx, i):
                    self.control_lost += 1
                    self._log(t, "r2t_lost", i, f"attempt={attempt}")
                    continue
                self._send_control(t, rx)
                self._push(t + self.ctl_dur + c.delay, _C2T_ARRIVE, i, (attempt, t))
                self._log(t, "c2t_send", i, f"attempt={attempt}")
            elif kind == _C2T_ARRIVE:
                attempt, t0 = data
                if c.state != WAIT_C2T or attempt != c.attempt:
                    continue
                rx, tx = int(self.topo.rx[i]), int(self.topo.tx[i])
                if self._control_fails(t0, t0 + self.ctl_dur, rx, tx, i):
                    self.control_lost += 1
                    self._log(t, "c2t_lost", i, f"attempt={attempt}")
                    continue
                self._on_connected(t, c)
            elif kind == _TIMEOUT:
                if c.state != WAIT_C2T or data != c.attempt:
                    continue
                c.retries += 1
                if c.retries > m.n_retries:
                    c.state = IDLE
                    self.aborted += 1
                    self._log(t, "abort", i, f"retries={m.n_retries}")
                    self._push(t + m.retry_after, _ACTIVATE, i)
                else:
                    wait = self._backoff[i].uniform(m.backoff_min, m.backoff_max)
                    self._log(t, "backoff", i, f"retry={c.retries} wait={wait!r}")
                    self._push(t + wait, _R2T_SEND, i)
            elif kind == _DATA_ARRIVE:
                t_send, n_h, n_s = data
                c.in_flight = False
                k = max(c.k_peak, self.k_now(i))
                ber = self.table.ber(self.cfg.scheme, k, n_h, n_s)
                per = 1.0 - (1.0 - ber) ** m.data_bits
                ok = bool(self._fate[i].random() >= per)
                if ok:
                    self.delivered += 1
                else:
                    self.dropped += 1
                for key, val in zip(self._pk, (i, t_send, t, n_h, n_s, k, ok)):
                    self._pk[key].append(val)
                k_choice = self.k_now(i)
                new_pair, feasible = self._adapt(t, c, k_choice)
                if self.cfg.mode == "explicit":
                    self._publish(t, c, new_pair)
                ack_dur = m.ack_bits * n_h * n_s * self.tc
                self._push(t + ack_dur + c.delay, _ACK_ARRIVE, i, (ok, new_pair, feasible, k_choice))
                self._log(t, "data_ok" if ok else "data_drop", i, f"k={k} n_h={n_h} n_s={n_s}")
            elif kind == _ACK_ARRIVE:
                ok, new_pair, feasible, k_choice = data
                self.acks[i].append(t)
                if new_pair != c.pair:
                    c.pair = new_pair
                    self.trace.append((t, i, new_pair[0], new_pair[1], int(feasible), k_choice))
                self._send_data(t, c)
        in_flight = sum(1 for c in self.conns if c.in_flight)
        packets = {
            k: np.asarray(v, dtype=bool if k == "ok" else (np.int64 if k in ("connection", "n_h", "n_s", "k") else float))
            for k, v in self._pk.items()
        }
        return SimResult(
            self.topo, self.cfg, self.schedule, self.connected_at, self.trace, self.bounds, self.acks, packets,
            self.events, self.generated, self.delivered, self.dropped, in_flight,
            self.aborted, self.control_lost, self.infeasible,
        )


def simulate(topo: Topology, table: BerTable, cfg: NetConfig, seed: int) -> SimResult:
    """Run one scenario; identical inputs give identical results."""
    needed = max((len(s) for s in topo.interference_sets()), default=0)
    if table.max_k(cfg.scheme) < needed:
        raise ValueError(f"BER table covers K <= {table.max_k(cfg.scheme)} but the topology needs K = {needed}")
    return Simulator(topo, table, cfg, seed).run()
