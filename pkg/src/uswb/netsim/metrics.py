"""Post-processing of simulation results and CSV output."""

from __future__ import annotations

import csv
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .._util import fmt_float
from .engine import SimResult

METRICS_HEADER = ("t_start", "t_end", "connection", "delivered_bits", "dropped_packets", "throughput_bps", "mean_eb_j")
TRACE_HEADER = ("t", "connection", "n_h", "n_s", "feasible", "k")
EVENTS_HEADER = ("t", "seq", "kind", "connection", "detail")
LOADS_HEADER = (
    "step", "t_start", "t_end", "active", "throughput_bps_mean", "drop_rate", "cumulative_drop_rate", "mean_eb_j",
)


@dataclass(frozen=True)
class LoadStep:
    step: int
    t_start: float
    t_end: float
    active: tuple[int, ...]
    throughput: dict[int, float]  # per active connection, bit/s
    delivered: int
    dropped: int
    mean_eb: float  # energy per transmitted data bit over packets sent in the step [J]
    cum_delivered: int = 0  # since the start of the run
    cum_dropped: int = 0

    @property
    def drop_rate(self) -> float:
        """Drop rate of the packets arriving within this step."""
        n = self.delivered + self.dropped
        return self.dropped / n if n else 0.0

    @property
    def cumulative_drop_rate(self) -> float:
        """Drop rate of every packet that arrived from the start of the run to the end of this step."""
        n = self.cum_delivered + self.cum_dropped
        return self.cum_dropped / n if n else 0.0

    @property
    def mean_throughput(self) -> float:
        return float(np.mean(list(self.throughput.values()))) if self.throughput else 0.0

    def group_throughput(self, members) -> float:
        vals = [self.throughput[i] for i in members if i in self.throughput]
        return float(np.mean(vals)) if vals else 0.0


def _packet_mask(res: SimResult, t0: float, t1: float, column: str = "t_arrive"):
    t = res.packets[column]
    return (t >= t0) & (t < t1)


def load_steps(res: SimResult) -> list[LoadStep]:
    """Statistics between successive activation times (the last step runs to the end)."""
    cfg = res.config
    bits = cfg.mac.data_bits
    pk = res.packets
    out = []
    active: list[int] = []
    for s, (t0, group) in enumerate(res.schedule):
        active = active + list(group)
        t1 = res.schedule[s + 1][0] if s + 1 < len(res.schedule) else cfg.duration
        t1 = min(t1, cfg.duration)
        if t1 <= t0:
            continue
        m = _packet_mask(res, t0, t1)
        thr = {}
        for i in active:
            sel = m & (pk["connection"] == i) & pk["ok"]
            thr[i] = float(np.count_nonzero(sel)) * bits / (t1 - t0)
        sent = _packet_mask(res, t0, t1, "t_send")
        mean_eb = float(np.mean(pk["n_s"][sent])) * cfg.e_p if np.any(sent) else float("nan")
        upto = pk["t_arrive"] < t1
        out.append(
            LoadStep(
                s,
                t0,
                t1,
                tuple(active),
                thr,
                int(np.count_nonzero(m & pk["ok"])),
                int(np.count_nonzero(m & ~pk["ok"])),
                mean_eb,
                int(np.count_nonzero(upto & pk["ok"])),
                int(np.count_nonzero(upto & ~pk["ok"])),
            )
        )
    return out


def window_rows(res: SimResult) -> list[tuple]:
    cfg = res.config
    pk = res.packets
    edges = np.arange(0.0, cfg.duration + cfg.window * 0.5, cfg.window)
    if edges[-1] < cfg.duration:
        edges = np.append(edges, cfg.duration)
    rows = []
    for t0, t1 in zip(edges[:-1], edges[1:]):
        m = _packet_mask(res, t0, t1)
        sent = _packet_mask(res, t0, t1, "t_send")
        for i in range(res.n_connections):
            mi = m & (pk["connection"] == i)
            ok = int(np.count_nonzero(mi & pk["ok"]))
            drop = int(np.count_nonzero(mi & ~pk["ok"]))
            si = sent & (pk["connection"] == i)
            eb = float(np.mean(pk["n_s"][si])) * cfg.e_p if np.any(si) else 0.0
            rows.append((t0, t1, i, ok * cfg.mac.data_bits, drop, ok * cfg.mac.data_bits / (t1 - t0), eb))
    return rows


def pair_at(res: SimResult, connection: int, t: float) -> tuple[int, int] | None:
    """Pair in use by a connection at time ``t`` (``None`` before it connects)."""
    rows = [r for r in res.trace if r[1] == connection]
    times = [r[0] for r in rows]
    k = bisect_right(times, t)
    if k == 0:
        return None
    return rows[k - 1][2], rows[k - 1][3]


def convergence_rounds(res: SimResult) -> tuple[int, bool]:
    """Adaptation rounds after the last connection joined, and whether all end on one pair.

    A round is one ACK of a connection; the count is the largest number of
    ACKs any connection needed after the last join before its final change.
    """
    t_last = float(np.nanmax(res.connected_at))
    rounds = 0
    for i in range(res.n_connections):
        changes = [r[0] for r in res.trace if r[1] == i and r[0] > t_last]
        if changes:
            acks = res.acks[i]
            rounds = max(rounds, bisect_right(acks, changes[-1]) - bisect_right(acks, t_last))
    finals = {pair_at(res, i, res.config.duration) for i in range(res.n_connections)}
    return rounds, len(finals) == 1 and None not in finals


def _write(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt_float(x) if isinstance(x, float) else x for x in r])


def write_outputs(res: SimResult, out_dir: str | Path, events: bool = True) -> list[Path]:
    """Write ``metrics.csv``, ``trace.csv``, ``loads.csv`` and optionally ``events.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "metrics.csv", out / "trace.csv", out / "loads.csv"]
    _write(paths[0], METRICS_HEADER, window_rows(res))
    _write(paths[1], TRACE_HEADER, res.trace)
    _write(
        paths[2],
        LOADS_HEADER,
        [
            (s.step, s.t_start, s.t_end, len(s.active), s.mean_throughput, s.drop_rate, s.cumulative_drop_rate, s.mean_eb)
            for s in load_steps(res)
        ],
    )
    if events:
        paths.append(out / "events.csv")
        _write(paths[-1], EVENTS_HEADER, res.events)
    return paths
