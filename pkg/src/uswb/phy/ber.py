"""Monte Carlo bit error rates under multi-user time-hopping interference.

Each trial is one information bit of the link of interest. Trials are simulated
in blocks of ``block_bits``; block ``b`` of grid point ``(scheme, K, N_h, N_s)``
draws everything from ``substream(seed, scheme, K, N_h, N_s, b)``, so a table
entry depends only on its own key and the master seed.

Per block, ``K`` interferers with distinct random node ids transmit with the
same ``(N_h, N_s)`` as the link of interest (every node behaves alike), random
data, and a uniform random continuous start offset within one bit period, so
they are chip-asynchronous. All users see the same channel; interferer pulses
arrive with ``interferer_power`` times the power of the desired pulses.

Two equivalent simulators are provided. ``simulate_stream`` renders the full
sample streams and runs the public modulator/channel/receiver chain.
``simulate_windows`` only renders the chip windows the receiver looks at,
which is what makes full tables affordable. They agree exactly without noise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .._util import fmt_float, substream
from ..channel import ChannelImpulseResponse, single_tap
from .receiver import (
    _chip_starts,
    apply_channel,
    chip_windows,
    coherent_decisions,
    noise_std,
    noncoherent_decisions,
    tap_offsets,
)
from .signal import (
    BPSK,
    SCHEMES,
    HoppingPlan,
    PhyParams,
    PulseShape,
    check_scheme,
    derive_hopping_plan,
    pulse_train,
    render,
    stream_length,
)

_Z95 = 1.959963984540054
# Node ids of a block are drawn without replacement from this population.
ID_POPULATION = 256


@dataclass(frozen=True)
class BerSimConfig:
    """Everything a BER estimate depends on besides the grid point and the seed.

    ``snr_db`` is the per-pulse ``Ep/N0`` of the desired link's strongest path;
    ``interferer_power`` is the received power of each interferer relative to
    the desired signal.
    """

    params: PhyParams = field(default_factory=PhyParams)
    cir: ChannelImpulseResponse = field(default_factory=single_tap)
    snr_db: float = 20.0
    interferer_power: float = 1.5
    block_bits: int = 20
    batch_blocks: int = 100

    @property
    def eta(self) -> float:
        ep = float(np.abs(self.cir.amplitudes[self.cir.strongest]) ** 2)
        return ep * 10.0 ** (-self.snr_db / 10.0)


@dataclass
class TrialBlock:
    """Random draws of one block, shared by both simulators."""

    bits: np.ndarray
    desired: HoppingPlan
    interferers: list[HoppingPlan]
    offsets: np.ndarray  # seconds, one per interferer
    interferer_bits: np.ndarray  # (K, n_bits + 1 + lead_bits)
    noise_seed: int
    lead_bits: int = 0

    @property
    def n_bits(self) -> int:
        return self.bits.size


def draw_block(
    rng: np.random.Generator,
    scheme: str,
    n_h: int,
    n_s: int,
    k: int,
    n_bits: int,
    params: PhyParams,
    plans: dict[int, HoppingPlan] | None = None,
    lead_bits: int = 0,
) -> TrialBlock:
    """Draw one block; ``plans`` caches derived plans by node id across blocks.

    Interferers start ``1 + lead_bits`` bit periods early so that delayed
    multipath copies of their earlier pulses still reach the block.
    """
    if k + 1 > ID_POPULATION:
        raise ValueError(f"at most {ID_POPULATION - 1} interferers supported")
    plans = {} if plans is None else plans
    ids = rng.choice(ID_POPULATION, size=k + 1, replace=False)
    chosen = []
    for i in ids.tolist():
        if i not in plans:
            plans[i] = derive_hopping_plan(i, n_h, n_s, scheme)
        chosen.append(plans[i])
    bit_period = n_s * n_h * params.tc
    return TrialBlock(
        bits=rng.integers(0, 2, n_bits),
        desired=chosen[0],
        interferers=chosen[1:],
        offsets=rng.uniform(0.0, bit_period, k),
        interferer_bits=rng.integers(0, 2, (k, n_bits + 1 + lead_bits)),
        noise_seed=int(rng.integers(0, 2**63)),
        lead_bits=lead_bits,
    )


def lead_bits_for(cfg: BerSimConfig, n_h: int, n_s: int) -> int:
    """Extra early interferer bits needed to cover the channel's delay spread."""
    bit_samples = n_s * n_h * cfg.params.samples_per_chip
    return int(math.ceil(int(tap_offsets(cfg.cir, cfg.params).max()) / bit_samples))


def _trains(block: TrialBlock, cfg: BerSimConfig, t0: float = 0.0):
    """Pulse trains of every user, interferers started early to cover the block."""
    p = cfg.params
    bit_period = block.desired.n_s * block.desired.n_h * p.tc
    yield pulse_train(block.bits, block.desired, p, t0=t0)
    amp = math.sqrt(cfg.interferer_power)
    lead = (1 + block.lead_bits) * bit_period
    for plan, off, ib in zip(block.interferers, block.offsets, block.interferer_bits):
        yield pulse_train(ib, plan, p, t0=t0 + off - lead, amplitude=amp)


def _decide(windows: np.ndarray, plan: HoppingPlan, cfg: BerSimConfig):
    if plan.scheme == BPSK:
        phase = complex(cfg.cir.amplitudes[cfg.cir.strongest])
        return coherent_decisions(windows, plan, cfg.params, phase)
    return noncoherent_decisions(windows, plan, cfg.params)


def _lag(cfg: BerSimConfig) -> int:
    return int(tap_offsets(cfg.cir, cfg.params)[cfg.cir.strongest])


def simulate_stream(block: TrialBlock, cfg: BerSimConfig, eta: float | None = None):
    """Reference simulator: full streams through ``apply_channel`` and the receiver."""
    p = cfg.params
    # the stream is padded in front so early interferer pulses are not clipped
    pad_bits = 1 + block.lead_bits
    pad = stream_length(pad_bits, block.desired, p)
    n = stream_length(block.n_bits + pad_bits + 1, block.desired, p)
    tx = sum(render(tr, p, n) for tr in _trains(block, cfg, t0=pad * p.dt))
    eta = cfg.eta if eta is None else eta
    rx = apply_channel(tx, cfg.cir, eta, np.random.default_rng(block.noise_seed), p)
    windows = chip_windows(rx, block.n_bits, block.desired, p, _lag(cfg) + pad)
    return _decide(windows, block.desired, cfg)


def _train_arrays(th, code, bits, base, amp, n_h, scheme, params):
    """Vectorised ``pulse_train`` for many users with equal-length plans and bit counts."""
    u, n_s = th.shape
    nb = bits.shape[1]
    f = np.arange(nb * n_s, dtype=np.int64)
    j = f % n_s
    d = np.repeat(bits, n_s, axis=1)
    c = code[:, j]
    if scheme == BPSK:
        shift, pol = d, c.astype(float)
    else:
        shift, pol = c ^ d, np.ones(c.shape)
    pos = (f[None, :] * n_h + th[:, j]) * params.samples_per_chip + shift * params.delta_samples
    return (pos + base[:, None]).reshape(-1), (pol * amp[:, None]).reshape(-1)


def simulate_windows(blocks: TrialBlock | list[TrialBlock], cfg: BerSimConfig, eta: float | None = None):
    """Fast simulator: renders only the receiver's chip windows.

    Several blocks are laid end to end with guard gaps wide enough that no pulse
    of one block can reach another block's windows, then processed in one pass.
    Returns decisions and soft statistics for all blocks, concatenated.
    """
    if isinstance(blocks, TrialBlock):
        blocks = [blocks]
    if len({b.n_bits for b in blocks}) != 1:
        raise ValueError("blocks simulated together must have equal length")
    p = cfg.params
    spc, plen = p.samples_per_chip, p.pulse_samples
    first = blocks[0].desired
    n_h, n_s, scheme = first.n_h, first.n_s, first.scheme
    offs = tap_offsets(cfg.cir, p)
    bit_samples = n_s * n_h * spc
    nb = blocks[0].n_bits
    lead = blocks[0].lead_bits
    stride = (nb + 4 + lead) * bit_samples + int(offs.max()) + 2 * spc
    base = np.arange(len(blocks), dtype=np.int64) * stride

    lag = _lag(cfg)
    starts = np.concatenate(
        [_chip_starts(b.n_bits, b.desired, p, lag) + o for b, o in zip(blocks, base)]
    )
    k = len(blocks[0].interferers)
    th_d = np.array([b.desired.th for b in blocks], dtype=np.int64)
    code_d = np.array([b.desired.code for b in blocks], dtype=np.int64)
    bits_d = np.stack([b.bits for b in blocks])
    trains = [_train_arrays(th_d, code_d, bits_d, base.astype(float), np.ones(len(blocks)), n_h, scheme, p)]
    if k:
        th_i = np.array([pl.th for b in blocks for pl in b.interferers], dtype=np.int64)
        code_i = np.array([pl.code for b in blocks for pl in b.interferers], dtype=np.int64)
        bits_i = np.concatenate([b.interferer_bits for b in blocks])
        t0 = np.concatenate([b.offsets / p.dt - (1 + lead) * bit_samples for b in blocks]) + np.repeat(base, k)
        amp = np.full(th_i.shape[0], math.sqrt(cfg.interferer_power))
        trains.append(_train_arrays(th_i, code_i, bits_i, t0, amp, n_h, scheme, p))
    positions = np.concatenate([t[0] for t in trains])
    amplitudes = np.concatenate([t[1] for t in trains])

    buf = np.zeros((starts.size, spc), dtype=complex)
    shape = PulseShape(p)
    for k_off, h in zip(offs, cfg.cir.amplitudes):
        pos = positions + k_off
        amp = amplitudes * h
        w_last = np.searchsorted(starts, pos + plen, side="right") - 1
        for w in (w_last, w_last - 1):
            hit = (w >= 0) & (starts[np.maximum(w, 0)] + spc > pos)
            if not hit.any():
                continue
            wh, ph, ah = w[hit], pos[hit], amp[hit]
            s = starts[wh]
            m0 = np.maximum(np.ceil(ph - s - 1e-9), 0).astype(np.int64)
            m = m0[:, None] + np.arange(plen + 2)[None, :]
            vals = shape.at(s[:, None] + m - ph[:, None]) * ah[:, None]
            ok = (m < spc) & (vals != 0)
            np.add.at(buf.reshape(-1), (wh[:, None] * spc + m)[ok], vals[ok])

    eta = cfg.eta if eta is None else eta
    if eta > 0:
        sd = noise_std(eta, p)
        rows = nb * n_s
        for i, b in enumerate(blocks):
            rng = np.random.default_rng(b.noise_seed)
            seg = buf[i * rows : (i + 1) * rows]
            seg += sd * (rng.standard_normal(seg.shape) + 1j * rng.standard_normal(seg.shape))
    rows = nb * n_s
    out = [_decide(buf[i * rows : (i + 1) * rows], b.desired, cfg) for i, b in enumerate(blocks)]
    return np.concatenate([o[0] for o in out]), np.concatenate([o[1] for o in out])


def wilson_half_width(errors: int, trials: int, z: float = _Z95) -> float:
    """Half-width of the Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = errors / trials
    denom = 1.0 + z * z / trials
    return z / denom * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))


@dataclass(frozen=True)
class BerEstimate:
    ber: float
    errors: int
    trials: int
    half_width: float


def _scheme_index(scheme: str) -> int:
    return SCHEMES.index(check_scheme(scheme))


def estimate_ber(
    scheme: str,
    n_h: int,
    n_s: int,
    k: int,
    trials: int,
    rng_seed: int,
    cfg: BerSimConfig | None = None,
    method: str = "windows",
) -> BerEstimate:
    """Monte Carlo BER of one grid point with a 95% Wilson half-width."""
    if trials < 100:
        raise ValueError("at least 100 trials are required")
    if k < 0:
        raise ValueError("interferer count must be >= 0")
    cfg = cfg or BerSimConfig()
    if method not in ("windows", "stream"):
        raise ValueError(f"unknown method {method!r}")
    plans: dict[int, HoppingPlan] = {}
    n_blocks = -(-trials // cfg.block_bits)
    sizes = [cfg.block_bits] * (n_blocks - 1) + [trials - cfg.block_bits * (n_blocks - 1)]
    sidx = _scheme_index(scheme)
    lead = lead_bits_for(cfg, n_h, n_s)
    errors = 0
    for b0 in range(0, n_blocks, cfg.batch_blocks):
        batch = [
            draw_block(substream(rng_seed, sidx, k, n_h, n_s, b), scheme, n_h, n_s, k, sizes[b], cfg.params, plans, lead)
            for b in range(b0, min(b0 + cfg.batch_blocks, n_blocks))
        ]
        if method == "stream":
            for tb in batch:
                errors += int(np.count_nonzero(simulate_stream(tb, cfg)[0] != tb.bits))
            continue
        # a short final block is simulated on its own so all blocks in a pass have equal length
        groups = [g for g in ([t for t in batch if t.n_bits == cfg.block_bits], [t for t in batch if t.n_bits != cfg.block_bits]) if g]
        for g in groups:
            decided = simulate_windows(g, cfg)[0]
            errors += int(np.count_nonzero(decided != np.concatenate([t.bits for t in g])))
    return BerEstimate(errors / trials, errors, trials, wilson_half_width(errors, trials))


BER_TABLE_HEADER = ("scheme", "K", "N_h", "N_s", "ber", "trials", "ci_half_width")

Key = tuple[str, int, int, int]


@dataclass
class BerTable:
    """Empirical BER surface keyed by ``(scheme, K, N_h, N_s)``."""

    entries: dict[Key, BerEstimate] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: Key) -> bool:
        return key in self.entries

    def __getitem__(self, key: Key) -> BerEstimate:
        return self.entries[key]

    def add(self, scheme: str, k: int, n_h: int, n_s: int, est: BerEstimate) -> None:
        if not 0.0 <= est.ber <= 1.0 or est.trials <= 0:
            raise ValueError("invalid BER estimate")
        self.entries[(check_scheme(scheme), int(k), int(n_h), int(n_s))] = est

    def ber(self, scheme: str, k: int, n_h: int, n_s: int) -> float:
        try:
            return self.entries[(scheme, k, n_h, n_s)].ber
        except KeyError:
            raise KeyError(f"BER table has no entry for scheme={scheme} K={k} N_h={n_h} N_s={n_s}") from None

    def keys(self) -> list[Key]:
        return sorted(self.entries)

    def schemes(self) -> list[str]:
        return sorted({k[0] for k in self.entries})

    def max_k(self, scheme: str) -> int:
        return max(k[1] for k in self.entries if k[0] == scheme)

    def missing(self, schemes: Iterable[str], ks: Iterable[int], n_h_max: int, n_s_max: int) -> list[Key]:
        """Grid points absent from the table."""
        return [
            (s, k, h, c)
            for s in schemes
            for k in ks
            for h in range(1, n_h_max + 1)
            for c in range(1, n_s_max + 1)
            if (s, k, h, c) not in self.entries
        ]

    def save(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(BER_TABLE_HEADER)
            for key in self.keys():
                e = self.entries[key]
                w.writerow([*key, fmt_float(e.ber), e.trials, fmt_float(e.half_width)])

    @classmethod
    def load(cls, path: str | Path) -> BerTable:
        table = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != BER_TABLE_HEADER:
                raise ValueError(f"{path}: unexpected BER table header {header}")
            for row in reader:
                s, k, h, c, ber, trials, hw = row
                trials_i = int(trials)
                ber_f = float(ber)
                est = BerEstimate(ber_f, int(round(ber_f * trials_i)), trials_i, float(hw))
                key = (s, int(k), int(h), int(c))
                if key in table.entries:
                    raise ValueError(f"{path}: duplicate key {key}")
                table.add(*key, est)
        return table


def build_ber_table(
    schemes: Iterable[str],
    n_h_range: Iterable[int],
    n_s_range: Iterable[int],
    k_range: Iterable[int],
    trials: int,
    rng_seed: int,
    cfg: BerSimConfig | None = None,
    path: str | Path | None = None,
    progress=None,
) -> BerTable:
    """Estimate every grid point; optionally persist to ``path``."""
    schemes, n_hs, n_ss, ks = list(schemes), list(n_h_range), list(n_s_range), list(k_range)
    if not (schemes and n_hs and n_ss and ks):
        raise ValueError("all ranges must be non-empty")
    table = BerTable()
    for s in schemes:
        for k in ks:
            for h in n_hs:
                for c in n_ss:
                    table.add(s, k, h, c, estimate_ber(s, h, c, k, trials, rng_seed, cfg))
                    if progress is not None:
                        progress(s, k, h, c)
    if path is not None:
        table.save(path)
    return table


def with_cir(cfg: BerSimConfig, cir: ChannelImpulseResponse) -> BerSimConfig:
    return replace(cfg, cir=cir)
