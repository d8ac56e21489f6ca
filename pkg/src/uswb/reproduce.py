"""Desk-scale experiment recipes (fig1 ... fig8); each writes CSV files only.

Wall-clock budgets on one core (approximate): fig1 30 s, fig3 10 s, fig4 1 s,
fig5 5 s, fig6 60 s, fig7 60 s, fig8 10 s.
"""

from __future__ import annotations

import csv
from dataclasses import replace
from pathlib import Path
from typing import Callable

from ._util import fmt_float
from .channel import delay_stats, write_cir_csv
from .config import ScenarioConfig, load_scenario
from .netsim import generate_topology, load_steps, simulate, write_outputs
from .phy.ber import BerTable
from .phy.signal import BPSK, PPM
from .wavefield import WaveConfig, arrival_clusters, extract_impulse_response, run_arm, write_series_csv

FIGURES = ("fig1", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8")


def _write(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt_float(x) if isinstance(x, float) else x for x in r])
    return path


def _run(cfg: ScenarioConfig, table: BerTable, seed: int, **net_overrides):
    topo = generate_topology(cfg.topology, seed)
    net = replace(cfg.net_config(table), **net_overrides)
    return simulate(topo, table, net, seed)


def fig1(cfg: ScenarioConfig, table: BerTable | None, seed: int, out: Path) -> list[Path]:
    """Arm cross-section: sink pressure series, extracted impulse response, arrival clusters."""
    wcfg: WaveConfig = cfg.wave
    _, res = run_arm(wcfg, cfg.tissue_file)
    paths = [out / "fig1_sink.csv", out / "fig1_cir.csv", out / "fig1_clusters.csv"]
    write_series_csv(res.t, res.sink, paths[0])
    cir = extract_impulse_response(res.sink, res.dt)
    write_cir_csv(cir, paths[1])
    stats = delay_stats(cir)
    rows = [(float(t), float(h)) for t, h in arrival_clusters(res.sink, res.dt)]
    _write(paths[2], ("t_arrival", "relative_height"), rows)
    print(f"fig1: {len(rows)} arrival clusters, tau_rms = {stats.tau_rms:.4g} s")
    return paths


def fig3(cfg: ScenarioConfig, table: BerTable, seed: int, out: Path) -> list[Path]:
    """Implicit adaptation: mean per-connection throughput and drop rate versus active connections."""
    rows = []
    for scheme in (BPSK, PPM):
        res = _run(cfg, table, seed, scheme=scheme, mode="implicit", record_events=False)
        for s in load_steps(res):
            rows.append((scheme, len(s.active), s.mean_throughput, s.drop_rate))
    return [_write(out / "fig3_throughput.csv", ("scheme", "connections", "throughput_bps", "drop_rate"), rows)]


def fig4(cfg: ScenarioConfig, table: BerTable, seed: int, out: Path, k: int = 4) -> list[Path]:
    """BER surfaces of both receivers at ``k`` interferers, read from the table."""
    rows = []
    c = cfg.net.constraints
    for scheme in (BPSK, PPM):
        for h in range(1, c.nh_max + 1):
            for n in range(1, c.ns_max + 1):
                e = table[(scheme, k, h, n)]
                rows.append((scheme, k, h, n, e.ber, e.half_width))
    return [_write(out / "fig4_ber.csv", ("scheme", "K", "N_h", "N_s", "ber", "ci_half_width"), rows)]


def fig5(cfg: ScenarioConfig, table: BerTable, seed: int, out: Path) -> list[Path]:
    """Staged activation, implicit mode, coherent receiver: the (N_h, N_s) traces."""
    res = _run(cfg, table, seed, scheme=BPSK, mode="implicit")
    return write_outputs(res, out / "fig5", events=False)


def fig6(cfg: ScenarioConfig, table: BerTable, seed: int, out: Path) -> list[Path]:
    """Three clusters, explicit mode: per-cluster throughput at every load step."""
    res = _cluster_run(cfg, table, seed)
    rows = []
    cl = res.topology.cluster
    for s in load_steps(res):
        for c in range(3):
            members = [i for i in s.active if cl[i] == c]
            rows.append((s.step, len(s.active), c, s.group_throughput(members)))
    return [_write(out / "fig6_clusters.csv", ("step", "connections", "cluster", "throughput_bps"), rows)]


def fig7(cfg: ScenarioConfig, table: BerTable, seed: int, out: Path) -> list[Path]:
    """Three clusters, explicit mode: (N_h, N_s) traces with cluster labels."""
    res = _cluster_run(cfg, table, seed)
    cl = res.topology.cluster
    rows = [(t, i, int(cl[i]), h, n) for t, i, h, n, *_ in res.trace]
    return [_write(out / "fig7_trace.csv", ("t", "connection", "cluster", "n_h", "n_s"), rows)]


def fig8(cfg: ScenarioConfig, table: BerTable, seed: int, out: Path) -> list[Path]:
    """E_b-minimising versus rate-maximising adaptation on the single-square scenario."""
    rows = []
    for mode in ("implicit", "energy_Eb"):
        res = _run(cfg, table, seed, scheme=BPSK, mode=mode, record_events=False)
        for s in load_steps(res):
            rows.append((mode, len(s.active), s.mean_throughput, s.mean_eb, s.drop_rate))
    return [_write(out / "fig8_energy.csv", ("mode", "connections", "throughput_bps", "mean_eb_j", "drop_rate"), rows)]


def _cluster_run(cfg: ScenarioConfig, table: BerTable, seed: int):
    topo_cfg = replace(cfg.topology, setting="three_clusters")
    cfg = replace(cfg, topology=topo_cfg)
    duration = cfg.net.first_activation + 3 * cfg.net.activation_spacing
    return _run(cfg, table, seed, scheme=BPSK, mode="explicit", duration=duration, record_events=False)


RECIPES: dict[str, Callable] = {f.__name__: f for f in (fig1, fig3, fig4, fig5, fig6, fig7, fig8)}


def reproduce(figure: str, out_dir: str | Path, seed: int = 1, scenario: str | Path | None = None,
              ber_table: str | Path | None = None) -> list[Path]:
    if figure not in RECIPES:
        raise ValueError(f"unknown figure {figure!r}; expected one of {FIGURES}")
    cfg = load_scenario(scenario)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = None if figure == "fig1" else cfg.load_table(ber_table)
    return RECIPES[figure](cfg, table, seed, out)
