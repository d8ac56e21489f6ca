"""Command-line entry point: ``uswb <subcommand>``.

Exit codes: 0 success, 1 configuration error, 2 infeasible instance, 3 I/O error.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from ._util import data_path, fmt_float, load_toml
from .adapt import (
    AdaptConstraints,
    InfeasibleError,
    InterferenceReport,
    PiezoParams,
    RelaxedProblem,
    RoundingRejected,
    SinrModel,
    ber_oracle,
    energy_metrics,
    own_sinr_oracle,
    pulse_energy,
    round_relaxed,
    solve_energy_min,
    solve_explicit,
    solve_implicit,
    solve_relaxed,
    symmetric_oracle,
)
from .channel import delay_stats, write_cir_csv
from .config import ConfigError, load_scenario, validate_config
from .netsim import generate_topology, load_steps, simulate, write_outputs
from .phy.ber import BerSimConfig, BerTable, build_ber_table
from .phy.signal import SCHEMES, PhyParams
from .reproduce import FIGURES, reproduce
from .wavefield import (
    WaveConfig,
    arrival_clusters,
    build_arm_geometry,
    default_transceivers,
    extract_impulse_response,
    max_stable_dt,
    simulate_field,
    write_series_csv,
)

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO = 0, 1, 2, 3


# --- wave ------------------------------------------------------------------------


def _cmd_wave(args) -> int:
    cfg = WaveConfig(dx=args.dx, f0=args.f0, source=args.pulse, sponge_cells=args.sponge)
    geom = build_arm_geometry(cfg.dx, args.tissues)
    src, snk = default_transceivers(geom)
    src = tuple(args.source) if args.source else src
    snk = tuple(args.sink) if args.sink else snk
    limit = max_stable_dt(cfg.dx, float(geom.field("c").max()))
    dt = args.dt if args.dt is not None else cfg.cfl * limit
    n = args.steps if args.steps is not None else int(math.ceil(args.duration / dt))
    res = simulate_field(
        geom, src, snk, cfg.waveform(dt, n), dt, n,
        f_ref_mhz=cfg.f0 / 1e6, sponge_cells=cfg.sponge_cells, snapshot_every=args.snapshot_every,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_series_csv(res.t, res.sink, out / "sink.csv")
    for k, snap in enumerate(res.snapshots):
        _write_snapshot(out / f"snapshot_{k:04d}.csv", snap, geom)
    if not res.sink.any():
        print(f"steps={n} dt={dt:.6g} s: no signal reached the sink, cir.csv not written")
        return EXIT_OK
    cir = extract_impulse_response(res.sink, res.dt)
    write_cir_csv(cir, out / "cir.csv")
    st = delay_stats(cir)
    clusters = arrival_clusters(res.sink, res.dt)
    print(f"steps={n} dt={dt:.6g} s arrivals={len(clusters)} tau_rms={st.tau_rms:.6g} s "
          f"coherence_bw={st.coherence_bandwidth:.6g} Hz")
    for t, h in clusters:
        print(f"arrival t={t:.6g} s relative_height={h:.3f}")
    return EXIT_OK


def _write_snapshot(path: Path, snap, geom) -> None:
    # columns: t, x, y, value (one row per cell)
    nx, ny = snap.pressure.shape
    with open(path, "w") as fh:
        fh.write("t,x,y,value\n")
        for i in range(nx):
            for j in range(ny):
                fh.write(f"{fmt_float(snap.time)},{fmt_float((i + 0.5) * geom.dx)},"
                         f"{fmt_float((j + 0.5) * geom.dx)},{fmt_float(snap.pressure[i, j])}\n")


# --- ber-table -------------------------------------------------------------------


def _cmd_ber_table(args) -> int:
    cfg = BerSimConfig(PhyParams(tc=args.tc), snr_db=args.snr_db, interferer_power=args.interferer_power)
    table = build_ber_table(
        args.schemes,
        range(1, args.nh_max + 1),
        range(1, args.ns_max + 1),
        range(args.k_min, args.k_max + 1),
        args.trials,
        args.seed,
        cfg,
        path=args.out,
    )
    print(f"{len(table)} entries written to {args.out}")
    return EXIT_OK


# --- solve -----------------------------------------------------------------------

SOLVE_KEYS = {"mode", "oracle", "scheme", "k", "ber_table", "rounding_threshold", "constraints", "model", "link",
              "energy", "reports"}
SOLVE_HEADER = "n_h,n_s,rate_bps,e_b_j,e_s_w,lower,upper"


def solve_instance(inst: dict, base: Path | None = None) -> dict:
    """Solve a problem-instance dictionary; see ``uswb solve --help`` for the format."""
    unknown = sorted(set(inst) - SOLVE_KEYS)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]} in problem instance")
    try:
        c = AdaptConstraints(**inst.get("constraints", {}))
        model = SinrModel(**inst.get("model", {}))
        piezo = PiezoParams(**inst.get("energy", {}))
        reports = [InterferenceReport(**r) for r in inst.get("reports", [])]
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    mode = inst.get("mode", "implicit")
    kind = inst.get("oracle", "sinr")
    k = int(inst.get("k", 0))
    t = float(inst.get("rounding_threshold", 0.5))
    link = inst.get("link")
    if kind == "ber":
        path = inst.get("ber_table")
        if path is None:
            path = data_path("ber_table.csv")
        elif base is not None and not Path(path).is_absolute():
            path = base / path
        table = BerTable.load(path)
        oracle = ber_oracle(table, inst.get("scheme", SCHEMES[0]), k, c.ber_max)
        problem = None
    elif kind == "sinr":
        if link is not None:
            alpha, beta = float(link["alpha"]), float(link["beta_sum"])
            oracle = own_sinr_oracle(c, alpha, beta, model.eta)
            problem = RelaxedProblem.explicit(c, alpha, beta, model.eta, reports)
        else:
            oracle = symmetric_oracle(c, k, model)
            problem = RelaxedProblem.symmetric(c, k, model)
    else:
        raise ConfigError(f"oracle must be 'sinr' or 'ber', got {kind!r}")
    e_p = pulse_energy(piezo)
    if mode == "implicit":
        sol = solve_implicit(c, oracle) if not reports else solve_explicit(c, oracle, reports, model.eta)
    elif mode == "explicit":
        sol = solve_explicit(c, oracle, reports, model.eta)
    elif mode in ("energy_Eb", "energy_Es"):
        sol = solve_energy_min(mode.split("_")[1], c, oracle, reports, model.eta, e_p)
    else:
        raise ConfigError(f"unknown mode {mode!r}")
    lower = upper = math.nan
    if problem is not None:
        try:
            relaxed = solve_relaxed(c, problem)
        except InfeasibleError:
            relaxed = None
        if relaxed is not None:
            lower = relaxed.p_rlx
            try:
                upper = round_relaxed(relaxed, t, oracle, c).upper
            except RoundingRejected:
                pass
    e_b, e_s = energy_metrics(e_p, sol.n_h, sol.n_s, c.tc)
    return {"n_h": sol.n_h, "n_s": sol.n_s, "rate": sol.rate, "e_b": e_b, "e_s": e_s, "lower": lower, "upper": upper}


def _cmd_solve(args) -> int:
    path = Path(args.instance)
    try:
        inst = load_toml(path)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    r = solve_instance(inst, path.parent)
    cells = [str(r["n_h"]), str(r["n_s"])] + [
        "" if math.isnan(r[k]) else fmt_float(r[k]) for k in ("rate", "e_b", "e_s", "lower", "upper")
    ]
    print(SOLVE_HEADER)
    print(",".join(cells))
    return EXIT_OK


# --- simulate --------------------------------------------------------------------


def _cmd_simulate(args) -> int:
    cfg = load_scenario(args.scenario)
    table = cfg.load_table(args.ber_table)
    net = cfg.net_config(table)
    if args.mode:
        net = replace(net, mode=args.mode)
    if args.scheme:
        net = replace(net, scheme=args.scheme)
    if args.duration:
        net = replace(net, duration=args.duration)
    topo_cfg = replace(cfg.topology, setting=args.setting) if args.setting else cfg.topology
    topo = generate_topology(topo_cfg, args.seed)
    try:
        res = simulate(topo, table, net, args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = Path(args.out) if args.out else cfg.output_dir
    write_outputs(res, out, events=cfg.events)
    print(f"generated={res.generated} delivered={res.delivered} dropped={res.dropped} "
          f"in_flight={res.in_flight} aborted={res.aborted} infeasible={res.infeasible}")
    for s in load_steps(res):
        print(f"load={len(s.active)} throughput_bps={s.mean_throughput:.6g} drop_rate={s.drop_rate:.3g} "
              f"mean_eb_j={s.mean_eb:.4g}")
    print(f"outputs in {out}")
    return EXIT_OK


# --- reproduce / validate --------------------------------------------------------


def _cmd_reproduce(args) -> int:
    paths = reproduce(args.figure, args.out, args.seed, args.scenario, args.ber_table)
    for p in paths:
        print(p)
    return EXIT_OK


def _cmd_validate(args) -> int:
    problems = validate_config(args.scenario)
    if problems:
        for p in problems:
            print(f"error: {p}", file=sys.stderr)
        return EXIT_CONFIG
    print("ok")
    return EXIT_OK


SOLVE_HELP = """\
Problem instance (TOML). All keys optional:

  mode = "implicit"            # implicit | explicit | energy_Eb | energy_Es
  oracle = "sinr"              # sinr (closed form) | ber (table lookup)
  k = 0                        # interferers, symmetric SINR or table oracle
  scheme = "ppm-bpsk"          # table oracle only
  ber_table = "table.csv"      # table oracle only; bundled table by default
  rounding_threshold = 0.5
  [constraints]  r_min, sinr_min, ber_max, nh_max, ns_max, tc
  [model]        eta, sigma2, power, gain
  [link]         alpha, beta_sum      # own link with fixed interferers
  [energy]       g33, p_out, thickness, area, k_rel, c0
  [[reports]]    gamma, delta, epsilon, source

Prints one CSV row: n_h,n_s,rate_bps,e_b_j,e_s_w,lower,upper (lower/upper are
the relaxation bounds; empty when not available).
"""


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uswb", description="Ultrasonic intra-body network simulator.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    w = sub.add_parser("wave", help="2-D acoustic simulation of the arm cross-section")
    w.add_argument("--dx", type=float, default=0.5e-3, help="grid spacing [m]")
    w.add_argument("--dt", type=float, default=None, help="time step [s] (default: 0.9 of the CFL limit)")
    w.add_argument("--steps", type=int, default=None, help="number of time steps (overrides --duration)")
    w.add_argument("--duration", type=float, default=400e-6, help="simulated time [s]")
    w.add_argument("--source", type=float, nargs=2, metavar=("X", "Y"), help="source position [m]")
    w.add_argument("--sink", type=float, nargs=2, metavar=("X", "Y"), help="sink position [m]")
    w.add_argument("--f0", type=float, default=100e3, help="Ricker peak frequency [Hz]")
    w.add_argument("--pulse", choices=("ricker", "gaussian", "dirac"), default="ricker")
    w.add_argument("--sponge", type=int, default=20, help="absorbing layer thickness [cells]")
    w.add_argument("--tissues", default=None, help="tissue table (TOML); bundled table by default")
    w.add_argument("--snapshot-every", type=int, default=0, help="write the field every N steps (0: never)")
    w.add_argument("--out", default="wave_out")
    w.set_defaults(func=_cmd_wave)

    b = sub.add_parser("ber-table", help="Monte Carlo BER table over (scheme, K, N_h, N_s)")
    b.add_argument("--schemes", nargs="+", choices=SCHEMES, default=list(SCHEMES))
    b.add_argument("--k-min", type=int, default=0)
    b.add_argument("--k-max", type=int, default=8)
    b.add_argument("--nh-max", type=int, default=15)
    b.add_argument("--ns-max", type=int, default=20)
    b.add_argument("--trials", type=int, default=20000, help="bits per grid point")
    b.add_argument("--seed", type=int, default=1)
    b.add_argument("--tc", type=float, default=0.5e-6)
    b.add_argument("--snr-db", type=float, default=20.0)
    b.add_argument("--interferer-power", type=float, default=1.5)
    b.add_argument("--out", default="ber_table.csv")
    b.set_defaults(func=_cmd_ber_table)

    s = sub.add_parser("solve", help="solve one adaptation instance", description=SOLVE_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("instance", help="problem-instance file (TOML)")
    s.set_defaults(func=_cmd_solve)

    m = sub.add_parser("simulate", help="run the network simulator on a scenario")
    m.add_argument("--scenario", default=None, help="scenario file; bundled default when omitted")
    m.add_argument("--seed", type=int, default=1)
    m.add_argument("--ber-table", default=None, help="override the scenario's BER table")
    m.add_argument("--out", default=None, help="override the scenario's output directory")
    m.add_argument("--mode", choices=("implicit", "explicit", "energy_Eb", "energy_Es"), default=None)
    m.add_argument("--scheme", choices=SCHEMES, default=None)
    m.add_argument("--setting", choices=("single_square", "three_clusters"), default=None)
    m.add_argument("--duration", type=float, default=None)
    m.set_defaults(func=_cmd_simulate)

    r = sub.add_parser("reproduce", help="desk-scale recipe for one figure")
    r.add_argument("figure", choices=FIGURES)
    r.add_argument("--out", default="repro")
    r.add_argument("--seed", type=int, default=1)
    r.add_argument("--scenario", default=None)
    r.add_argument("--ber-table", default=None)
    r.set_defaults(func=_cmd_reproduce)

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("scenario", nargs="?", default=None)
    v.set_defaults(func=_cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
