"""Scenario files: schema, loading into module configs, cross-field validation.

A scenario is a TOML file with the sections ``topology``, ``phy``,
``constraints``, ``mac``, ``energy``, ``output`` and optionally ``wave``.
Every key is optional; unknown sections or keys are rejected by name.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ._util import data_path, load_toml
from .adapt import AdaptConstraints, PiezoParams, pulse_energy
from .channel import load_tissues
from .netsim.engine import MacConfig, NetConfig
from .netsim.topology import TopologyConfig
from .phy.ber import BerSimConfig, BerTable
from .phy.signal import PhyParams
from .phy.sinr import fit_sigma2
from .wavefield import WaveConfig, build_arm_geometry, max_stable_dt

DEFAULT_SCENARIO = "default_scenario.toml"
DEFAULT_BER_TABLE = "ber_table.csv"


class ConfigError(ValueError):
    """Invalid scenario; the message names the offending key or rule."""


# section -> key -> accepted python types
SCHEMA: dict[str, dict[str, tuple[type, ...]]] = {
    "topology": {
        "setting": (str,),
        "n_connections": (int,),
        "side": (float, int),
        "cluster_side": (float, int),
        "cluster_spacing": (float, int),
        "cluster_std": (float, int),
        "middle_connections": (int,),
        "range": (float, int),
        "sound_speed": (float, int),
    },
    "phy": {
        "scheme": (str,),
        "tc": (float, int),
        "delta": (float, int),
        "pulse_width": (float, int),
        "samples_per_chip": (int,),
        "snr_db": (float, int),
        "interferer_power": (float, int),
        "sigma2": (float, int, str),
        "explicit_oracle": (str,),
        "ber_table": (str,),
    },
    "constraints": {
        "r_min": (float, int),
        "ber_max": (float, int),
        "sinr_min": (float, int),
        "nh_max": (int,),
        "ns_max": (int,),
    },
    "mac": {
        "mode": (str,),
        "data_bits": (int,),
        "control_bits": (int,),
        "ack_bits": (int,),
        "backoff_min": (float, int),
        "backoff_max": (float, int),
        "n_retries": (int,),
        "retry_after": (float, int),
        "timeout_margin": (float, int),
        "duration": (float, int),
        "first_activation": (float, int),
        "activation_spacing": (float, int),
        "window": (float, int),
    },
    "energy": {
        "g33": (float, int),
        "p_out": (float, int),
        "thickness": (float, int),
        "area": (float, int),
        "k_rel": (float, int),
        "c0": (float, int),
        "intensity_limit": (float, int),
    },
    "output": {
        "dir": (str,),
        "events": (bool,),
    },
    "wave": {
        "dx": (float, int),
        "dt": (float, int),
        "cfl": (float, int),
        "duration": (float, int),
        "f0": (float, int),
        "source": (str,),
        "sponge_cells": (int,),
        "tissue_file": (str,),
    },
}


@dataclass(frozen=True)
class ScenarioConfig:
    topology: TopologyConfig
    phy: PhyParams
    ber_sim: BerSimConfig
    net: NetConfig
    piezo: PiezoParams
    wave: WaveConfig
    wave_dt: float | None
    tissue_file: Path | None
    ber_table: Path
    sigma2: float | str
    output_dir: Path
    events: bool
    source: Path | None = None
    raw: dict[str, Any] = field(default_factory=dict, compare=False)

    def load_table(self, override: str | Path | None = None) -> BerTable:
        path = Path(override) if override is not None else self.ber_table
        try:
            return BerTable.load(path)
        except ValueError as exc:
            raise ConfigError(f"phy.ber_table: {exc}") from exc

    def net_config(self, table: BerTable | None = None) -> NetConfig:
        """Network config with ``sigma2 = "fit"`` resolved against the table."""
        if self.sigma2 != "fit":
            return self.net
        if table is None:
            raise ConfigError("phy.sigma2 = 'fit' needs a BER table")
        s2 = fit_sigma2(table, self.net.scheme, self.ber_sim.eta)
        return NetConfig(**{**self.net.__dict__, "sigma2": s2})


def check_schema(raw: dict[str, Any]) -> list[str]:
    """Unknown sections/keys and wrongly typed values, one message each."""
    out = []
    for section, body in raw.items():
        if section not in SCHEMA:
            out.append(f"unknown section [{section}]")
            continue
        if not isinstance(body, dict):
            out.append(f"[{section}] must be a table")
            continue
        for key, val in body.items():
            if key not in SCHEMA[section]:
                out.append(f"unknown key {section}.{key}")
            elif isinstance(val, bool) and bool not in SCHEMA[section][key]:
                out.append(f"{section}.{key}: expected a number, got a boolean")
            elif not isinstance(val, SCHEMA[section][key]):
                names = "/".join(t.__name__ for t in SCHEMA[section][key])
                out.append(f"{section}.{key}: expected {names}, got {type(val).__name__}")
    return out


def _f(d: dict, key: str, default):
    v = d.get(key, default)
    return float(v) if isinstance(v, int) and not isinstance(v, bool) and isinstance(default, float) else v


def _resolve(base: Path | None, p: str | None) -> Path | None:
    if p is None:
        return None
    q = Path(p)
    return q if q.is_absolute() or base is None else base / q


def build_scenario(raw: dict[str, Any], source: Path | None = None) -> ScenarioConfig:
    """Turn a parsed scenario into module configs; raises ``ConfigError``."""
    problems = check_schema(raw)
    if problems:
        raise ConfigError("; ".join(problems))
    base = source.parent if source is not None else None
    topo_d, phy_d, con_d = raw.get("topology", {}), raw.get("phy", {}), raw.get("constraints", {})
    mac_d, en_d, out_d, wave_d = raw.get("mac", {}), raw.get("energy", {}), raw.get("output", {}), raw.get("wave", {})

    def section(name: str, fn):
        try:
            return fn()
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"[{name}] {exc}") from exc

    topology = section(
        "topology",
        lambda: TopologyConfig(
            setting=topo_d.get("setting", "single_square"),
            n_connections=topo_d.get("n_connections", 9),
            side=_f(topo_d, "side", 0.20),
            cluster_side=_f(topo_d, "cluster_side", 0.10),
            cluster_spacing=_f(topo_d, "cluster_spacing", 0.20),
            cluster_std=_f(topo_d, "cluster_std", 0.02),
            middle_connections=topo_d.get("middle_connections", 1),
            range_m=topo_d.get("range"),
            sound_speed=_f(topo_d, "sound_speed", 1540.0),
        ),
    )
    tc = float(phy_d.get("tc", 0.5e-6))
    phy = section(
        "phy",
        lambda: PhyParams(
            tc=tc,
            delta=phy_d.get("delta"),
            pulse_width=phy_d.get("pulse_width"),
            samples_per_chip=phy_d.get("samples_per_chip", 40),
        ),
    )
    ber_sim = section(
        "phy",
        lambda: BerSimConfig(phy, snr_db=_f(phy_d, "snr_db", 20.0), interferer_power=_f(phy_d, "interferer_power", 1.5)),
    )
    sigma2 = phy_d.get("sigma2", "fit")
    if isinstance(sigma2, str) and sigma2 != "fit":
        raise ConfigError("phy.sigma2 must be a positive number or 'fit'")
    if not isinstance(sigma2, str) and sigma2 <= 0:
        raise ConfigError("phy.sigma2 must be positive")
    constraints = section(
        "constraints",
        lambda: AdaptConstraints(
            r_min=_f(con_d, "r_min", 1000.0),
            sinr_min=con_d.get("sinr_min"),
            ber_max=_f(con_d, "ber_max", 1e-6),
            nh_max=con_d.get("nh_max", 15),
            ns_max=con_d.get("ns_max", 20),
            tc=tc,
        ),
    )
    mac = section(
        "mac",
        lambda: MacConfig(
            data_bits=mac_d.get("data_bits", 1024),
            control_bits=mac_d.get("control_bits", 64),
            ack_bits=mac_d.get("ack_bits", 64),
            backoff_min=_f(mac_d, "backoff_min", 1e-3),
            backoff_max=_f(mac_d, "backoff_max", 10e-3),
            n_retries=mac_d.get("n_retries", 3),
            retry_after=_f(mac_d, "retry_after", 1.0),
            timeout_margin=_f(mac_d, "timeout_margin", 1e-3),
            common_nh=constraints.nh_max,
            common_ns=constraints.ns_max,
        ),
    )
    piezo = section(
        "energy",
        lambda: PiezoParams(
            **{k: float(en_d[k]) for k in ("g33", "p_out", "thickness", "area", "k_rel", "c0", "intensity_limit") if k in en_d}
        ),
    )
    e_p = section("energy", lambda: pulse_energy(piezo))
    net = section(
        "mac",
        lambda: NetConfig(
            mode=mac_d.get("mode", "implicit"),
            scheme=phy_d.get("scheme", "ppm-bpsk"),
            constraints=constraints,
            mac=mac,
            duration=_f(mac_d, "duration", 50.0),
            first_activation=_f(mac_d, "first_activation", 0.0),
            activation_spacing=_f(mac_d, "activation_spacing", 5.0),
            window=_f(mac_d, "window", 1.0),
            eta=ber_sim.eta,
            sigma2=1.0 if sigma2 == "fit" else float(sigma2),
            explicit_oracle=phy_d.get("explicit_oracle", "both"),
            e_p=e_p,
            record_events=bool(out_d.get("events", True)),
        ),
    )
    wave = section(
        "wave",
        lambda: WaveConfig(
            dx=_f(wave_d, "dx", 0.5e-3),
            cfl=_f(wave_d, "cfl", 0.9),
            duration=_f(wave_d, "duration", 400e-6),
            f0=_f(wave_d, "f0", 100e3),
            source=wave_d.get("source", "ricker"),
            sponge_cells=wave_d.get("sponge_cells", 20),
        ),
    )
    table = _resolve(base, phy_d.get("ber_table")) or data_path(DEFAULT_BER_TABLE)
    return ScenarioConfig(
        topology=topology,
        phy=phy,
        ber_sim=ber_sim,
        net=net,
        piezo=piezo,
        wave=wave,
        wave_dt=float(wave_d["dt"]) if "dt" in wave_d else None,
        tissue_file=_resolve(base, wave_d.get("tissue_file")),
        ber_table=table,
        sigma2=sigma2,
        output_dir=_resolve(base, out_d.get("dir")) or Path("out"),
        events=bool(out_d.get("events", True)),
        source=source,
        raw=raw,
    )


def load_scenario(path: str | Path | None = None) -> ScenarioConfig:
    """Load a scenario file (the bundled default when ``path`` is None)."""
    p = Path(path) if path is not None else data_path(DEFAULT_SCENARIO)
    try:
        raw = load_toml(p)
    except ValueError as exc:  # TOML syntax errors
        raise ConfigError(f"{p}: {exc}") from exc
    return build_scenario(raw, p if path is not None else None)


def required_k(cfg: ScenarioConfig) -> int:
    """Largest interferer count the scenario can produce."""
    # in both settings some receiver hears every other connection (the middle
    # cluster hears both neighbours)
    return cfg.topology.n_connections - 1


def coverage_problems(cfg: ScenarioConfig, table: BerTable) -> list[str]:
    c = cfg.net.constraints
    missing = table.missing([cfg.net.scheme], range(required_k(cfg) + 1), c.nh_max, c.ns_max)
    if not missing:
        return []
    s, k, h, n = missing[-1]
    return [
        f"ber-table coverage: {len(missing)} grid points missing for the configured grid, "
        f"e.g. scheme={s} K={k} N_h={h} N_s={n}"
    ]


def validate_config(path: str | Path | None = None, table: BerTable | None = None, check_table: bool = True) -> list[str]:
    """Diagnostics for a scenario file; an empty list means it is valid.

    Checks the schema, per-section ranges, the ``delta < tc`` rule, the CFL
    limit of the wave section, layer resolution of the arm geometry and that
    the BER table covers every ``(K, N_h, N_s)`` the scenario can reach.
    """
    p = Path(path) if path is not None else data_path(DEFAULT_SCENARIO)
    try:
        raw = load_toml(p)
    except OSError as exc:
        return [f"{p}: cannot read ({exc.strerror or exc})"]
    except ValueError as exc:
        return [f"{p}: {exc}"]
    out = check_schema(raw)
    if out:
        return out
    phy_d = raw.get("phy", {})
    tc = float(phy_d.get("tc", 0.5e-6))
    delta = phy_d.get("delta")
    if delta is not None and not 0 < delta < tc:
        out.append(f"phy.delta: delta < tc violated (delta={delta}, tc={tc})")
    try:
        cfg = build_scenario(raw, p if path is not None else None)
    except ConfigError as exc:
        if not out:
            out.append(str(exc))
        return out
    try:
        tissues = load_tissues(cfg.tissue_file)
        c_max = max(m.c for m in tissues.values())
        limit = max_stable_dt(cfg.wave.dx, c_max)
        if cfg.wave_dt is not None and cfg.wave_dt > limit:
            out.append(f"wave.dt: CFL condition violated (dt={cfg.wave_dt:.4g} s > dx/(c_max sqrt 2)={limit:.4g} s)")
        build_arm_geometry(cfg.wave.dx, cfg.tissue_file)
    except OSError as exc:
        out.append(f"wave.tissue_file: cannot read ({exc})")
    except ValueError as exc:
        out.append(f"wave.dx: {exc}")
    if check_table:
        try:
            table = table if table is not None else cfg.load_table()
        except OSError as exc:
            out.append(f"phy.ber_table: cannot read ({exc})")
        except ConfigError as exc:
            out.append(str(exc))
        else:
            out.extend(coverage_problems(cfg, table))
    return out
