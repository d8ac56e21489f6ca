import pytest

from conftest import synthetic_table
from uswb._util import data_path
from uswb.config import ConfigError, build_scenario, load_scenario, required_k, validate_config

DEFAULT = data_path("default_scenario.toml").read_text()


def scenario(tmp_path, extra="", replace=None):
    text = DEFAULT
    for old, new in (replace or {}).items():
        assert old in text
        text = text.replace(old, new)
    p = tmp_path / "s.toml"
    p.write_text(text + "\n" + extra)
    return p


def test_default_scenario_is_valid(fake_table):
    assert validate_config(table=fake_table) == []


def test_default_scenario_values():
    cfg = load_scenario()
    assert cfg.topology.n_connections == 9 and required_k(cfg) == 8
    assert cfg.net.constraints.nh_max == 15 and cfg.net.constraints.ns_max == 20
    assert cfg.piezo.c0 > 0


def test_delta_equal_to_chip_is_diagnosed(tmp_path, fake_table):
    p = scenario(tmp_path, replace={"tc = 0.5e-6 ": "tc = 0.5e-6\ndelta = 0.5e-6 "})
    out = validate_config(p, table=fake_table)
    assert any("delta < tc" in d for d in out)


def test_unknown_key_is_named(tmp_path, fake_table):
    p = scenario(tmp_path, replace={"n_retries = 3": "n_retries = 3\nretires = 2"})
    out = validate_config(p, table=fake_table)
    assert len(out) == 1 and "mac.retires" in out[0]


def test_type_error_is_named(tmp_path):
    p = scenario(tmp_path, replace={"ber_max = 1e-6": 'ber_max = "small"'})
    assert any("constraints.ber_max" in d for d in validate_config(p, check_table=False))


def test_missing_table_entry_is_diagnosed(fake_table):
    t = synthetic_table(schemes=("ppm-bpsk",))
    del t.entries[("ppm-bpsk", 8, 15, 20)]
    out = validate_config(table=t)
    assert len(out) == 1
    assert "coverage" in out[0] and "K=8" in out[0] and "N_h=15" in out[0] and "N_s=20" in out[0]


def test_cfl_violation_is_diagnosed(tmp_path):
    p = scenario(tmp_path, replace={"cfl = 0.9": "dt = 1e-6"})
    assert any("CFL" in d for d in validate_config(p, check_table=False))


def test_unresolvable_wave_grid(tmp_path):
    p = scenario(tmp_path, replace={"dx = 0.5e-3": "dx = 1e-2"})
    assert any(d.startswith("wave.dx") for d in validate_config(p, check_table=False))


def test_missing_file():
    out = validate_config("/nonexistent/scenario.toml")
    assert out and "cannot read" in out[0]


def test_build_rejects_unknown_section():
    with pytest.raises(ConfigError, match="unknown"):
        build_scenario({"topolgy": {}})
