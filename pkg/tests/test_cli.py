import csv

import pytest

from uswb.cli import main


@pytest.fixture
def table_csv(fake_table, tmp_path):
    p = tmp_path / "table.csv"
    fake_table.save(p)
    return p


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_solve_without_interferers(tmp_path, capsys):
    assert main(["solve", str(write(tmp_path, "k0.toml", "k = 0\n"))]) == 0
    header, row = capsys.readouterr().out.strip().splitlines()[-2:]
    assert header.startswith("n_h,n_s,rate_bps")
    vals = row.split(",")
    assert vals[:2] == ["1", "1"] and float(vals[2]) == 2e6


def test_solve_infeasible_exit_code(tmp_path, capsys):
    inst = write(tmp_path, "inf.toml", "k = 8\n[constraints]\nsinr_min = 1e6\n")
    assert main(["solve", str(inst)]) == 2
    assert "infeasible" in capsys.readouterr().err.lower()


def test_unknown_key_exit_code(tmp_path, capsys):
    assert main(["solve", str(write(tmp_path, "bad.toml", "bogus = 1\n"))]) == 1
    assert "bogus" in capsys.readouterr().err


def test_invalid_scenario_key(tmp_path, capsys, table_csv):
    p = write(tmp_path, "s.toml", "[mac]\nwarp = 9\n")
    assert main(["simulate", "--scenario", str(p), "--ber-table", str(table_csv)]) == 1
    assert "mac.warp" in capsys.readouterr().err


def test_missing_file_exit_code(capsys):
    assert main(["solve", "/nonexistent.toml"]) == 3


def test_validate(capsys, tmp_path):
    p = write(tmp_path, "s.toml", "[phy]\ntc = 0.5e-6\ndelta = 0.5e-6\n")
    assert main(["validate", str(p)]) == 1
    assert "delta < tc" in capsys.readouterr().err


def test_simulate_is_byte_identical(tmp_path, table_csv):
    for name in ("a", "b"):
        args = ["simulate", "--ber-table", str(table_csv), "--duration", "12", "--seed", "3", "--out", str(tmp_path / name)]
        assert main(args) == 0
    for f in ("metrics.csv", "trace.csv", "loads.csv", "events.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_reproduce_fig5_starts_at_common_pair(tmp_path, table_csv):
    assert main(["reproduce", "fig5", "--out", str(tmp_path), "--ber-table", str(table_csv)]) == 0
    with open(tmp_path / "fig5" / "trace.csv") as fh:
        rows = list(csv.DictReader(fh))
    first = {}
    for r in rows:
        first.setdefault(r["connection"], (r["n_h"], r["n_s"]))
    assert len(first) == 9 and set(first.values()) == {("15", "20")}


def test_ber_table_command(tmp_path):
    out = tmp_path / "t.csv"
    args = ["ber-table", "--schemes", "ppm-bpsk", "--k-max", "1", "--nh-max", "2", "--ns-max", "2", "--trials", "100", "--out", str(out)]
    assert main(args) == 0
    assert len(out.read_text().splitlines()) == 1 + 2 * 2 * 2


def test_wave_command(tmp_path):
    args = ["wave", "--dx", "1e-3", "--steps", "40", "--tissues", str(tmp_path / "none.toml"), "--out", str(tmp_path)]
    assert main(args) == 3
    args = ["wave", "--dx", "0.5e-3", "--steps", "40", "--snapshot-every", "20", "--out", str(tmp_path)]
    assert main(args) == 0
    # 40 steps are too few for the pulse to cross the arm
    assert (tmp_path / "sink.csv").exists() and not (tmp_path / "cir.csv").exists()
    assert len(list(tmp_path.glob("snapshot_*.csv"))) == 2


def test_wave_short_link(tmp_path):
    args = ["wave", "--steps", "300", "--source", "0.02", "0.03", "--sink", "0.03", "0.03", "--out", str(tmp_path)]
    assert main(args) == 0
    assert (tmp_path / "cir.csv").exists()
