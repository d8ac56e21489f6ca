import math
from collections import defaultdict

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import synthetic_table
from uswb.adapt import rate
from uswb.netsim import (
    MacConfig,
    NetConfig,
    TopologyConfig,
    activation_schedule,
    convergence_rounds,
    generate_topology,
    load_steps,
    pair_at,
    simulate,
    window_rows,
    write_outputs,
)


def square(n=9, seed=1):
    return generate_topology(TopologyConfig(n_connections=n), seed)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["single_square", "three_clusters"]))
def test_topology_invariants(seed, setting):
    topo = generate_topology(TopologyConfig(setting=setting), seed)
    nodes = np.concatenate([topo.tx, topo.rx])
    assert len(set(nodes.tolist())) == nodes.size
    assert np.allclose(topo.delays, topo.distances / topo.sound_speed)
    sets = topo.interference_sets()
    for i, s in enumerate(sets):
        assert i not in s
        for j in s:
            assert i in sets[j]
    if setting == "single_square":
        assert all(len(s) == topo.n_connections - 1 for s in sets)
    else:
        cl = topo.cluster
        for i, s in enumerate(sets):
            assert not any(abs(int(cl[i]) - int(cl[j])) == 2 for j in s)


def test_topology_is_seeded():
    a, b = square(seed=5), square(seed=5)
    assert np.array_equal(a.positions, b.positions)
    assert not np.array_equal(a.positions, square(seed=6).positions)


def test_single_connection_reaches_full_rate(fake_table):
    topo = square(1)
    cfg = NetConfig(duration=5.0)
    res = simulate(topo, fake_table, cfg, 3)
    assert pair_at(res, 0, 5.0) == (1, 1)
    m, tc = cfg.mac, cfg.constraints.tc
    cycle = m.data_bits * tc + m.ack_bits * tc + 2 * topo.link_delay(0)
    # skip the first window: handshake and the first packet at the common pair
    thr = [r[5] for r in window_rows(res) if r[0] >= 1.0]
    assert np.mean(thr) == pytest.approx(m.data_bits / cycle, rel=0.01)
    assert max(thr) < rate(1, 1)


def test_conservation_and_ordering(fake_table):
    res = simulate(square(), fake_table, NetConfig(duration=20.0), 2)
    assert res.generated == res.delivered + res.dropped + res.in_flight
    assert min(res.generated, res.delivered, res.dropped, res.in_flight) >= 0
    pk = res.packets
    for i in range(res.n_connections):
        sel = pk["connection"] == i
        ts, ta = pk["t_send"][sel], pk["t_arrive"][sel]
        assert np.all(ts[1:] >= ta[:-1])
    times = [e[0] for e in res.events]
    assert times == sorted(times)


def test_no_data_before_handshake(fake_table):
    res = simulate(square(4), fake_table, NetConfig(duration=6.0, activation_spacing=1.0), 4)
    first = defaultdict(dict)
    for t, seq, kind, conn, _ in res.events:
        first[conn].setdefault(kind, seq)
    for conn, seen in first.items():
        assert seen["r2t_send"] < seen["connected"]
        if "data_ok" in seen:
            assert seen["connected"] < seen["data_ok"]


def test_handshake_gives_up_after_retries():
    # control packets at the common pair always fail
    table = synthetic_table(schemes=("ppm-bpsk",), rule=lambda k, h, s: (h, s) != (15, 20))
    dead = table.entries.copy()
    for key, e in list(dead.items()):
        if key[2:] == (15, 20):
            table.entries[key] = type(e)(1.0, e.trials, e.trials, 0.0)
    cfg = NetConfig(duration=3.5, mac=MacConfig(n_retries=3))
    res = simulate(square(1), table, cfg, 1)
    backoffs = [e for e in res.events if e[2] == "backoff"]
    aborts = [e for e in res.events if e[2] == "abort"]
    assert res.aborted == len(aborts) >= 2
    assert res.generated == 0
    # never more than n_retries back-offs between two aborts
    count = 0
    for e in res.events:
        if e[2] == "backoff":
            count += 1
            assert count <= 3
        elif e[2] == "abort":
            count = 0
    assert len(backoffs) == 3 * len(aborts) or len(backoffs) > 3 * len(aborts) - 3


def test_implicit_pairs_are_feasible_and_common(fake_table):
    cfg = NetConfig(duration=45.0)
    res = simulate(square(), fake_table, cfg, 7)
    for t, conn, n_h, n_s, feasible, k in res.trace:
        assert feasible == 1
        assert fake_table.ber(cfg.scheme, k, n_h, n_s) <= cfg.constraints.ber_max or (n_h, n_s) == (15, 20)
    rounds, common = convergence_rounds(res)
    assert common and rounds <= 3


def test_saturation_falls_back_and_drops():
    table = synthetic_table(schemes=("ppm-ppm",), rule=lambda k, h, s: k < 7 and s * h >= 2 * k + 1)
    cfg = NetConfig(scheme="ppm-ppm", duration=45.0)
    res = simulate(square(), table, cfg, 1)
    steps = load_steps(res)
    # only the packets caught in flight by a newcomer are lost below the frontier
    assert all(s.drop_rate < 1e-3 for s in steps if len(s.active) <= 7)
    assert all(s.drop_rate > 0.1 for s in steps if len(s.active) > 7)
    assert res.infeasible > 0
    assert any(f == 0 for *_, f, _k in res.trace)


def test_energy_mode_spends_less_per_bit(fake_table):
    a = load_steps(simulate(square(), fake_table, NetConfig(mode="implicit", duration=45.0, e_p=1.0), 1))
    b = load_steps(simulate(square(), fake_table, NetConfig(mode="energy_Eb", duration=45.0, e_p=1.0), 1))
    for x, y in zip(a, b):
        assert y.mean_eb <= x.mean_eb + 1e-12


def test_empty_run_gives_zero_metrics(fake_table):
    res = simulate(square(), fake_table, NetConfig(duration=0.5, first_activation=1.0), 1)
    assert res.generated == 0 and res.trace == [] and res.events == []
    rows = window_rows(res)
    assert rows and all(r[3] == 0 and r[4] == 0 and r[5] == 0.0 for r in rows)
    assert load_steps(res) == []


def test_metric_ranges(fake_table):
    res = simulate(square(), fake_table, NetConfig(duration=20.0), 5)
    for r in window_rows(res):
        assert 0 <= r[5] <= rate(1, 1)
    for s in load_steps(res):
        assert 0 <= s.drop_rate <= 1


def test_outputs_are_deterministic(fake_table, tmp_path):
    cfg = NetConfig(duration=12.0, activation_spacing=2.0)
    for name in ("a", "b"):
        write_outputs(simulate(square(), fake_table, cfg, 11), tmp_path / name)
    for f in ("metrics.csv", "trace.csv", "loads.csv", "events.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_explicit_three_clusters_runs(fake_table):
    topo = generate_topology(TopologyConfig(setting="three_clusters"), 1)
    res = simulate(topo, fake_table, NetConfig(mode="explicit", duration=16.0, sigma2=0.1), 1)
    assert res.bounds
    for t, conn, lb, n_h in res.bounds:
        assert n_h >= lb or math.isinf(lb)


@pytest.mark.parametrize("n, middle", [(9, 1), (9, 3), (5, 1)])
def test_cluster_sizes_and_schedule(n, middle):
    topo = generate_topology(TopologyConfig(setting="three_clusters", n_connections=n, middle_connections=middle), 2)
    edge = (n - middle) // 2
    assert np.bincount(topo.cluster).tolist() == [edge, middle, edge]
    sched = activation_schedule(topo, NetConfig())
    assert len(sched) == max(edge, middle)
    assert sorted(i for _, g in sched for i in g) == list(range(n))
    # one new connection per cluster and step while the cluster has idle ones
    for s, (_, g) in enumerate(sched):
        assert sorted(int(topo.cluster[i]) for i in g) == [c for c, size in enumerate((edge, middle, edge)) if s < size]


@pytest.mark.parametrize("n, middle", [(9, 2), (9, 0), (3, 3)])
def test_cluster_sizes_rejected(n, middle):
    with pytest.raises(ValueError):
        TopologyConfig(setting="three_clusters", n_connections=n, middle_connections=middle)


def test_explicit_oracle_option(fake_table):
    with pytest.raises(ValueError):
        NetConfig(mode="explicit", explicit_oracle="table")
    topo = generate_topology(TopologyConfig(setting="three_clusters", n_connections=3), 1)
    for oracle in ("ber", "sinr", "both"):
        res = simulate(topo, fake_table, NetConfig(mode="explicit", duration=3.0, sigma2=0.1, explicit_oracle=oracle), 1)
        assert res.bounds


def test_table_too_small_for_topology():
    with pytest.raises(ValueError):
        simulate(square(), synthetic_table(k_max=3), NetConfig(), 1)
