"""
Unit tests for densim.simulate
"""

import math

import numpy as np
import pandas as pd
import pytest

from densim.base import ChainKind, DeploymentKind, Outcome
from densim.config import RunConfig
from densim.dutils import kmh_to_mps
from densim.simulate import TRACE_COLUMNS, Simulation, simulate_run

N_SLOTS = 16


def short_config(**kwargs):
    settings = dict(n_slots=N_SLOTS, refresh_slots=8, codebook_az=4, codebook_el=2)
    settings.update(kwargs)
    return RunConfig(**settings)


@pytest.fixture(scope="module")
def config():
    return short_config()


@pytest.mark.parametrize("kind", list(DeploymentKind))
def test_short_run_trace(config, kind):
    result = simulate_run(config, kind, seed=2)
    trace = result.trace
    assert list(trace.columns) == TRACE_COLUMNS
    assert len(trace) > 0
    assert result.deployment == kind
    assert result.window == pytest.approx(N_SLOTS * 0.25e-3)
    assert trace["slot"].between(0, N_SLOTS - 1).all()
    expected_direction = np.where(trace["slot"] % 2 == 0, "dl", "ul")
    assert (trace["direction"] == expected_direction).all()
    assert trace["mcs"].between(0, 15).all()
    assert (trace["n_prbs"] >= 1).all()
    assert (trace["bits"] >= 0).all()
    assert set(trace["outcome"]) <= {"ack", "nack"}
    assert trace["offset_db"].between(-20.0, 5.0).all()
    relayed_first_hop = ((trace["direction"] == "dl") & (trace["hop"] == "backhaul")) \
        | ((trace["direction"] == "ul") & (trace["hop"] == "access"))
    assert (trace["final"] == ~relayed_first_hop).all()
    assert set(trace["ue"]) <= set(result.ues)


def test_macro_only_is_direct(config):
    trace = simulate_run(config, "macro_only", seed=0).trace
    assert set(trace["hop"]) == {"direct"}
    assert np.isfinite(trace["sinr_db"]).all()
    # Full buffer: every UE is scheduled in every slot.
    assert (trace.groupby("slot")["ue"].nunique() == 8).all()


def test_runs_are_reproducible(config):
    first = simulate_run(config, "stationary_ncr", seed=7).trace
    second = simulate_run(config, "stationary_ncr", seed=7).trace
    pd.testing.assert_frame_equal(first, second)
    other = simulate_run(config, "stationary_ncr", seed=8).trace
    assert not first["sinr_db"].equals(other["sinr_db"])


def test_iab_access_never_outruns_backhaul():
    result = simulate_run(short_config(n_slots=40, refresh_slots=20), "stationary_iab", seed=1)
    trace = result.trace
    acked = trace[trace["outcome"] == "ack"]
    for direction, first, second in (("dl", "backhaul", "access"), ("ul", "access", "backhaul")):
        rows = acked[acked["direction"] == direction]
        into = rows[rows["hop"] == first].groupby("ue")["bits"].sum()
        out = rows[rows["hop"] == second].groupby("ue")["bits"].sum()
        for ue, bits in out.items():
            assert bits <= into.get(ue, 0)


def test_ues_drive_at_their_speed(config):
    simulation = Simulation(config, "uav_iab", seed=3)
    start = {ue.id: ue.position[0] for ue in simulation.state.ues}
    result = simulation.run()
    travelled = N_SLOTS * 0.25e-3 * kmh_to_mps(40.0)
    for ue_id, x in start.items():
        assert result.state.node(ue_id).position[0] - x == pytest.approx(travelled)


def test_ris_coefficients_are_configured(config):
    simulation = Simulation(config, "stationary_ris", seed=4)
    simulation.refresh(0)
    assert set(simulation._theta) == {ris.id for ris in simulation.state.riss}
    for ris in simulation._theta.values():
        np.testing.assert_allclose(np.abs(ris.theta), 1.0)


def test_ncr_gain_is_capped(config):
    simulation = Simulation(config, "stationary_ncr", seed=5)
    simulation.refresh(0)
    allocations = simulation.scheduler.schedule(0, simulation.state, simulation.buffers)
    snapshot = simulation._snapshot(0, allocations)
    for ncr_id, gain in snapshot.ncr_gain.items():
        assert np.all(gain >= 0)
        assert np.all(gain <= simulation.ncr_configs[ncr_id].gain)


def test_channel_trace_and_shadowing_switches():
    simulation = Simulation(short_config(channel_trace=True, shadowing=False), "macro_only", 6)
    assert all(sigma == 0.0 for sigma in simulation.params.shadowing_sigma.values())
    result = simulation.run()
    slots = {record[0] for record in result.channel_records}
    assert slots == {0, 8}
    assert all(len(record) == 5 for record in result.channel_records)


#%%

def centre_power(simulation, tx, tx_peer, rx, rx_peer):
    simulation._projections = {}
    prbs = np.array([simulation.centre_prb])
    return float(np.abs(simulation._gain(tx, tx_peer, rx, rx_peer, prbs)[0]) ** 2)


def test_donor_beam_of_ncr_ues_faces_the_ncr(config):
    n_served = 0
    for seed in range(4):
        simulation = Simulation(config, "stationary_ncr", seed)
        simulation.refresh(0)
        gnb_panels = {gnb.id: gnb.panels for gnb in simulation.state.gnbs}
        for ue_id, chain in simulation.state.associations.items():
            if chain.kind != ChainKind.NCR or simulation.link(chain.gnb, chain.relay) is None:
                continue
            n_served += 1
            gnb, ncr = chain.gnb, chain.relay
            in_use = simulation._beams[(gnb, ue_id)]
            assert in_use is simulation._beams[(gnb, ncr)]
            best = centre_power(simulation, gnb, ue_id, ncr, gnb)
            assert best == pytest.approx(centre_power(simulation, gnb, ncr, ncr, gnb))
            assert best > 0
            for index, panel in enumerate(gnb_panels[gnb]):
                for weights in simulation.codebook(panel):
                    simulation._beams[(gnb, ue_id)] = (index, weights)
                    assert centre_power(simulation, gnb, ue_id, ncr, gnb) <= best * (1 + 1e-9)
            simulation._beams[(gnb, ue_id)] = in_use
    assert n_served > 0


@pytest.mark.parametrize("every, calls", [(0, 1), (16, 3)])
def test_association_schedule(monkeypatch, every, calls):
    simulation = Simulation(short_config(n_slots=40, association_slots=every), "uav_ncr", 1)
    associate = simulation.associate
    counted = []
    monkeypatch.setattr(simulation, "associate", lambda: (counted.append(1), associate()))
    chains = []
    for slot in range(40):
        simulation.step(slot)
        chains.append(dict(simulation.state.associations))
    assert len(counted) == calls
    if every == 0:
        assert all(chain == chains[0] for chain in chains)


def test_run_stops_at_course_end():
    config = short_config(n_slots=200, refresh_slots=200, ue_speed_kmh=144000.0,
                          random_course_offset=False)
    step = kmh_to_mps(144000.0) * config.slot_duration
    n_run = math.ceil(config.grid().course_length / step)
    assert n_run < 200
    result = simulate_run(config, "macro_only", seed=0)
    assert result.state.course_finished
    assert result.trace["slot"].max() == n_run - 1
    assert result.window == pytest.approx(n_run * config.slot_duration)


def relay_preferring(kind):
    def rsrp(state, ue, chain, *args):
        if chain.kind != kind:
            return -90.0
        return -50.0 - float(np.linalg.norm(state.node(ue).xyz - state.node(chain.relay).xyz)) / 100
    return rsrp


def ideal_dl_bits(monkeypatch, deployment, chain_kind):
    """End-to-end DL bits per UE with every UE relayed and every block decoded"""
    def decoded(tb, sinr_db, model, rng):
        tb.outcome = Outcome.ACK
        return tb.outcome

    monkeypatch.setattr("densim.simulate.transmit", decoded)
    simulation = Simulation(short_config(n_slots=400, refresh_slots=200), deployment, 0)
    monkeypatch.setattr(simulation.large_scale, "chain_rsrp", relay_preferring(chain_kind))
    monkeypatch.setattr(simulation.adapter, "select", lambda link, sinr_db: 9)
    trace = simulation.run().trace
    assert {chain.kind for chain in simulation.state.associations.values()} == {chain_kind}
    delivered = trace[(trace["direction"] == "dl") & trace["final"]]
    return delivered.groupby("ue")["bits"].sum()


def test_half_duplex_halves_relayed_throughput(monkeypatch):
    iab = ideal_dl_bits(monkeypatch, "stationary_iab", ChainKind.IAB)
    ncr = ideal_dl_bits(monkeypatch, "stationary_ncr", ChainKind.NCR)
    assert len(iab) == len(ncr) == 8
    assert iab.sum() / ncr.sum() == pytest.approx(0.5, abs=0.01)
