"""
Unit tests for densim.scenario
"""

import numpy as np
import pytest

from densim.base import ChainKind, DeploymentKind, NodeKind, ScenarioError
from densim.channel import ChannelParams, LargeScaleModel
from densim.scenario import (GridGeometry, LayoutRecord, ServingChain, associate_ues,
                             build_scenario, candidate_chains, check_invariants,
                             default_layout, read_layout, step_mobility, write_layout)


@pytest.mark.parametrize("kind", list(DeploymentKind))
def test_every_deployment_meets_entity_table(kind):
    state = build_scenario(kind)
    check_invariants(state)
    assert len(state.gnbs) == 2
    assert len(state.ues) == 8
    assert len({ue.position[1] for ue in state.ues}) == 2
    assert len(set(state.nodes)) == len(state.nodes)


def test_macro_only_counts():
    state = build_scenario("macro_only")
    assert (len(state.gnbs), len(state.relays), len(state.ues)) == (2, 0, 8)


def test_ris_deployment():
    state = build_scenario(DeploymentKind.STATIONARY_RIS)
    assert len(state.riss) == 4
    assert all(ris.height == pytest.approx(40.0) for ris in state.riss)
    assert all(ris.tx_power_dbm is None for ris in state.riss)


def test_iab_panels():
    state = build_scenario(DeploymentKind.STATIONARY_IAB)
    for iab in state.iab_nodes:
        assert len(iab.panels) == 3
        assert all((panel.n_rows, panel.n_cols) == (4, 4) for panel in iab.panels)
        assert iab.height == pytest.approx(10.0)
        assert iab.tx_power_dbm == 32.0


def test_uav_nodes():
    state = build_scenario(DeploymentKind.UAV_NCR)
    assert len(state.ncrs) == 2
    for ncr in state.ncrs:
        assert ncr.mounted_on_uav
        assert len(ncr.panels) == 2
        assert ncr.height == pytest.approx(40.0)
        assert ncr.tx_power_dbm == 29.0


def test_each_relay_serves_the_gnb_of_its_street():
    state = build_scenario(DeploymentKind.STATIONARY_NCR)
    cells = sorted(ncr.cell for ncr in state.ncrs)
    assert cells == sorted(gnb.id for gnb in state.gnbs)


def test_bad_inputs():
    with pytest.raises(ScenarioError):
        build_scenario("macro_plus")
    with pytest.raises(ScenarioError):
        GridGeometry(street_width=2.0, sidewalk_width=3.0)
    with pytest.raises(ScenarioError):
        GridGeometry(block_size=0.0)


#%%

def test_zero_step_is_identity():
    state = build_scenario(DeploymentKind.UAV_IAB)
    assert step_mobility(state, 0.0) is state


def test_one_second_at_40_kmh():
    state = build_scenario(DeploymentKind.STATIONARY_NCR)
    moved = step_mobility(state, 1.0)
    for ue in state.ues:
        after = moved.node(ue.id)
        assert after.position[0] - ue.position[0] == pytest.approx(40 / 3.6)
        assert after.position[1] == ue.position[1]
    for ncr in state.ncrs:
        assert moved.node(ncr.id).position == ncr.position
    assert moved.sim_time == pytest.approx(1.0)


def test_ues_stop_at_course_end():
    state = build_scenario(DeploymentKind.MACRO_ONLY)
    moved = step_mobility(state, 3600.0)
    assert moved.course_finished
    for ue_id, course in moved.courses.items():
        assert moved.node(ue_id).position[0] == pytest.approx(course.x_end)


def test_uavs_fly_no_faster_than_their_speed():
    state = build_scenario(DeploymentKind.UAV_IAB)
    for _ in range(20):
        moved = step_mobility(state, 0.5)
        for uav in state.iab_nodes:
            step = np.linalg.norm(moved.node(uav.id).xyz - uav.xyz)
            assert step <= 40 / 3.6 * 0.5 + 1e-9
            assert moved.node(uav.id).height == pytest.approx(40.0)
        state = moved


def test_mobility_replays_exactly():
    first = second = build_scenario(DeploymentKind.UAV_NCR, start_offset=30.0)
    for dt in [0.25e-3] * 50 + [0.1] * 10:
        first = step_mobility(first, dt)
        second = step_mobility(second, dt)
    assert first.nodes == second.nodes


def test_negative_step_rejected():
    with pytest.raises(ValueError):
        step_mobility(build_scenario("macro_only"), -1.0)


#%%

def test_macro_only_association_is_direct():
    state = build_scenario(DeploymentKind.MACRO_ONLY)
    model = LargeScaleModel(ChannelParams(), seed=1)
    state = associate_ues(state, model.chain_rsrp)
    assert all(chain.kind == ChainKind.DIRECT for chain in state.associations.values())
    assert set(state.associations) == {ue.id for ue in state.ues}


def test_ue_next_to_ncr_uses_it():
    ue0 = LayoutRecord("ue0", NodeKind.UE.value, 286.5, 268.0, 1.5, 24.0)
    state = build_scenario(DeploymentKind.STATIONARY_NCR, layout=[ue0])
    ncr = min(state.ncrs, key=lambda node: np.linalg.norm(node.xyz - state.by_label("ue0").xyz))
    model = LargeScaleModel(ChannelParams(), seed=2)
    state = associate_ues(state, model.chain_rsrp)
    chain = state.chain_of(state.by_label("ue0").id)
    assert chain == ServingChain(ChainKind.NCR, ncr.cell, ncr.id)


def test_ties_go_to_lowest_serving_node():
    state = build_scenario(DeploymentKind.STATIONARY_IAB)
    state = associate_ues(state, lambda state, ue, chain: -60.0)
    lowest = min(chain.serving_node for chain in candidate_chains(state, state.ues[0].id))
    assert all(chain.serving_node == lowest for chain in state.associations.values())


def test_association_is_idempotent():
    model = LargeScaleModel(ChannelParams(), seed=5)
    once = associate_ues(build_scenario(DeploymentKind.STATIONARY_RIS), model.chain_rsrp)
    twice = associate_ues(once, model.chain_rsrp)
    assert once.associations == twice.associations


def test_floor_flags_out_of_coverage():
    state = build_scenario(DeploymentKind.MACRO_ONLY)
    state = associate_ues(state, lambda state, ue, chain: -180.0, floor_dbm=-140.0)
    assert state.out_of_coverage == frozenset(ue.id for ue in state.ues)


#%%

def test_layout_file_overrides(helper_class, tmp_path):
    records = read_layout(helper_class(__file__).data_file("moved_ncr.yaml"))
    state = build_scenario(DeploymentKind.STATIONARY_NCR, layout=records)
    assert state.by_label("ncr0").position == (296.5, 276.5, 10.0)
    check_invariants(state)

    path = tmp_path / "layout.yaml"
    write_layout(default_layout("stationary_ris"), path)
    assert [record.label for record in read_layout(path)] == \
        [record.label for record in default_layout("stationary_ris")]


def test_malformed_layout(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("nodes:\n- label: gnb0\n  kind: gnb\n  x: 1\n")
    with pytest.raises(ScenarioError):
        read_layout(path)
