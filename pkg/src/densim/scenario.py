"""
scenario
--------
Madrid-grid geometry, node placement for the six deployments, UE/UAV
mobility and UE association

Classes
-------
GridGeometry
    Block, sidewalk and street dimensions of the grid.

EntityParams, ScenarioParams
    Height, power and panels per entity type and placement settings.

NodeDescriptor
    One network entity (gNB, IAB node, NCR, RIS or UE).

ServingChain
    How a UE reaches its gNB.

LayoutRecord
    Layout file record used to override default node placement.

ScenarioState
    Immutable snapshot of all nodes, UE courses and associations.

Functions
---------
build_scenario
    Place nodes for a deployment.

default_layout
    Default node records for a deployment.

read_layout, write_layout
    Layout files (YAML list of node records).

step_mobility
    Advance UEs along their streets and UAVs toward their clusters.

associate_ues
    Pick each UE's serving chain by wideband received power.

check_invariants
    Verify node counts and entity characteristics.
"""

#%%

from dataclasses import dataclass, field, replace
import logging
import math
from pathlib import Path
from typing import Dict, FrozenSet, Mapping, Optional, Tuple

import numpy as np
import yaml

# Internal imports.
from densim.antenna import ArrayGeometry
from densim.base import ChainKind, DeploymentKind, NodeKind, ScenarioError
from densim.dutils import kmh_to_mps, wrap_degrees

logger = logging.getLogger(__name__)

#%%

@dataclass(frozen=True)
class GridGeometry:
    """
    Simplified Madrid grid

    Attributes
    ----------
    block_size : float
        Side of a square building block (m).
    sidewalk_width : float
        Sidewalk width along each street edge (m).
    street_width : float
        Street width, kerb to kerb (m).
    n_blocks_traversed : int
        Blocks the UEs drive through.
    n_blocks : int
        Blocks per side of the square grid.
    """
    block_size: float = 120.0
    sidewalk_width: float = 3.0
    street_width: float = 14.0
    n_blocks_traversed: int = 3
    n_blocks: int = 5

    def __post_init__(self):
        for name in ("block_size", "sidewalk_width", "street_width",
                     "n_blocks_traversed", "n_blocks"):
            if getattr(self, name) <= 0:
                raise ScenarioError(f"grid {name} must be positive")
        if self.street_width <= self.sidewalk_width:
            raise ScenarioError("street_width must exceed sidewalk_width")
        if self.n_blocks < self.n_blocks_traversed + 1:
            raise ScenarioError("grid must be at least one block wider than the course")

    @property
    def pitch(self):
        """Distance between neighbouring street centre lines"""
        return self.block_size + self.street_width

    @property
    def extent(self):
        """Side of the whole grid, from edge street to edge street"""
        return self.n_blocks * self.pitch

    @property
    def lower_street_y(self):
        return (self.n_blocks // 2) * self.pitch

    @property
    def upper_street_y(self):
        return (self.n_blocks // 2 + 1) * self.pitch

    @property
    def course_length(self):
        return self.n_blocks_traversed * self.pitch

    def block_center_x(self, index):
        return (index + 0.5) * self.pitch


@dataclass(frozen=True)
class EntityParams:
    """
    Height, power and panels of one entity type

    `tx_power_dbm` is None for entities that do not transmit (RIS).
    """
    height: float
    tx_power_dbm: Optional[float]
    n_rows: int
    n_cols: int
    n_panels: int
    speed_kmh: float
    max_gain_dbi: float


def _default_entities():
    return {
        "gnb": EntityParams(25.0, 35.0, 8, 8, 1, 0.0, 8.0),
        "stationary": EntityParams(10.0, 32.0, 4, 4, 3, 0.0, 8.0),
        "ris": EntityParams(40.0, None, 8, 8, 1, 0.0, 8.0),
        "uav": EntityParams(40.0, 29.0, 4, 4, 2, 40.0, 8.0),
        "ue": EntityParams(1.5, 24.0, 1, 1, 1, 40.0, 0.0),
    }


@dataclass(frozen=True)
class ScenarioParams:
    """
    Placement settings

    Attributes
    ----------
    entities : mapping
        EntityParams keyed by "gnb", "stationary", "ris", "uav", "ue".
    ues_per_street : int
        UEs on each of the two middle streets.
    ue_spacing : float
        Initial gap between consecutive UEs on a street (m).
    ue_start_x : float
        Initial x of the first UE on each street (m).
    uav_standoff : float
        Lateral offset of a UAV from its cluster centroid, toward the donor (m).
    access_downtilt : float
        Downtilt of stationary IAB/NCR access panels (degrees).
    ris_downtilt : float
        Downtilt of RIS panels (degrees).
    element_spacing : float
        Array element spacing in wavelengths.
    """
    entities: Mapping[str, EntityParams] = field(default_factory=_default_entities)
    ues_per_street: int = 4
    ue_spacing: float = 25.0
    ue_start_x: float = 22.0
    uav_standoff: float = 100.0
    access_downtilt: float = 10.0
    ris_downtilt: float = 30.0
    element_spacing: float = 0.5


#%%

@dataclass(frozen=True)
class NodeDescriptor:
    """
    Network entity

    Attributes
    ----------
    id : int
        Unique identifier; gNBs come first, then auxiliary nodes, then UEs.
    label : str
        Readable name used in layout files and traces, e.g. "ncr1".
    kind : NodeKind
    position : tuple of float
        (x, y, z) in metres; z is the antenna height.
    tx_power_dbm : float or None
    panels : tuple of ArrayGeometry
    speed_kmh : float
    mounted_on_uav : bool
    cell : int
        Id of the gNB whose cell the node belongs to.
    """
    id: int
    label: str
    kind: NodeKind
    position: Tuple[float, float, float]
    tx_power_dbm: Optional[float]
    panels: Tuple[ArrayGeometry, ...]
    speed_kmh: float = 0.0
    mounted_on_uav: bool = False
    cell: int = 0

    @property
    def height(self):
        return self.position[2]

    @property
    def xyz(self):
        return np.asarray(self.position, dtype=float)

    @property
    def is_relay(self):
        return self.kind in (NodeKind.IAB, NodeKind.NCR, NodeKind.RIS)

    def moved_to(self, position):
        return replace(self, position=tuple(float(value) for value in position))


@dataclass(frozen=True)
class ServingChain:
    """
    Serving chain of a UE

    `relay` is the IAB node, NCR or RIS between the donor gNB and the UE,
    or None for a direct link.
    """
    kind: ChainKind
    gnb: int
    relay: Optional[int] = None

    @property
    def serving_node(self):
        """Node whose id breaks association ties"""
        return self.gnb if self.relay is None else self.relay


@dataclass(frozen=True)
class UeCourse:
    """Street segment a UE drives along, in +x"""
    y: float
    x_start: float
    x_end: float


@dataclass(frozen=True)
class LayoutRecord:
    """
    Node record of a layout file

    `panel_downtilts` may be shorter than `panel_azimuths`, in which
    case missing tilts are zero.
    """
    label: str
    kind: str
    x: float
    y: float
    z: float
    power_dbm: Optional[float] = None
    panel_azimuths: Tuple[float, ...] = ()
    panel_downtilts: Tuple[float, ...] = ()


@dataclass(frozen=True)
class ScenarioState:
    """
    Snapshot of a scenario

    Node sets B (gNBs), R (IAB nodes), S (NCRs), T (RISs) and U (UEs) are
    available as properties.  Instances are never mutated; mobility and
    association return new snapshots.
    """
    kind: DeploymentKind
    geometry: GridGeometry
    nodes: Mapping[int, NodeDescriptor]
    courses: Mapping[int, UeCourse]
    uav_clusters: Mapping[int, Tuple[int, ...]] = field(default_factory=dict)
    associations: Mapping[int, ServingChain] = field(default_factory=dict)
    out_of_coverage: FrozenSet[int] = frozenset()
    sim_time: float = 0.0
    uav_standoff: float = 0.0

    def _of_kind(self, kind):
        return [node for _, node in sorted(self.nodes.items()) if node.kind == kind]

    @property
    def gnbs(self):
        return self._of_kind(NodeKind.GNB)

    @property
    def iab_nodes(self):
        return self._of_kind(NodeKind.IAB)

    @property
    def ncrs(self):
        return self._of_kind(NodeKind.NCR)

    @property
    def riss(self):
        return self._of_kind(NodeKind.RIS)

    @property
    def ues(self):
        return self._of_kind(NodeKind.UE)

    @property
    def relays(self):
        return [node for _, node in sorted(self.nodes.items()) if node.is_relay]

    def node(self, node_id):
        return self.nodes[node_id]

    def by_label(self, label):
        for node in self.nodes.values():
            if node.label == label:
                return node
        raise KeyError(label)

    def chain_of(self, ue_id):
        return self.associations[ue_id]

    @property
    def course_finished(self):
        """True once every UE has reached the end of its course"""
        return all(self.nodes[ue].position[0] >= course.x_end - 1e-9
                   for ue, course in self.courses.items())


#%%

def _entity_key(kind, uav):
    if kind == NodeKind.GNB:
        return "gnb"
    if kind == NodeKind.UE:
        return "ue"
    if kind == NodeKind.RIS:
        return "ris"
    return "uav" if uav else "stationary"


def _azimuth(from_xy, to_xy):
    return math.degrees(math.atan2(to_xy[1] - from_xy[1], to_xy[0] - from_xy[0]))


def _elevation(from_xyz, to_xyz):
    horizontal = math.hypot(to_xyz[0] - from_xyz[0], to_xyz[1] - from_xyz[1])
    return math.degrees(math.atan2(to_xyz[2] - from_xyz[2], horizontal))


def default_layout(kind, geometry=None, params=None):
    """
    Default node records for a deployment

    gNBs sit on the bottom and top grid edges above the middle of the UE
    course, each serving its nearer middle street.  Stationary IAB/NCR sites
    are on the corner sidewalk of their cell's street two blocks from the gNB;
    RISs are on the building faces across the street from their gNB, 40 m
    high, mid-block; UAVs start at their tracking target.

    Parameters
    ----------
    kind : DeploymentKind or str
    geometry : GridGeometry, optional
    params : ScenarioParams, optional

    Returns
    -------
    List of LayoutRecord, gNBs first, then auxiliary nodes, then UEs.
    """
    kind = DeploymentKind.parse(kind)
    geometry = geometry or GridGeometry()
    params = params or ScenarioParams()
    ent = params.entities
    pitch = geometry.pitch
    half_street = geometry.street_width / 2
    sidewalk_mid = half_street + geometry.sidewalk_width / 2
    building_face = half_street + geometry.sidewalk_width

    course_mid = params.ue_start_x + ((params.ues_per_street - 1) * params.ue_spacing
                                      + geometry.course_length) / 2
    gnb_x = round(course_mid / pitch) * pitch
    streets = [geometry.lower_street_y, geometry.upper_street_y]
    gnb_xy = [(gnb_x, 0.0), (gnb_x, geometry.extent)]
    # Unit vector from each street toward its gNB's grid edge.
    toward_gnb = [-1.0, 1.0]

    records = []
    for cell, (x, y) in enumerate(gnb_xy):
        target = (gnb_x, streets[cell], ent["ue"].height)
        az = _azimuth((x, y), target)
        el = _elevation((x, y, ent["gnb"].height), target)
        records.append(LayoutRecord(f"gnb{cell}", NodeKind.GNB.value, x, y, ent["gnb"].height,
                                    ent["gnb"].tx_power_dbm, (az,), (-el,)))

    relay_kind = kind.relay_kind
    if relay_kind in (NodeKind.IAB, NodeKind.NCR) and not kind.uav:
        stationary = ent["stationary"]
        for cell, street in enumerate(streets):
            # Corner sidewalk on the far side of the street from the gNB.
            x = gnb_x + sidewalk_mid
            y = street - toward_gnb[cell] * sidewalk_mid
            backhaul_az = _azimuth((x, y), gnb_xy[cell])
            backhaul_el = _elevation((x, y, stationary.height),
                                     (*gnb_xy[cell], ent["gnb"].height))
            azimuths = (backhaul_az,
                        float(wrap_degrees(backhaul_az + 120.0)),
                        float(wrap_degrees(backhaul_az - 120.0)))
            tilts = (-backhaul_el, params.access_downtilt, params.access_downtilt)
            records.append(LayoutRecord(f"{relay_kind.value}{cell}", relay_kind.value,
                                        x, y, stationary.height, stationary.tx_power_dbm,
                                        azimuths, tilts))
    elif relay_kind == NodeKind.RIS:
        ris = ent["ris"]
        index = 0
        for cell, street in enumerate(streets):
            y = street - toward_gnb[cell] * building_face
            facing = 90.0 * toward_gnb[cell]
            for block in (0, 2):
                records.append(LayoutRecord(f"ris{index}", NodeKind.RIS.value,
                                            geometry.block_center_x(block), y, ris.height,
                                            None, (facing,), (params.ris_downtilt,)))
                index += 1
    elif relay_kind is not None:
        uav = ent["uav"]
        for cell, street in enumerate(streets):
            x = params.ue_start_x + (params.ues_per_street - 1) * params.ue_spacing / 2
            y = street + toward_gnb[cell] * params.uav_standoff
            backhaul_az = _azimuth((x, y), gnb_xy[cell])
            backhaul_el = _elevation((x, y, uav.height), (*gnb_xy[cell], ent["gnb"].height))
            access_az = 90.0 * -toward_gnb[cell]
            access_tilt = math.degrees(math.atan2(uav.height - ent["ue"].height,
                                                  params.uav_standoff))
            records.append(LayoutRecord(f"uav_{relay_kind.value}{cell}", relay_kind.value,
                                        x, y, uav.height, uav.tx_power_dbm,
                                        (backhaul_az, access_az), (-backhaul_el, access_tilt)))

    ue = ent["ue"]
    index = 0
    for street in streets:
        for slot in range(params.ues_per_street):
            x = params.ue_start_x + slot * params.ue_spacing
            records.append(LayoutRecord(f"ue{index}", NodeKind.UE.value, x, street, ue.height,
                                        ue.tx_power_dbm))
            index += 1
    return records


def read_layout(path):
    """
    Read node records from a layout file

    The file is a YAML list of mappings with keys `label`, `kind`, `x`,
    `y`, `z` and optionally `power_dbm`, `panel_azimuths` and
    `panel_downtilts`.

    Raises
    ------
    ScenarioError
        If a record is malformed.
    """
    with open(path, encoding="utf-8") as stream:
        raw = yaml.safe_load(stream) or []
    if isinstance(raw, dict):
        raw = raw.get("nodes", [])
    records = []
    for item in raw:
        try:
            records.append(LayoutRecord(
                label=str(item["label"]),
                kind=str(item["kind"]).lower(),
                x=float(item["x"]), y=float(item["y"]), z=float(item["z"]),
                power_dbm=None if item.get("power_dbm") is None else float(item["power_dbm"]),
                panel_azimuths=tuple(float(a) for a in item.get("panel_azimuths", ())),
                panel_downtilts=tuple(float(a) for a in item.get("panel_downtilts", ())),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"bad layout record {item!r} in {path}: {exc}") from None
    return records


def write_layout(records, path):
    """Write node records to a YAML layout file"""
    rows = []
    for record in records:
        row = dict(label=record.label, kind=record.kind,
                   x=round(record.x, 3), y=round(record.y, 3), z=round(record.z, 3),
                   power_dbm=record.power_dbm)
        if record.panel_azimuths:
            row["panel_azimuths"] = [round(a, 3) for a in record.panel_azimuths]
        if record.panel_downtilts:
            row["panel_downtilts"] = [round(a, 3) for a in record.panel_downtilts]
        rows.append(row)
    Path(path).write_text(yaml.safe_dump({"nodes": rows}, sort_keys=False), encoding="utf-8")


#%%

def build_scenario(kind, geometry=None, params=None, layout=None, start_offset=0.0):
    """
    Place nodes for one deployment

    Parameters
    ----------
    kind : DeploymentKind or str
    geometry : GridGeometry, optional
        Defaults to the 120 m block grid.
    params : ScenarioParams, optional
        Entity characteristics and placement settings.
    layout : list of LayoutRecord, optional
        Records overriding default positions, powers and panels, matched by
        label.  Records for nodes absent from the deployment are ignored.
    start_offset : float, default 0
        Distance every UE has already driven along its course (a drop).

    Returns
    -------
    ScenarioState with no associations yet.

    Raises
    ------
    ScenarioError
        For an unknown deployment or invalid geometry.

    Examples
    --------
    state = build_scenario("stationary_ris")
    len(state.riss)
    # 4
    """
    try:
        kind = DeploymentKind.parse(kind)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    geometry = geometry or GridGeometry()
    params = params or ScenarioParams()

    records = default_layout(kind, geometry, params)
    if layout:
        overrides = {record.label: record for record in layout}
        records = [overrides.get(record.label, record) for record in records]

    if not 0.0 <= start_offset <= geometry.course_length:
        raise ScenarioError("start_offset must lie within the course")

    gnb_ids = {}
    nodes = {}
    courses = {}
    streets = [geometry.lower_street_y, geometry.upper_street_y]
    for node_id, record in enumerate(records):
        node_kind = NodeKind(record.kind)
        uav = kind.uav and node_kind in (NodeKind.IAB, NodeKind.NCR)
        ent = params.entities[_entity_key(node_kind, uav)]
        if node_kind == NodeKind.GNB:
            gnb_ids[len(gnb_ids)] = node_id
            cell = node_id
        else:
            # Cell of the nearer middle street: index 0 lower, 1 upper.
            cell_index = int(np.argmin([abs(record.y - street) for street in streets]))
            cell = gnb_ids[cell_index]

        azimuths = record.panel_azimuths or (0.0,) * ent.n_panels
        tilts = tuple(record.panel_downtilts) + (0.0,) * (len(azimuths) - len(record.panel_downtilts))
        panels = tuple(ArrayGeometry(ent.n_rows, ent.n_cols, params.element_spacing,
                                     float(az), -float(tilt))
                       for az, tilt in zip(azimuths, tilts))

        position = (record.x, record.y, record.z)
        if node_kind == NodeKind.UE:
            courses[node_id] = UeCourse(record.y, record.x, record.x + geometry.course_length)
            position = (record.x + start_offset, record.y, record.z)

        power = record.power_dbm if record.power_dbm is not None else ent.tx_power_dbm
        if node_kind == NodeKind.RIS:
            power = None
        nodes[node_id] = NodeDescriptor(node_id, record.label, node_kind, position, power,
                                        panels, ent.speed_kmh, uav, cell)

    clusters = {}
    if kind.uav:
        for node in nodes.values():
            if node.mounted_on_uav:
                clusters[node.id] = tuple(ue for ue, desc in sorted(nodes.items())
                                          if desc.kind == NodeKind.UE and desc.cell == node.cell)

    state = ScenarioState(kind, geometry, nodes, courses, clusters,
                          uav_standoff=params.uav_standoff)
    if kind.uav:
        # Start each UAV on its tracking target.
        state = _place_uavs(state, math.inf)
    logger.info("built %s scenario with %d nodes", kind.value, len(nodes))
    return state


def check_invariants(state, params=None):
    """
    Verify node counts and entity characteristics

    Raises
    ------
    ScenarioError
        Naming the first violated invariant.
    """
    params = params or ScenarioParams()
    kind = state.kind
    if len(state.gnbs) != 2:
        raise ScenarioError("deployment must have exactly two gNBs")
    if len(state.ues) != 2 * params.ues_per_street:
        raise ScenarioError("unexpected number of UEs")
    expected_relays = {None: 0, NodeKind.RIS: 4}.get(kind.relay_kind, 2)
    if len(state.relays) != expected_relays:
        raise ScenarioError(f"{kind.value} needs {expected_relays} auxiliary nodes")

    for node in state.nodes.values():
        ent = params.entities[_entity_key(node.kind, node.mounted_on_uav)]
        if node.kind != NodeKind.UE and not math.isclose(node.height, ent.height):
            raise ScenarioError(f"{node.label} height {node.height} != {ent.height}")
        if node.tx_power_dbm != ent.tx_power_dbm:
            raise ScenarioError(f"{node.label} power {node.tx_power_dbm} != {ent.tx_power_dbm}")
        if len(node.panels) != ent.n_panels:
            raise ScenarioError(f"{node.label} has {len(node.panels)} panels, expected {ent.n_panels}")
        if ent.n_panels == 3:
            azimuths = sorted(panel.boresight_az % 360.0 for panel in node.panels)
            gaps = np.diff(azimuths + [azimuths[0] + 360.0])
            if not np.allclose(gaps, 120.0, atol=1e-6):
                raise ScenarioError(f"{node.label} panels are not 120 degrees apart")


#%%

def _cluster_target(state, uav):
    members = [state.nodes[ue] for ue in state.uav_clusters[uav.id]]
    centroid = np.mean([member.xyz[:2] for member in members], axis=0)
    donor = state.nodes[uav.cell]
    toward_donor = math.copysign(1.0, donor.position[1] - centroid[1])
    return np.array([centroid[0], centroid[1] + toward_donor * state.uav_standoff, uav.height])


def _place_uavs(state, max_step):
    nodes = dict(state.nodes)
    for uav_id in state.uav_clusters:
        uav = nodes[uav_id]
        target = _cluster_target(state, uav)
        offset = target - uav.xyz
        distance = float(np.linalg.norm(offset))
        if distance > max_step:
            offset *= max_step / distance
        nodes[uav_id] = uav.moved_to(uav.xyz + offset)
    return replace(state, nodes=nodes)


def step_mobility(state, dt):
    """
    Advance mobile nodes by `dt` seconds

    UEs drive +x along their street at their speed and stop at the end of
    their course.  UAVs then fly toward the centroid of their UE cluster,
    offset by the standoff toward the donor, no faster than their speed.
    Stationary nodes do not move.

    Parameters
    ----------
    state : ScenarioState
    dt : float
        Time step in seconds, >= 0.

    Returns
    -------
    New ScenarioState with `sim_time` advanced.

    Raises
    ------
    ValueError
        If `dt` is negative.

    Examples
    --------
    moved = step_mobility(state, 1.0)
    # UEs at 40 km/h have advanced 11.11 m
    """
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return state

    nodes = dict(state.nodes)
    for ue_id, course in state.courses.items():
        ue = nodes[ue_id]
        x = min(ue.position[0] + kmh_to_mps(ue.speed_kmh) * dt, course.x_end)
        nodes[ue_id] = ue.moved_to((x, course.y, ue.position[2]))
    moved = replace(state, nodes=nodes, sim_time=state.sim_time + dt)

    if state.uav_clusters:
        speed = max(kmh_to_mps(nodes[uav].speed_kmh) for uav in state.uav_clusters)
        moved = _place_uavs(moved, speed * dt)
    return moved


#%%

def candidate_chains(state, ue_id):
    """Serving chains available to a UE in this deployment"""
    chains = [ServingChain(ChainKind.DIRECT, gnb.id) for gnb in state.gnbs]
    for relay in state.relays:
        chains.append(ServingChain(ChainKind(relay.kind.value), relay.cell, relay.id))
    return chains


def associate_ues(state, rsrp, floor_dbm=-140.0):
    """
    Serve each UE through its strongest candidate chain

    Parameters
    ----------
    state : ScenarioState
    rsrp : callable
        `rsrp(state, ue_id, chain)` returning wideband received power in dBm,
        e.g. `channel.LargeScaleModel.chain_rsrp`.
    floor_dbm : float, default -140
        UEs whose best candidate is below this are flagged out of coverage.

    Returns
    -------
    New ScenarioState with associations, UE cells set to their donor gNB,
    and `out_of_coverage` listing UEs below the floor.

    Ties are broken by the lowest serving node id.
    """
    associations = {}
    uncovered = set()
    nodes = dict(state.nodes)
    for ue in state.ues:
        scored = [(-float(rsrp(state, ue.id, chain)), chain.serving_node, chain)
                  for chain in candidate_chains(state, ue.id)]
        scored.sort(key=lambda item: (item[0], item[1]))
        best_power, _, best = scored[0]
        associations[ue.id] = best
        nodes[ue.id] = replace(ue, cell=best.gnb)
        if -best_power < floor_dbm:
            uncovered.add(ue.id)
            logger.warning("%s out of coverage (best %.1f dBm)", ue.label, -best_power)
        logger.info("%s served via %s (gNB %d, relay %s), %.1f dBm", ue.label,
                    best.kind.value, best.gnb, best.relay, -best_power)
    return replace(state, nodes=nodes, associations=associations,
                   out_of_coverage=frozenset(uncovered))
