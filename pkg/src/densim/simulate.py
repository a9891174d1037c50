"""
simulate
--------
Slot engine of one simulation run

Every slot UEs and UAVs move, the MAC schedules the slot, each scheduled
transmission gets its per-PRB SINR from the current channels, and its
transport block is adapted, decoded and accounted.  UEs are associated at
the first slot, and again every `association_slots` slots if that is set.
Every `refresh_slots` slots, and after each association, the engine
recomputes large-scale losses, redraws rays, reselects beams and
re-optimises RIS coefficients; between refreshes ray gains evolve with the
temporal correlation.  A run ends early once every UE has reached the end
of its course.

Classes
-------
RunResult
    Trace and context of a finished run.

Simulation
    State of one (deployment, seed) run.

Functions
---------
simulate_run
    Build and run a simulation.
"""

#%%

from dataclasses import dataclass, field, replace
import logging
from typing import List

import numpy as np
import pandas as pd

# Internal imports.
from densim.antenna import beam_pair_indices, make_codebook
from densim.base import ChainKind, DeploymentKind, Direction, NodeKind, Outcome, ScenarioError
from densim.channel import (LargeScaleModel, classify_link, draw_rays, evolve_rays,
                            ray_matrix, ray_phases, ray_projection, ray_responses)
from densim.dutils import dbm_to_mw, kmh_to_mps, linear_to_db, spawn_rng
from densim.mac import (LinkAdapter, RelayBuffers, SlotScheduler, TransportBlock,
                        tdd_direction, transmit, transport_block_size)
from densim.phy import (SlotSnapshot, Transmission, effective_sinr, ncr_gain_prb,
                        optimize_theta, sinr_transmission)
from densim.scenario import associate_ues, build_scenario, step_mobility

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["slot", "direction", "link", "tx", "rx", "ue", "hop", "n_prbs",
                 "first_prb", "mcs", "sinr_db", "est_sinr_db", "offset_db", "bits",
                 "outcome", "final"]

#%%

@dataclass
class _Link:
    """Channel state of an unordered node pair, endpoint a < b"""
    a: int
    b: int
    link_class: object
    loss_db: float
    rays: object
    phases: np.ndarray

    @property
    def amplitude(self):
        return 10.0 ** (-self.loss_db / 20.0)


@dataclass
class RunResult:
    deployment: DeploymentKind
    seed: int
    trace: pd.DataFrame
    ues: List[int]
    window: float
    state: object
    channel_records: list = field(default_factory=list)


class Simulation:
    """
    One simulation run

    Parameters
    ----------
    config : RunConfig
    deployment : DeploymentKind or str
    seed : int
    layout : list of LayoutRecord, optional
        Node placement overrides.

    Examples
    --------
    result = Simulation(RunConfig(n_slots=100), "stationary_ncr", seed=1).run()
    result.trace.head()
    """

    def __init__(self, config, deployment, seed, layout=None):
        self.config = config
        self.kind = DeploymentKind.parse(deployment)
        self.seed = int(seed)
        self.dt = config.slot_duration
        params = config.channel_params()
        if not config.shadowing:
            params = replace(params, shadowing_sigma={key: 0.0 for key in params.shadowing_sigma})
        self.params = params
        self.patterns = config.element_patterns()
        self.noise_mw = config.noise_mw()
        self.centre_prb = config.n_prbs // 2

        geometry = config.grid()
        scenario_params = config.scenario_params()
        offset = self._course_offset(geometry)
        self.state = build_scenario(self.kind, geometry, scenario_params, layout, offset)
        self.large_scale = LargeScaleModel(self.params, self.seed, self.patterns)

        self.scheduler = SlotScheduler(config.n_prbs)
        self.buffers = RelayBuffers()
        self.adapter = LinkAdapter(config.mcs_table(), config.outer_loop())
        self.bler = config.bler_model()
        self.ncr_configs = {ncr.id: config.ncr_config(ncr.tx_power_dbm) for ncr in self.state.ncrs}

        self._mac_rng = spawn_rng(self.seed, "mac")
        self._fading_rng = spawn_rng(self.seed, "fading")
        self._codebooks = {}
        self._links = {}
        self._beams = {}
        self._theta = {}
        self._projections = {}
        self._refreshes = 0
        self.rows = []
        self.channel_records = []

    #%%

    def _course_offset(self, geometry):
        if not self.config.random_course_offset:
            return 0.0
        travel = self.config.n_slots * self.dt * kmh_to_mps(self.config.ue_speed_kmh)
        room = geometry.course_length - travel
        if room <= 0:
            return 0.0
        return float(spawn_rng(self.seed, "course").uniform(0.0, room))

    def _pattern(self, node):
        return self.patterns[node.kind]

    def codebook(self, panel):
        """Beam codebook of a panel (a single weight for one-element arrays)"""
        key = (panel.n_rows, panel.n_cols, panel.element_spacing)
        if key not in self._codebooks:
            if panel.n_elements == 1:
                self._codebooks[key] = np.ones((1, 1), dtype=complex)
            else:
                cfg = self.config
                self._codebooks[key] = make_codebook(panel, cfg.codebook_az, cfg.codebook_el,
                                                     cfg.codebook_az_span, cfg.codebook_el_span)
        return self._codebooks[key]

    def link(self, x, y):
        return self._links.get((min(x, y), max(x, y)))

    #%%

    def associate(self):
        """Serve each UE through its strongest candidate chain"""
        cfg = self.config
        self.state = associate_ues(
            self.state,
            lambda state, ue, chain: self.large_scale.chain_rsrp(
                state, ue, chain, cfg.ncr_gain_db, cfg.ncr_max_power_dbm),
            cfg.association_floor_dbm)

    def association_due(self, slot):
        """True if UEs are re-associated at `slot`"""
        every = self.config.association_slots
        return slot == 0 or (every > 0 and slot % every == 0)

    def refresh(self, slot):
        """Rebuild channels, beams and RIS coefficients"""
        cfg = self.config
        if not self.state.associations:
            self.associate()

        nodes = self.state.nodes
        self._links = {}
        ids = sorted(nodes)
        for index, a in enumerate(ids):
            for b in ids[index + 1:]:
                na, nb = nodes[a], nodes[b]
                if na.kind == NodeKind.UE and nb.kind == NodeKind.UE:
                    continue
                try:
                    link_class = classify_link(na, nb, na.cell == nb.cell,
                                               self.params.backhaul_visibility)
                except ScenarioError:
                    continue
                loss = self.large_scale.loss(na, nb, link_class).total_loss
                rays = draw_rays(link_class, na.xyz, nb.xyz,
                                 spawn_rng(self.seed, "rays", a, b, self._refreshes), self.params)
                self._links[(a, b)] = _Link(a, b, link_class, loss, rays,
                                            ray_phases(rays, self.params))

        self._projections = {}
        self._select_beams()
        if self.state.ncrs:
            self._aim_ncr_donors()
        if self.state.riss:
            self._configure_riss()
        if cfg.channel_trace:
            self._record_channels(slot)
        self._refreshes += 1
        logger.debug("refreshed channels at slot %d: %d links", slot, len(self._links))

    def _channel(self, tx, rx, tx_panel, rx_panel, prb):
        """H from node `tx` to node `rx` on one PRB, with element patterns"""
        link = self.link(tx.id, rx.id)
        return ray_matrix(link.rays, tx_panel, rx_panel, prb, self.params,
                          reverse=tx.id > rx.id, tx_pattern=self._pattern(tx),
                          rx_pattern=self._pattern(rx))

    def _select_beams(self):
        nodes = self.state.nodes
        self._beams = {}
        for (a, b), link in self._links.items():
            na, nb = nodes[a], nodes[b]
            if na.kind == NodeKind.RIS or nb.kind == NodeKind.RIS:
                node, ris = (na, nb) if nb.kind == NodeKind.RIS else (nb, na)
                self._beams[(node.id, ris.id)] = self._beam_toward_ris(node, ris)
                continue
            best = None
            for pa, panel_a in enumerate(na.panels):
                for pb, panel_b in enumerate(nb.panels):
                    H = self._channel(na, nb, panel_a, panel_b, self.centre_prb)
                    book_a, book_b = self.codebook(panel_a), self.codebook(panel_b)
                    ti, ri, gain = beam_pair_indices(H, book_a, book_b)
                    if best is None or gain > best[0]:
                        best = (gain, pa, book_a[ti], pb, book_b[ri])
            _, pa, f, pb, d = best
            # Stored as transmit weights; a node receives with the conjugate.
            self._beams[(a, b)] = (pa, f)
            self._beams[(b, a)] = (pb, np.conj(d))

    def _beam_toward_ris(self, node, ris):
        best = None
        for index, panel in enumerate(node.panels):
            H = self._channel(node, ris, panel, ris.panels[0], self.centre_prb)
            book = self.codebook(panel)
            power = np.sum(np.abs(H @ book.T) ** 2, axis=0)
            beam = int(np.argmax(power))
            if best is None or power[beam] > best[0]:
                best = (power[beam], index, book[beam])
        return best[1], best[2]

    def _aim_ncr_donors(self):
        # The donor reaches an NCR-served UE through the beam facing its NCR.
        for ue in self.state.ues:
            chain = self.state.associations[ue.id]
            if chain.kind == ChainKind.NCR and (chain.gnb, chain.relay) in self._beams:
                self._beams[(chain.gnb, ue.id)] = self._beams[(chain.gnb, chain.relay)]

    def _configure_riss(self):
        nodes = self.state.nodes
        chains = self.state.associations
        for ris in self.state.riss:
            donor = nodes[ris.cell]
            served = [ue for ue in self.state.ues if chains[ue.id].relay == ris.id]
            candidates = served or self.state.ues
            target = min(candidates, key=lambda ue: (np.linalg.norm(ue.xyz - ris.xyz), ue.id))
            k = np.array([self.centre_prb])
            incident = self._incident(donor.id, ris.id, ris.id, k)[0]
            outgoing = self._outgoing(ris.id, target.id, donor.id, k)[0]
            self._theta[ris.id] = optimize_theta(incident, outgoing,
                                                 phase_bits=self.config.ris_phase_bits)
        # RIS-served UEs keep whichever donor beam gives the larger total power.
        for ue in self.state.ues:
            chain = chains[ue.id]
            if chain.kind != ChainKind.RIS:
                continue
            direct_beam = self._beams.get((chain.gnb, ue.id))
            ris_beam = self._beams.get((chain.gnb, chain.relay))
            k = np.array([self.centre_prb])
            scores = []
            for beam in (direct_beam, ris_beam):
                self._beams[(chain.gnb, ue.id)] = beam
                self._projections = {}
                power = np.abs(self._gain(chain.gnb, ue.id, ue.id, chain.gnb, k)) ** 2 \
                    + np.abs(self._cascade(chain.gnb, ue.id, chain.relay, ue.id, chain.gnb, k)) ** 2
                scores.append(float(power[0]))
            self._beams[(chain.gnb, ue.id)] = direct_beam if scores[0] >= scores[1] else ris_beam
            self._projections = {}

    #%%

    def _rx_beam(self, node, peer):
        panel, weights = self._beams[(node, peer)]
        return panel, np.conj(weights)

    def _gain(self, tx, tx_peer, rx, rx_peer, prbs=None):
        """
        Per-PRB gain from `tx` (beam toward `tx_peer`) to `rx` (beam toward
        `rx_peer`), large-scale loss included
        """
        n = self.config.n_prbs if prbs is None else len(prbs)
        link = self.link(tx, rx) if tx != rx else None
        if link is None or (tx, tx_peer) not in self._beams or (rx, rx_peer) not in self._beams:
            return np.zeros(n, dtype=complex)
        key = (tx, tx_peer, rx, rx_peer)
        if key not in self._projections:
            nodes = self.state.nodes
            tx_panel, f = self._beams[(tx, tx_peer)]
            rx_panel, d = self._rx_beam(rx, rx_peer)
            self._projections[key] = link.amplitude * ray_projection(
                link.rays, nodes[tx].panels[tx_panel], nodes[rx].panels[rx_panel], f, d,
                reverse=tx > rx, tx_pattern=self._pattern(nodes[tx]),
                rx_pattern=self._pattern(nodes[rx]))
        phases = link.phases if prbs is None else link.phases[prbs]
        return phases @ (link.rays.gains * self._projections[key])

    def _incident(self, tx, tx_peer, ris, prbs=None):
        """Per-PRB signal on each RIS element from `tx` beaming toward `tx_peer`, (K, N)"""
        link = self.link(tx, ris)
        nodes = self.state.nodes
        if link is None or (tx, tx_peer) not in self._beams:
            return None
        panel, f = self._beams[(tx, tx_peer)]
        tx_end, ris_end = ("a", "b") if tx < ris else ("b", "a")
        X = ray_responses(link.rays, nodes[tx].panels[panel], tx_end, self._pattern(nodes[tx]))
        R = ray_responses(link.rays, nodes[ris].panels[0], ris_end, self._pattern(nodes[ris]))
        if tx < ris:
            weights, R = X.conj() @ f, R
        else:
            weights, R = X @ f, R.conj()
        phases = link.phases if prbs is None else link.phases[prbs]
        return link.amplitude * ((phases * (link.rays.gains * weights)) @ R)

    def _outgoing(self, ris, rx, rx_peer, prbs=None):
        """Per-PRB coefficient from each RIS element to `rx` beaming toward `rx_peer`, (K, N)"""
        link = self.link(ris, rx)
        nodes = self.state.nodes
        if link is None or (rx, rx_peer) not in self._beams:
            return None
        panel, d = self._rx_beam(rx, rx_peer)
        rx_end, ris_end = ("a", "b") if rx < ris else ("b", "a")
        Y = ray_responses(link.rays, nodes[rx].panels[panel], rx_end, self._pattern(nodes[rx]))
        R = ray_responses(link.rays, nodes[ris].panels[0], ris_end, self._pattern(nodes[ris]))
        if ris < rx:
            weights, R = Y @ np.conj(d), R.conj()
        else:
            weights, R = Y.conj() @ np.conj(d), R
        phases = link.phases if prbs is None else link.phases[prbs]
        return link.amplitude * ((phases * (link.rays.gains * weights)) @ R)

    def _cascade(self, tx, tx_peer, ris, rx, rx_peer, prbs=None):
        incident = self._incident(tx, tx_peer, ris, prbs)
        outgoing = self._outgoing(ris, rx, rx_peer, prbs)
        if incident is None or outgoing is None:
            n = self.config.n_prbs if prbs is None else len(prbs)
            return np.zeros(n, dtype=complex)
        return np.sum(outgoing * self._theta[ris].theta * incident, axis=1)

    def _record_channels(self, slot):
        for ue in self.state.ues:
            chain = self.state.associations[ue.id]
            source = chain.relay if chain.kind == ChainKind.IAB else chain.gnb
            link = self.link(source, ue.id)
            if link is None:
                continue
            gain = self._gain(source, ue.id, ue.id, source)
            loss = link.loss_db
            link_id = f"{source}-{ue.id}"
            self.channel_records.extend(
                (slot, link_id, k, loss, float(np.abs(value) ** 2 / link.amplitude ** 2))
                for k, value in enumerate(gain))

    #%%

    def _snapshot(self, slot, allocations):
        nodes = self.state.nodes
        n_prbs = self.config.n_prbs
        direction = tdd_direction(slot)

        used = {}
        for allocation in allocations:
            used[allocation.tx] = used.get(allocation.tx, 0) + len(allocation.prbs)
        transmissions = []
        for allocation in allocations:
            power = np.zeros(n_prbs)
            power[allocation.prbs] = dbm_to_mw(nodes[allocation.tx].tx_power_dbm) / used[allocation.tx]
            transmissions.append(Transmission(allocation.tx, allocation.rx, allocation.ue,
                                              allocation.hop, power, allocation.relay))

        snapshot = SlotSnapshot(self.noise_mw, transmissions, chains=dict(self.state.associations),
                                direction=direction)
        active = [t.power_mw > 0 for t in transmissions]
        overlap = {(i, j): bool(np.any(active[i] & active[j]))
                   for i in range(len(transmissions)) for j in range(len(transmissions))}

        for i, ti in enumerate(transmissions):
            for j, tj in enumerate(transmissions):
                if overlap[(i, j)]:
                    snapshot.gamma[(i, j)] = self._gain(ti.tx, ti.rx, tj.rx, tj.tx)

        for ris in self.state.riss:
            incident = {i: self._incident(t.tx, t.rx, ris.id) for i, t in enumerate(transmissions)}
            outgoing = {j: self._outgoing(ris.id, t.rx, t.tx) for j, t in enumerate(transmissions)}
            theta = self._theta[ris.id].theta
            for (i, j), shared in overlap.items():
                if shared and incident[i] is not None and outgoing[j] is not None:
                    snapshot.eta[(i, j, ris.id)] = np.sum(outgoing[j] * theta * incident[i], axis=1)

        for ncr in self.state.ncrs:
            self._add_ncr(snapshot, ncr, direction, overlap)
        return snapshot

    def _add_ncr(self, snapshot, ncr, direction, overlap):
        """Forwarding gains of one NCR for the slot"""
        transmissions = snapshot.transmissions
        n_prbs = self.config.n_prbs
        forwarded = [j for j, t in enumerate(transmissions) if t.relay == ncr.id]
        if not forwarded:
            return
        donor = ncr.cell
        forwarding = np.zeros(n_prbs, dtype=bool)
        ue_of_prb = {}
        for j in forwarded:
            prbs = np.flatnonzero(transmissions[j].power_mw > 0)
            forwarding[prbs] = True
            ue_of_prb[transmissions[j].ue] = prbs

        def access_gain(make):
            total = np.zeros(n_prbs, dtype=complex)
            for ue, prbs in ue_of_prb.items():
                total[prbs] = make(ue)[prbs]
            return total

        for i, t in enumerate(transmissions):
            if direction == Direction.DL:
                into = self._gain(t.tx, t.rx, ncr.id, donor)
            else:
                into = access_gain(lambda ue: self._gain(t.tx, t.rx, ncr.id, ue))
            if np.any(into[forwarding]):
                snapshot.to_ncr[(i, ncr.id)] = into
        for j, t in enumerate(transmissions):
            if direction == Direction.DL:
                out = access_gain(lambda ue: self._gain(ncr.id, ue, t.rx, t.tx))
            else:
                out = self._gain(ncr.id, donor, t.rx, t.tx)
            if np.any(out[forwarding]):
                snapshot.from_ncr[(ncr.id, j)] = out

        useful = np.zeros(n_prbs)
        for j in forwarded:
            useful += np.abs(snapshot.to_ncr.get((j, ncr.id), 0.0)) ** 2 * transmissions[j].power_mw
        snapshot.ncr_gain[ncr.id] = ncr_gain_prb(self.ncr_configs[ncr.id], useful, forwarding)

    #%%

    def step(self, slot):
        """Run one slot"""
        reassociate = self.association_due(slot)
        if reassociate:
            self.associate()
        if reassociate or slot % self.config.refresh_slots == 0:
            self.refresh(slot)
        else:
            rho = self.params.temporal_correlation
            for link in self._links.values():
                link.rays = evolve_rays(link.rays, self._fading_rng, rho)

        allocations = self.scheduler.schedule(slot, self.state, self.buffers)
        if allocations:
            snapshot = self._snapshot(slot, allocations)
            for j, transmission in enumerate(snapshot.transmissions):
                self._deliver(slot, j, transmission, snapshot)
        self.state = step_mobility(self.state, self.dt)

    def _deliver(self, slot, j, transmission, snapshot):
        direction = snapshot.direction
        prbs = np.flatnonzero(transmission.power_mw > 0)
        rho = sinr_transmission(j, snapshot, prbs).rho
        measured_db = float(linear_to_db(effective_sinr(rho)))

        key = (transmission.tx, transmission.rx, transmission.ue)
        estimate_db = self.adapter.estimate(key, measured_db)
        offset_db = self.adapter.offset(key)
        mcs = self.adapter.select(key, measured_db)
        bits = transport_block_size(self.adapter.table[mcs].spectral_efficiency, len(prbs),
                                    self.config.tbs_overhead, self.config.symbols_per_slot)

        hop = transmission.hop
        relay_out = (direction == Direction.DL and hop == "access") \
            or (direction == Direction.UL and hop == "backhaul")
        relay_in = (direction == Direction.DL and hop == "backhaul") \
            or (direction == Direction.UL and hop == "access")
        if relay_out:
            bits = min(bits, self.buffers.held(transmission.tx, transmission.ue, direction))

        tb = TransportBlock((transmission.tx, transmission.rx), transmission.ue, mcs, prbs,
                            bits, final=not relay_in, direction=direction)
        outcome = transmit(tb, measured_db, self.bler, self._mac_rng)
        self.adapter.update(key, measured_db, outcome)
        if outcome == Outcome.ACK:
            if relay_in:
                self.buffers.add(transmission.rx, transmission.ue, direction, bits)
            elif relay_out:
                self.buffers.take(transmission.tx, transmission.ue, direction, bits)

        self.rows.append((slot, direction.value, f"{transmission.tx}-{transmission.rx}",
                          transmission.tx, transmission.rx, transmission.ue, hop, len(prbs),
                          int(prbs[0]), mcs, measured_db, estimate_db, offset_db, bits,
                          outcome.value, tb.final))

    def run(self):
        """
        Simulate all slots, or until every UE has finished its course

        Returns
        -------
        RunResult
            Its `window` covers the slots actually run.
        """
        logger.info("running %s seed %d for %d slots", self.kind.value, self.seed,
                    self.config.n_slots)
        n_run = 0
        for slot in range(self.config.n_slots):
            self.step(slot)
            n_run = slot + 1
            if self.state.course_finished:
                logger.info("all UEs reached the end of their course after %d slots", n_run)
                break
        trace = pd.DataFrame.from_records(self.rows, columns=TRACE_COLUMNS)
        trace["final"] = trace["final"].astype(bool)
        ues = [ue.id for ue in self.state.ues]
        window = n_run * self.dt
        logger.info("finished %s seed %d: %d transport blocks", self.kind.value, self.seed,
                    len(trace))
        return RunResult(self.kind, self.seed, trace, ues, window, self.state,
                         self.channel_records)


def simulate_run(config, deployment, seed, layout=None):
    """Run one (deployment, seed) simulation and return its RunResult"""
    return Simulation(config, deployment, seed, layout).run()
