"""
mac
---
Slot-level MAC: TDD direction, round-robin PRB allocation, half-duplex
IAB forwarding, link adaptation and throughput accounting

Classes
-------
SlotPattern
    Slot duration and symbols per slot.

McsEntry, McsTable
    Modulation and coding schemes with their 10% BLER SINR thresholds.

OuterLoopState
    Outer-loop SINR offset of one link.

BlerModel
    Logistic BLER curve per MCS.

LinkAdapter
    Per-link SINR estimates and outer-loop offsets.

TransportBlock
    One transport block and its HARQ outcome.

RelayBuffers
    Bits held at IAB nodes between hops.

RoundRobin
    Round-robin PRB allocator with a pointer per serving node.

Allocation
    PRBs given to one transmission in a slot.

SlotScheduler
    All allocations of a slot.

Functions
---------
tdd_direction
    DL on even slots, UL on odd slots.

rr_allocate
    Contiguous round-robin PRB map.

schedule_iab_hop
    Hop an IAB chain uses in a slot.

default_mcs_table, select_mcs, outer_loop_update, transmit
    Link adaptation.

transport_block_size, account_throughput
    Bits per TB and delivered throughput per UE.
"""

#%%

from collections import defaultdict
from dataclasses import dataclass, field, replace
import logging
import math
from typing import Optional, Tuple

import numpy as np

# Internal imports.
from densim.base import ChainKind, Direction, Outcome

logger = logging.getLogger(__name__)

#%%

@dataclass(frozen=True)
class SlotPattern:
    slot_duration: float = 0.25e-3
    symbols_per_slot: int = 14

    def direction(self, slot):
        return tdd_direction(slot)


def tdd_direction(slot):
    """
    Link direction of a slot

    Examples
    --------
    tdd_direction(7)
    # <Direction.UL: 'ul'>
    """
    if slot < 0:
        raise ValueError("slot index must be non-negative")
    return Direction.DL if slot % 2 == 0 else Direction.UL


def schedule_iab_hop(slot, chain=ChainKind.IAB):
    """
    Hop served in `slot` by a chain

    IAB nodes alternate hops over the slots of each direction: DL slots
    0, 4, 8, ... carry backhaul and 2, 6, 10, ... access; UL slots 1, 5,
    9, ... carry access and 3, 7, 11, ... backhaul.  Every IAB node follows
    the same pattern, so none transmits and receives in one slot.  Other
    chains deliver end to end in every slot ("direct").

    Returns
    -------
    "backhaul", "access" or "direct".
    """
    kind = chain.kind if hasattr(chain, "kind") else ChainKind(chain)
    if kind != ChainKind.IAB:
        return "direct"
    phase = (slot // 2) % 2
    if tdd_direction(slot) == Direction.DL:
        return "backhaul" if phase == 0 else "access"
    return "access" if phase == 0 else "backhaul"


#%%

def rr_allocate(users, n_prbs=66, pointer=0):
    """
    Round-robin PRB map

    Users are taken in order starting at `pointer` and given contiguous
    chunks; counts differ by at most one, extra PRBs going to the first
    users in round-robin order.

    Parameters
    ----------
    users : sequence of int
    n_prbs : int, default 66
    pointer : int, default 0

    Returns
    -------
    Integer array of length `n_prbs` holding the user of each PRB, -1 idle.

    Examples
    --------
    np.bincount(rr_allocate(range(8)))
    # array([9, 9, 8, 8, 8, 8, 8, 8])
    """
    prb_map = np.full(n_prbs, -1, dtype=int)
    users = list(users)
    if not users:
        return prb_map
    start = pointer % len(users)
    order = users[start:] + users[:start]
    base, extra = divmod(n_prbs, len(order))
    first = 0
    for position, user in enumerate(order):
        count = base + (1 if position < extra else 0)
        prb_map[first:first + count] = user
        first += count
    return prb_map


def prb_chunks(prb_map):
    """PRB indices per user of a PRB map, in PRB order"""
    chunks = {}
    for user in dict.fromkeys(int(u) for u in prb_map if u >= 0):
        chunks[user] = np.flatnonzero(prb_map == user)
    return chunks


class RoundRobin:
    """
    Round-robin allocator keeping one pointer per key

    The pointer of a key advances by one every time it allocates.
    """

    def __init__(self, n_prbs=66):
        self.n_prbs = n_prbs
        self.pointers = defaultdict(int)

    def allocate(self, key, users, n_prbs=None):
        users = list(users)
        if not users:
            return {}
        prb_map = rr_allocate(users, self.n_prbs if n_prbs is None else n_prbs,
                              self.pointers[key])
        self.pointers[key] += 1
        return prb_chunks(prb_map)

    def split(self, key, users, prbs):
        """Share a chunk of PRBs among `users` in round-robin order"""
        chunks = self.allocate(key, users, len(prbs))
        return {user: np.asarray(prbs)[local] for user, local in chunks.items()}


#%%

# CQI table of 38.214 (64QAM) with a lower-rate QPSK entry as index 0.
CQI_ENTRIES = (
    (2, 30, 0.0586),
    (2, 78, 0.1523),
    (2, 120, 0.2344),
    (2, 193, 0.3770),
    (2, 308, 0.6016),
    (2, 449, 0.8770),
    (2, 602, 1.1758),
    (4, 378, 1.4766),
    (4, 490, 1.9141),
    (4, 616, 2.4063),
    (6, 466, 2.7305),
    (6, 567, 3.3223),
    (6, 666, 3.9023),
    (6, 772, 4.5234),
    (6, 873, 5.1152),
    (6, 948, 5.5547),
)


@dataclass(frozen=True)
class McsEntry:
    index: int
    modulation_order: int
    code_rate: float
    spectral_efficiency: float
    threshold_db: float


@dataclass(frozen=True)
class McsTable:
    """
    MCS entries ordered by index

    Spectral efficiencies and thresholds must both be strictly increasing.
    """
    entries: Tuple[McsEntry, ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("MCS table is empty")
        if np.any(np.diff(self.spectral_efficiencies) <= 0):
            raise ValueError("MCS spectral efficiencies must increase with index")
        if np.any(np.diff(self.thresholds) <= 0):
            raise ValueError("MCS thresholds must increase with index")

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, index):
        return self.entries[index]

    @property
    def thresholds(self):
        return np.array([entry.threshold_db for entry in self.entries])

    @property
    def spectral_efficiencies(self):
        return np.array([entry.spectral_efficiency for entry in self.entries])


def default_mcs_table(slope=1.5, target_bler=0.1, efficiency_factor=0.75):
    """
    16-entry MCS table

    Each entry's BLER curve is centred (50% BLER) at the SINR where
    `efficiency_factor` times the Shannon capacity equals its spectral
    efficiency; the threshold is where the curve crosses `target_bler`.
    """
    entries = []
    for index, (order, rate, efficiency) in enumerate(CQI_ENTRIES):
        centre = 10.0 * math.log10(2.0 ** (efficiency / efficiency_factor) - 1.0)
        threshold = centre + math.log(1.0 / target_bler - 1.0) / slope
        entries.append(McsEntry(index, order, rate / 1024.0, efficiency, threshold))
    return McsTable(tuple(entries))


def select_mcs(table, estimated_sinr_db, offset_db=0.0):
    """
    Highest MCS whose threshold is at or below the corrected SINR estimate

    Below the lowest threshold the most robust MCS (index 0) is used.
    """
    corrected = estimated_sinr_db + offset_db
    index = int(np.searchsorted(table.thresholds, corrected, side="right")) - 1
    return max(index, 0)


@dataclass(frozen=True)
class OuterLoopState:
    offset: float = 0.0
    step_down: float = 1.0
    step_up: float = 0.1
    lower: float = -20.0
    upper: float = 5.0

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("outer-loop lower bound exceeds upper bound")


def outer_loop_update(state, outcome):
    """
    Outer-loop offset after one HARQ outcome

    NACK lowers the offset by `step_down`, ACK raises it by `step_up`,
    both clamped to [lower, upper].

    Examples
    --------
    outer_loop_update(OuterLoopState(), Outcome.NACK).offset
    # -1.0
    """
    step = -state.step_down if Outcome(outcome) == Outcome.NACK else state.step_up
    offset = min(max(state.offset + step, state.lower), state.upper)
    return replace(state, offset=offset)


class BlerModel:
    """
    Logistic block error rate

    BLER(s) = 1 / (1 + (1/target - 1) exp(slope (s - threshold))), so the
    curve of each MCS passes through the target at its threshold.
    """

    def __init__(self, table, slope=1.5, target_bler=0.1):
        if slope <= 0:
            raise ValueError("BLER slope must be positive")
        self.table = table
        self.slope = slope
        self.odds = 1.0 / target_bler - 1.0

    def bler(self, mcs, sinr_db):
        exponent = np.clip(self.slope * (sinr_db - self.table[mcs].threshold_db), -700.0, 700.0)
        return 1.0 / (1.0 + self.odds * np.exp(exponent))


@dataclass
class TransportBlock:
    """
    Transport block

    `final` marks blocks whose ACK delivers data end to end (every hop
    except the first hop of an IAB chain).
    """
    link: Tuple[int, int]
    ue: int
    mcs: int
    prbs: np.ndarray
    bits: int
    outcome: Optional[Outcome] = None
    final: bool = True
    direction: Direction = Direction.DL


def transport_block_size(spectral_efficiency, n_prbs, overhead=0.86, symbols=14, subcarriers=12):
    """
    Bits carried by a TB

    Examples
    --------
    transport_block_size(5.5547, 66)
    # 52967
    """
    return int(math.floor(spectral_efficiency * subcarriers * symbols * n_prbs * overhead))


def transmit(tb, actual_sinr_db, bler_model, rng):
    """Draw the HARQ outcome of `tb`, sets and returns it"""
    nack = rng.random() < bler_model.bler(tb.mcs, actual_sinr_db)
    tb.outcome = Outcome.NACK if nack else Outcome.ACK
    return tb.outcome


def account_throughput(tbs, window):
    """
    Delivered throughput per UE in bit/s

    Only ACKed end-to-end (`final`) blocks count.

    Examples
    --------
    account_throughput([TransportBlock((0, 2), 2, 9, np.arange(4), 10000, Outcome.ACK)], 1e-3)
    # {2: 10000000.0}
    """
    if window <= 0:
        raise ValueError("throughput window must be positive")
    delivered = defaultdict(int)
    for tb in tbs:
        if tb.final and tb.outcome == Outcome.ACK:
            delivered[tb.ue] += tb.bits
    return {ue: bits / window for ue, bits in delivered.items()}


#%%

class LinkAdapter:
    """
    Per-link link adaptation state

    The SINR estimate of a link is its last measured effective SINR; the
    outer loop corrects it by an offset driven by HARQ feedback.

    Parameters
    ----------
    table : McsTable
    loop : OuterLoopState
        Template for new links.
    """

    def __init__(self, table, loop=None):
        self.table = table
        self.template = loop or OuterLoopState()
        self.estimates = {}
        self.loops = {}

    def offset(self, link):
        return self.loops.get(link, self.template).offset

    def estimate(self, link, fallback_db):
        return self.estimates.get(link, fallback_db)

    def select(self, link, fallback_db):
        """MCS for `link`; `fallback_db` stands in before the first measurement"""
        return select_mcs(self.table, self.estimate(link, fallback_db), self.offset(link))

    def update(self, link, measured_db, outcome):
        self.estimates[link] = measured_db
        self.loops[link] = outer_loop_update(self.loops.get(link, self.template), outcome)


class RelayBuffers:
    """Bits waiting at IAB nodes, per (IAB node, UE, direction)"""

    def __init__(self):
        self.bits = defaultdict(int)

    def held(self, iab, ue, direction):
        return self.bits[(iab, ue, Direction(direction))]

    def add(self, iab, ue, direction, bits):
        self.bits[(iab, ue, Direction(direction))] += int(bits)

    def take(self, iab, ue, direction, bits):
        key = (iab, ue, Direction(direction))
        taken = min(int(bits), self.bits[key])
        self.bits[key] -= taken
        return taken


#%%

@dataclass(frozen=True)
class Allocation:
    """PRBs of one scheduled transmission"""
    tx: int
    rx: int
    ue: int
    hop: str
    prbs: np.ndarray
    relay: Optional[int] = None


@dataclass
class SlotScheduler:
    """
    Round-robin scheduling of every serving node in a slot

    Each gNB shares its PRBs among its direct, NCR-served and RIS-served
    UEs and, on backhaul slots, one pseudo-user per IAB node it donates
    to; the pseudo-user's chunk is split among that IAB node's UEs.  On
    access slots each IAB node shares its PRBs among its UEs.  Full-buffer
    traffic: UEs always have DL data at the gNB and UL data to send, while
    relayed hops only carry what the IAB node holds.
    """
    n_prbs: int = 66
    rr: RoundRobin = field(default=None)

    def __post_init__(self):
        if self.rr is None:
            self.rr = RoundRobin(self.n_prbs)

    def schedule(self, slot, state, buffers):
        """
        Allocations of `slot`

        Parameters
        ----------
        slot : int
        state : ScenarioState
            With associations.
        buffers : RelayBuffers

        Returns
        -------
        List of Allocation; each carries `tx`/`rx` for the slot's direction.
        """
        direction = tdd_direction(slot)
        iab_hop = schedule_iab_hop(slot, ChainKind.IAB)
        served = [ue.id for ue in state.ues if ue.id not in state.out_of_coverage]
        chains = state.associations
        allocations = []

        def add(source, sink, ue, hop, prbs, relay=None):
            tx, rx = (source, sink) if direction == Direction.DL else (sink, source)
            allocations.append(Allocation(tx, rx, ue, hop, np.asarray(prbs), relay))

        def iab_members(iab, need_buffer):
            members = [ue for ue in served if chains[ue].relay == iab
                       and chains[ue].kind == ChainKind.IAB]
            if need_buffer:
                members = [ue for ue in members if buffers.held(iab, ue, direction) > 0]
            return members

        for gnb in state.gnbs:
            users = [ue for ue in served
                     if chains[ue].gnb == gnb.id and chains[ue].kind != ChainKind.IAB]
            backhaul = {}
            if iab_hop == "backhaul":
                for iab in state.iab_nodes:
                    if iab.cell != gnb.id:
                        continue
                    members = iab_members(iab.id, need_buffer=direction == Direction.UL)
                    if members:
                        backhaul[iab.id] = members
            chunks = self.rr.allocate((gnb.id, direction), sorted(users + list(backhaul)))
            for user, prbs in chunks.items():
                if user in backhaul:
                    split = self.rr.split((user, direction, "backhaul"), backhaul[user], prbs)
                    for ue, sub in split.items():
                        add(gnb.id, user, ue, "backhaul", sub)
                else:
                    add(gnb.id, user, user, "direct", prbs, chains[user].relay)

        if iab_hop == "access":
            for iab in state.iab_nodes:
                members = iab_members(iab.id, need_buffer=direction == Direction.DL)
                for ue, prbs in self.rr.allocate((iab.id, direction), members).items():
                    add(iab.id, ue, ue, "access", prbs)

        logger.debug("slot %d %s: %d allocations", slot, direction.value, len(allocations))
        return allocations
