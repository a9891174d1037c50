"""
phy
---
Per-PRB useful power, interference, noise and SINR for direct, IAB, NCR
and RIS serving chains, and RIS reflection-coefficient optimisation

The SINR operations read a `SlotSnapshot`: every transmission scheduled
in the slot with its per-PRB power, and the effective gains between the
transmissions, NCRs and RISs with the beams in use.  Transmissions are
indexed by their position in `SlotSnapshot.transmissions`.

Classes
-------
LinkGain
    Effective gain gamma = d^H H f and optional RIS cascade eta.

NcrConfig
    NCR amplifier gain and state.

RisConfig
    RIS reflection coefficients.

Transmission
    One scheduled transmission in a slot.

SlotSnapshot
    Everything the SINR operations need for one slot.

SinrBreakdown
    Useful power, interference, noise and SINR.

Functions
---------
noise_power_prb
    Thermal noise per PRB.

effective_gain
    gamma = d^H H f.

cascade_gain
    eta = d^H H2 Theta H1 f.

optimize_theta
    Reflection coefficients maximising |eta|.

ncr_gain_prb
    Per-PRB NCR gain with amplifier saturation.

sinr_direct, sinr_iab, sinr_ncr, sinr_ris, sinr_transmission
    SINR per serving chain.

effective_sinr
    Mutual-information average of per-PRB SINR.
"""

#%%

from dataclasses import dataclass, field
import logging
from typing import Dict, List, Optional, Tuple

import numpy as np

# Internal imports.
from densim.base import ChainKind, ChainMismatchError, DimensionError, Direction
from densim.dutils import db_to_linear

logger = logging.getLogger(__name__)

HOPS = ("direct", "backhaul", "access")

#%%

def noise_power_prb(density_dbm_hz=-174.0, n_subcarriers=12, scs_hz=60e3, noise_figure_db=9.0):
    """
    Thermal noise power of one PRB, mW

    sigma^2 = density + 10 log10(n_subcarriers scs) + noise figure, in dBm.

    Examples
    --------
    10 * np.log10(noise_power_prb())
    # -106.43
    """
    bandwidth = n_subcarriers * scs_hz
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    return float(db_to_linear(density_dbm_hz + 10.0 * np.log10(bandwidth) + noise_figure_db))


@dataclass(frozen=True)
class LinkGain:
    gamma: complex
    eta: Optional[complex] = None


def effective_gain(H, f, d):
    """
    Effective gain of a beam pair

    Parameters
    ----------
    H : array of shape (n_rx, n_tx)
    f : array of shape (n_tx,)
        Transmit beam.
    d : array of shape (n_rx,)
        Receive beam.

    Returns
    -------
    LinkGain with gamma = d^H H f.

    Raises
    ------
    DimensionError
        If the beams do not conform to H.
    """
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    f = np.atleast_1d(np.asarray(f, dtype=complex))
    d = np.atleast_1d(np.asarray(d, dtype=complex))
    if H.shape != (d.size, f.size):
        raise DimensionError(f"channel {H.shape} does not match beams ({d.size}, {f.size})")
    return LinkGain(complex(np.conj(d) @ H @ f))


#%%

@dataclass(frozen=True)
class NcrConfig:
    """
    Network-controlled repeater amplifier

    Attributes
    ----------
    gain_db : float
        Amplification gain g.
    powered_on : bool
        An NCR that is off forwards nothing.
    max_power_dbm : float, optional
        Total output power limit; None means no saturation.
    """
    gain_db: float = 60.0
    powered_on: bool = True
    max_power_dbm: Optional[float] = None

    @property
    def gain(self):
        return float(db_to_linear(self.gain_db)) if self.powered_on else 0.0


def ncr_gain_prb(config, input_mw, forwarding):
    """
    Per-PRB NCR gain g_{s,k}

    The output power on each forwarded PRB, g times the useful input
    power, is capped at the NCR's maximum power split over the forwarded
    PRBs.

    Parameters
    ----------
    config : NcrConfig
    input_mw : array of shape (K,)
        Useful input power per PRB.
    forwarding : array of bool, shape (K,)
        PRBs the NCR is forwarding in this slot.

    Returns
    -------
    Array of shape (K,), zero on PRBs not forwarded or when off.
    """
    input_mw = np.asarray(input_mw, dtype=float)
    forwarding = np.asarray(forwarding, dtype=bool)
    gain = np.where(forwarding, config.gain, 0.0)
    n_forwarded = int(forwarding.sum())
    if config.max_power_dbm is None or n_forwarded == 0 or config.gain == 0.0:
        return gain
    cap = float(db_to_linear(config.max_power_dbm)) / n_forwarded
    with np.errstate(divide="ignore"):
        limit = np.where(input_mw > 0, cap / np.maximum(input_mw, 1e-300), np.inf)
    return np.minimum(gain, limit)


@dataclass(frozen=True)
class RisConfig:
    """
    RIS reflection coefficients

    Attributes
    ----------
    theta : array of shape (N,)
        Diagonal of Theta; every entry has unit modulus.
    phase_bits : int, optional
        Phase resolution; None for continuous phases.
    """
    theta: np.ndarray
    phase_bits: Optional[int] = None

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=complex))
        if theta.size == 0:
            raise ValueError("RIS needs at least one element")
        if not np.allclose(np.abs(theta), 1.0, atol=1e-9):
            raise ValueError("reflection coefficients must have unit modulus")
        object.__setattr__(self, "theta", theta)

    @property
    def n_elements(self):
        return self.theta.size

    @property
    def matrix(self):
        return np.diag(self.theta)


def _incident_outgoing(h_in, h_out, f, d):
    h_in = np.asarray(h_in, dtype=complex)
    h_out = np.asarray(h_out, dtype=complex)
    a = h_in if f is None else h_in @ np.asarray(f, dtype=complex)
    b = h_out if d is None else np.conj(np.asarray(d, dtype=complex)) @ h_out
    a = np.atleast_1d(a)
    b = np.atleast_1d(b)
    if a.shape != b.shape:
        raise DimensionError(f"incident {a.shape} and outgoing {b.shape} do not match")
    return a, b


def cascade_gain(h_in, h_out, theta, f=None, d=None):
    """
    RIS cascade eta = d^H H2 Theta H1 f

    Parameters
    ----------
    h_in : array of shape (N, n_tx), or (N,) incident coefficients if `f` is None
    h_out : array of shape (n_rx, N), or (N,) outgoing coefficients if `d` is None
    theta : array of shape (N,) or RisConfig
    f, d : arrays, optional
        Transmit and receive beams.
    """
    theta = theta.theta if isinstance(theta, RisConfig) else np.asarray(theta, dtype=complex)
    a, b = _incident_outgoing(h_in, h_out, f, d)
    if theta.shape != a.shape:
        raise DimensionError("theta does not match the RIS size")
    return complex(np.sum(b * theta * a))


def _quantize(phase, levels):
    step = 2.0 * np.pi / levels
    return np.exp(1j * step * np.round(phase / step))


def optimize_theta(h_in, h_out, f=None, d=None, phase_bits=None):
    """
    Reflection coefficients maximising |eta|

    Continuous phases co-phase every element: theta_n =
    exp(-j (arg a_n + arg b_n)), giving |eta| = sum |a_n b_n|.  With
    `phase_bits` the optimum over the 2^bits levels is found exactly by
    sweeping a common rotation psi over every interval in which the
    nearest-level choice of all elements is constant.

    Parameters
    ----------
    h_in, h_out, f, d
        As in `cascade_gain`.
    phase_bits : int, optional

    Returns
    -------
    RisConfig

    Raises
    ------
    ValueError
        For zero-length element vectors.

    Examples
    --------
    ris = optimize_theta(np.array([1j]), np.array([1.0]))
    cascade_gain(np.array([1j]), np.array([1.0]), ris)
    # (1+0j)
    """
    a, b = _incident_outgoing(h_in, h_out, f, d)
    if a.size == 0:
        raise ValueError("RIS needs at least one element")
    c = a * b
    target = -np.angle(c)
    if phase_bits is None:
        return RisConfig(np.exp(1j * target))

    if phase_bits < 1:
        raise ValueError("phase_bits must be at least 1")
    levels = 2 ** int(phase_bits)
    step = 2.0 * np.pi / levels
    # Rotations where some element's nearest level changes.
    edges = np.mod((np.arange(levels)[None, :] + 0.5) * step - target[:, None], 2.0 * np.pi).ravel()
    edges = np.unique(edges)
    mids = (edges + np.roll(edges, -1) + np.where(np.arange(edges.size) == edges.size - 1,
                                                  2.0 * np.pi, 0.0)) / 2.0
    candidates = np.concatenate([[0.0], mids])
    thetas = _quantize(target[None, :] + candidates[:, None], levels)
    eta = np.abs(thetas @ c)
    best = int(np.argmax(eta))
    return RisConfig(thetas[best], phase_bits)


#%%

@dataclass(frozen=True)
class Transmission:
    """
    One scheduled transmission

    Attributes
    ----------
    tx, rx : int
        Transmitting and intended receiving node ids.
    ue : int
        UE whose data is carried.
    hop : {"direct", "backhaul", "access"}
    power_mw : array of shape (K,)
        Transmit power per PRB, zero where not allocated.
    relay : int, optional
        NCR or RIS forwarding this transmission, if any.
    """
    tx: int
    rx: int
    ue: int
    hop: str
    power_mw: np.ndarray
    relay: Optional[int] = None


@dataclass
class SlotSnapshot:
    """
    Gains and transmissions of one slot

    Attributes
    ----------
    noise_mw : float
        Thermal noise per PRB.
    transmissions : list of Transmission
    gamma : dict
        (i, j) -> per-PRB complex gain from transmission i's transmitter,
        with its beam, to transmission j's receiver, with its beam.
    to_ncr : dict
        (i, s) -> per-PRB gain from transmission i's transmitter into NCR s.
    from_ncr : dict
        (s, j) -> per-PRB gain from NCR s, with the beam it forwards with on
        each PRB, to transmission j's receiver.
    ncr_gain : dict
        s -> per-PRB amplifier gain g_{s,k}, linear.
    eta : dict
        (i, j, t) -> per-PRB cascade through RIS t.
    chains : dict
        UE id -> ServingChain.
    direction : Direction
    """
    noise_mw: float
    transmissions: List[Transmission]
    gamma: Dict[Tuple[int, int], np.ndarray] = field(default_factory=dict)
    to_ncr: Dict[Tuple[int, int], np.ndarray] = field(default_factory=dict)
    from_ncr: Dict[Tuple[int, int], np.ndarray] = field(default_factory=dict)
    ncr_gain: Dict[int, np.ndarray] = field(default_factory=dict)
    eta: Dict[Tuple[int, int, int], np.ndarray] = field(default_factory=dict)
    chains: Dict = field(default_factory=dict)
    direction: Direction = Direction.DL

    @property
    def n_prbs(self):
        return len(self.transmissions[0].power_mw) if self.transmissions else 0

    def _zeros(self):
        return np.zeros(self.n_prbs, dtype=complex)

    def gain(self, i, j):
        return self.gamma.get((i, j), self._zeros())

    def ue_link(self, ue):
        """Index of the transmission between a UE and its serving node"""
        for index, transmission in enumerate(self.transmissions):
            if transmission.ue == ue and transmission.hop in ("direct", "access"):
                return index
        raise KeyError(f"UE {ue} has no scheduled transmission")


@dataclass(frozen=True)
class SinrBreakdown:
    """
    SINR components in mW and the linear SINR rho = S / (I + N)

    Components are arrays over the requested PRBs, or floats for a single PRB.
    """
    S: np.ndarray
    I: np.ndarray
    N: np.ndarray
    rho: np.ndarray
    architecture: ChainKind


def _power(values):
    return np.abs(values) ** 2


def _components(snapshot, j, serving_ncr=None, serving_ris=None):
    """Per-PRB S, I and N of transmission `j` across all PRBs"""
    own = snapshot.transmissions[j]
    sigma2 = snapshot.noise_mw

    def ncr_paths(i):
        total = np.zeros(snapshot.n_prbs)
        for s, gain in snapshot.ncr_gain.items():
            total += _power(snapshot.to_ncr.get((i, s), 0.0)) * gain \
                * _power(snapshot.from_ncr.get((s, j), 0.0))
        return total

    S = _power(snapshot.gain(j, j))
    if serving_ncr is not None:
        S = S + _power(snapshot.to_ncr.get((j, serving_ncr), 0.0)) \
            * snapshot.ncr_gain.get(serving_ncr, 0.0) \
            * _power(snapshot.from_ncr.get((serving_ncr, j), 0.0))
    if serving_ris is not None:
        S = S + _power(snapshot.eta.get((j, j, serving_ris), 0.0))
    S = S * own.power_mw

    I = np.zeros(snapshot.n_prbs)
    for i, other in enumerate(snapshot.transmissions):
        if i == j:
            continue
        I += other.power_mw * (_power(snapshot.gain(i, j)) + ncr_paths(i))
    # Other transmissions reflected by every RIS.
    for (i, target, _), eta in snapshot.eta.items():
        if target == j and i != j:
            I += snapshot.transmissions[i].power_mw * _power(eta)
    # Amplified noise of the NCRs not serving this link.
    for s, gain in snapshot.ncr_gain.items():
        if s != serving_ncr:
            I += sigma2 * _power(snapshot.from_ncr.get((s, j), 0.0)) * gain

    N = np.full(snapshot.n_prbs, sigma2)
    if serving_ncr is not None:
        N = N * (1.0 + _power(snapshot.from_ncr.get((serving_ncr, j), 0.0))
                 * snapshot.ncr_gain.get(serving_ncr, 0.0))
    return S, I, N


def _breakdown(snapshot, j, architecture, k, serving_ncr=None, serving_ris=None):
    S, I, N = _components(snapshot, j, serving_ncr, serving_ris)
    k = slice(None) if k is None else k
    S, I, N = S[k], I[k], N[k]
    return SinrBreakdown(S, I, N, S / (I + N), architecture)


def _check_chain(snapshot, ue, kind, relay, gnb=None):
    chain = snapshot.chains.get(ue)
    if chain is None or chain.kind != kind or chain.relay != relay \
            or (gnb is not None and chain.gnb != gnb):
        raise ChainMismatchError(f"UE {ue} is not served via {kind.value} "
                                 f"(relay {relay}, gNB {gnb}); chain is {chain}")


def sinr_transmission(j, snapshot, k=None):
    """
    SINR of transmission `j`, including any NCR or RIS on its chain

    Used for every hop, backhaul included.
    """
    own = snapshot.transmissions[j]
    chain = snapshot.chains.get(own.ue)
    serving_ncr = serving_ris = None
    architecture = ChainKind.DIRECT
    if own.hop == "backhaul" or (chain is not None and chain.kind == ChainKind.IAB):
        architecture = ChainKind.IAB
    elif chain is not None and chain.kind == ChainKind.NCR:
        serving_ncr, architecture = chain.relay, ChainKind.NCR
    elif chain is not None and chain.kind == ChainKind.RIS:
        serving_ris, architecture = chain.relay, ChainKind.RIS
    return _breakdown(snapshot, j, architecture, k, serving_ncr, serving_ris)


def sinr_direct(ue, gnb, snapshot, k=None):
    """
    SINR of a UE served directly by a gNB

    S = |gamma_{b,u,k}|^2 p; I sums every other scheduled transmission
    on PRB k, directly and through NCRs and RISs; N = sigma^2 plus no
    amplified noise of a serving NCR.

    Parameters
    ----------
    ue, gnb : int
    snapshot : SlotSnapshot
    k : int, array of int or None
        PRB index or indices; None for all PRBs.

    Raises
    ------
    ChainMismatchError
        If the UE is not served directly by `gnb`.
    """
    _check_chain(snapshot, ue, ChainKind.DIRECT, None, gnb)
    return _breakdown(snapshot, snapshot.ue_link(ue), ChainKind.DIRECT, k)


def sinr_iab(ue, iab, snapshot, k=None):
    """
    SINR of a UE on its IAB access link

    S = |gamma_{r,u,k}|^2 p; I sums concurrent backhaul and other access
    transmissions on PRB k; N = sigma^2.
    """
    _check_chain(snapshot, ue, ChainKind.IAB, iab)
    return _breakdown(snapshot, snapshot.ue_link(ue), ChainKind.IAB, k)


def sinr_ncr(ue, ncr, gnb, snapshot, k=None):
    """
    SINR of a UE served through an NCR

    S = p (|gamma_{b,u}|^2 + |gamma_{b,s}|^2 g_s |gamma_{s,u}|^2).
    I adds, for every other transmission, its direct signal and its copies
    amplified by every NCR, plus the thermal noise amplified by every
    NCR except the serving one.  N = sigma^2 (1 + |gamma_{s,u}|^2 g_s).
    A muted or switched-off NCR (g_s = 0) leaves the direct-link SINR.
    """
    _check_chain(snapshot, ue, ChainKind.NCR, ncr, gnb)
    return _breakdown(snapshot, snapshot.ue_link(ue), ChainKind.NCR, k, serving_ncr=ncr)


def sinr_ris(ue, ris, gnb, snapshot, k=None):
    """
    SINR of a UE served through a RIS

    S = p (|gamma_{b,u}|^2 + |eta_{b,u}|^2); I sums the direct and
    RIS-cascaded signals of every other transmission over all RISs;
    N = sigma^2.

    Raises
    ------
    ChainMismatchError
        If the UE is not served through `ris`.
    ValueError
        If the snapshot carries no cascade for the RIS (Theta not set).
    """
    _check_chain(snapshot, ue, ChainKind.RIS, ris, gnb)
    j = snapshot.ue_link(ue)
    if (j, j, ris) not in snapshot.eta:
        raise ValueError(f"RIS {ris} has no reflection configuration")
    return _breakdown(snapshot, j, ChainKind.RIS, k, serving_ris=ris)


def effective_sinr(rho):
    """
    Single SINR equivalent to a set of per-PRB SINRs

    2^{mean log2(1 + rho)} - 1, so the spectral efficiency of the
    allocation is preserved.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if rho.size == 0:
        raise ValueError("no SINR values")
    return float(2.0 ** np.mean(np.log2(1.0 + rho)) - 1.0)
