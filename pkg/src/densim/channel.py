"""
channel
-------
Link classification, large-scale losses and per-PRB small-scale channel
matrices

Classes
-------
Propagation, Visibility
    Urban macro/micro and LOS/NLOS labels of a link class.

LinkClass
    Row of the link-characteristics table for a pair of nodes.

ChannelParams
    Carrier, band and fading settings.

LargeScale
    Path loss and shadowing of one link.

ShadowingField
    Spatially correlated lognormal shadowing map.

RaySet
    Geometric rays of one node pair.

ChannelMatrix
    Channel matrix of one link on one PRB.

LargeScaleModel
    Per-pair large-scale losses of a scenario with cached shadowing fields,
    and chain received-power estimates for association.

Functions
---------
classify_link
    Link class of a node pair.

path_loss
    3GPP UMa/UMi path loss with breakpoint distance.

sample_shadowing
    One shadowing value at a position for a seeded field.

large_scale
    Path loss plus shadowing of a link.

draw_rays, evolve_rays, ray_matrix
    Create, time-evolve and realise the ray model.

ray_phases, ray_responses, ray_projection
    Per-PRB delay rotations, per-ray array responses and per-ray
    beamforming factors, for callers that cache them between slots.

beam_gain
    Effective gain d^H H f of a ray set on a set of PRBs.

small_scale
    Channel matrix of a link on one PRB.

dump_channel_trace
    Write per-link per-PRB losses and channel gains to CSV.
"""

#%%

from dataclasses import dataclass, field, replace
from enum import Enum
import logging
import math
from typing import Mapping, Optional, Tuple
import warnings

import numpy as np
import pandas as pd

# Internal imports.
from densim.antenna import (ArrayGeometry, ElementPattern, array_response,
                            element_angles, element_gain, to_local_angles)
from densim.base import ChainKind, NodeKind, ScenarioError
from densim.dutils import db_to_linear, linear_to_db, spawn_rng

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299792458.0

#%%

class Propagation(str, Enum):
    UMA = "UMa"
    UMI = "UMi"


class Visibility(str, Enum):
    LOS = "LOS"
    NLOS = "NLOS"


@dataclass(frozen=True)
class LinkClass:
    """
    Propagation class of a node pair

    Attributes
    ----------
    endpoint_kinds : tuple of str
        Sorted endpoint roles, each "gnb", "aux" (stationary IAB, NCR or RIS),
        "uav" (UAV-mounted IAB or NCR) or "ue".
    same_cell : bool
    scenario : Propagation
    visibility : Visibility
    """
    endpoint_kinds: Tuple[str, str]
    same_cell: bool
    scenario: Propagation
    visibility: Visibility

    @property
    def los(self):
        return self.visibility == Visibility.LOS


# (roles, same_cell) -> (scenario, visibility)
LINK_TABLE = {
    (("gnb", "ue"), True): (Propagation.UMA, Visibility.NLOS),
    (("aux", "gnb"), True): (Propagation.UMA, Visibility.LOS),
    (("gnb", "uav"), True): (Propagation.UMA, Visibility.LOS),
    (("aux", "ue"), True): (Propagation.UMI, Visibility.LOS),
    (("uav", "ue"), True): (Propagation.UMI, Visibility.LOS),
    (("ue", "ue"), True): (Propagation.UMI, Visibility.LOS),
    (("gnb", "ue"), False): (Propagation.UMA, Visibility.NLOS),
    (("aux", "gnb"), False): (Propagation.UMA, Visibility.NLOS),
    (("gnb", "uav"), False): (Propagation.UMA, Visibility.LOS),
    (("aux", "ue"), False): (Propagation.UMI, Visibility.NLOS),
    (("uav", "ue"), False): (Propagation.UMI, Visibility.LOS),
    (("ue", "ue"), False): (Propagation.UMI, Visibility.NLOS),
}


def node_role(node):
    """Role of a node in the link table"""
    if node.kind == NodeKind.GNB:
        return "gnb"
    if node.kind == NodeKind.UE:
        return "ue"
    return "uav" if node.mounted_on_uav else "aux"


def classify_link(a, b, same_cell, backhaul_visibility="table"):
    """
    Link class of a node pair

    Parameters
    ----------
    a, b : NodeDescriptor
    same_cell : bool
        True if both nodes belong to the same gNB's cell.
    backhaul_visibility : {"table", "los", "nlos"}, default "table"
        Forces the visibility of gNB to stationary-node links in the same
        cell, for comparing LOS and NLOS backhaul.

    Returns
    -------
    LinkClass; symmetric in (a, b).

    Raises
    ------
    ScenarioError
        For pairs the link table does not cover (gNB-gNB, relay-relay).

    Examples
    --------
    classify_link(gnb, ue, True)
    # LinkClass(('gnb', 'ue'), True, UMa, NLOS)
    """
    roles = tuple(sorted((node_role(a), node_role(b))))
    try:
        scenario, visibility = LINK_TABLE[(roles, bool(same_cell))]
    except KeyError:
        raise ScenarioError(f"no link class for {roles[0]}-{roles[1]} pairs") from None
    if roles == ("aux", "gnb") and same_cell and backhaul_visibility != "table":
        visibility = Visibility(backhaul_visibility.upper())
    return LinkClass(roles, bool(same_cell), scenario, visibility)


#%%

def _breakpoint(h_tx, h_rx, fc_ghz):
    # Effective antenna heights above a 1 m environment height.
    h_bs = max(h_tx, h_rx) - 1.0
    h_ut = min(h_tx, h_rx) - 1.0
    return 4.0 * h_bs * h_ut * fc_ghz * 1e9 / SPEED_OF_LIGHT


def path_loss(link_class, d3d, fc_ghz, h_tx, h_rx):
    """
    3GPP UMa/UMi path loss

    LOS follows the dual-slope model switching at the breakpoint distance
    d'_BP = 4 h'_BS h'_UT fc / c on the 2D distance; NLOS is the larger of
    the NLOS formula and the LOS loss.

    Parameters
    ----------
    link_class : LinkClass
    d3d : float
        3D distance in metres; values below 1 m are clamped with a warning.
    fc_ghz : float
        Carrier frequency in GHz, within [0.5, 100].
    h_tx, h_rx : float
        Antenna heights in metres.

    Returns
    -------
    Path loss in dB.

    Examples
    --------
    path_loss(uma_los, 100.0, 28.0, 25.0, 1.5)
    # 100.94
    """
    if not 0.5 <= fc_ghz <= 100.0:
        raise ValueError("carrier frequency must be within [0.5, 100] GHz")
    if d3d < 1.0:
        warnings.warn(f"link distance {d3d:.3g} m clamped to 1 m", RuntimeWarning)
        d3d = 1.0
    dh = abs(h_tx - h_rx)
    d2d = math.sqrt(max(d3d ** 2 - dh ** 2, 0.0))
    h_ut = min(h_tx, h_rx)
    log_d = math.log10(d3d)
    log_fc = math.log10(fc_ghz)
    d_bp = _breakpoint(h_tx, h_rx, fc_ghz)

    if link_class.scenario == Propagation.UMA:
        if d2d <= d_bp:
            los = 28.0 + 22.0 * log_d + 20.0 * log_fc
        else:
            los = 28.0 + 40.0 * log_d + 20.0 * log_fc - 9.0 * math.log10(d_bp ** 2 + dh ** 2)
        if link_class.los:
            return los
        nlos = 13.54 + 39.08 * log_d + 20.0 * log_fc - 0.6 * (h_ut - 1.5)
    else:
        if d2d <= d_bp:
            los = 32.4 + 21.0 * log_d + 20.0 * log_fc
        else:
            los = 32.4 + 40.0 * log_d + 20.0 * log_fc - 9.5 * math.log10(d_bp ** 2 + dh ** 2)
        if link_class.los:
            return los
        nlos = 22.4 + 35.3 * log_d + 21.3 * log_fc - 0.3 * (h_ut - 1.5)
    return max(los, nlos)


#%%

def _default_sigma():
    return {
        (Propagation.UMA, Visibility.LOS): 4.0,
        (Propagation.UMA, Visibility.NLOS): 6.0,
        (Propagation.UMI, Visibility.LOS): 4.0,
        (Propagation.UMI, Visibility.NLOS): 7.82,
    }


def _default_correlation_distance():
    return {Propagation.UMA: 37.0, Propagation.UMI: 10.0}


def _default_delay_spread():
    # Seconds, rounded from the 3GPP medians at 28 GHz.
    return {
        (Propagation.UMA, Visibility.LOS): 80e-9,
        (Propagation.UMA, Visibility.NLOS): 270e-9,
        (Propagation.UMI, Visibility.LOS): 30e-9,
        (Propagation.UMI, Visibility.NLOS): 65e-9,
    }


def _default_angle_spread():
    # (azimuth, elevation) standard deviation of ray angles, degrees.
    return {Visibility.LOS: (10.0, 3.0), Visibility.NLOS: (25.0, 8.0)}


@dataclass(frozen=True)
class ChannelParams:
    """
    Carrier, band and fading settings

    Attributes
    ----------
    carrier_ghz : float
    n_prbs : int
    prb_bandwidth_hz : float
        12 subcarriers times the subcarrier spacing.
    n_nlos_rays : int
        Random rays added to the geometric LOS ray.
    k_factor_db : float
        Ricean K-factor of LOS classes; NLOS classes are Rayleigh.
    temporal_correlation : float
        AR(1) coefficient of ray gains from one slot to the next.
    backhaul_visibility : {"table", "los", "nlos"}
    shadowing_sigma, correlation_distance, delay_spread, angle_spread : mapping
        Per-class model constants.
    n_sinusoids : int
        Terms of each shadowing field.
    """
    carrier_ghz: float = 28.0
    n_prbs: int = 66
    prb_bandwidth_hz: float = 12 * 60e3
    n_nlos_rays: int = 6
    k_factor_db: float = 10.0
    temporal_correlation: float = 0.9
    backhaul_visibility: str = "table"
    shadowing_sigma: Mapping = field(default_factory=_default_sigma)
    correlation_distance: Mapping = field(default_factory=_default_correlation_distance)
    delay_spread: Mapping = field(default_factory=_default_delay_spread)
    angle_spread: Mapping = field(default_factory=_default_angle_spread)
    n_sinusoids: int = 64

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / (self.carrier_ghz * 1e9)

    def prb_offsets(self):
        """Centre frequency of each PRB relative to the carrier, Hz"""
        return (np.arange(self.n_prbs) - (self.n_prbs - 1) / 2) * self.prb_bandwidth_hz


#%%

class ShadowingField:
    """
    Spatially correlated lognormal shadowing

    A sum of `n_sinusoids` plane waves with random directions and phases.
    Radial spatial frequencies are drawn from the spectrum of the
    exponential autocorrelation exp(-r / correlation_distance), so the
    field has that autocorrelation and is near-Gaussian with standard
    deviation `sigma`.

    Parameters
    ----------
    sigma : float
        Standard deviation in dB.
    correlation_distance : float
        Distance in metres at which the correlation falls to 1/e.
    rng : numpy.random.Generator
    n_sinusoids : int, default 64

    Examples
    --------
    field = ShadowingField(4.0, 37.0, spawn_rng(1, "shadowing"))
    field([[0, 0], [10, 0]])
    """

    def __init__(self, sigma, correlation_distance, rng, n_sinusoids=64):
        if sigma < 0:
            raise ValueError("shadowing sigma must be non-negative")
        if correlation_distance <= 0:
            raise ValueError("correlation distance must be positive")
        self.sigma = float(sigma)
        self.correlation_distance = float(correlation_distance)
        uniform = rng.uniform(size=n_sinusoids)
        radius = np.sqrt((1.0 - uniform) ** -2 - 1.0) / self.correlation_distance
        angle = rng.uniform(0.0, 2.0 * np.pi, size=n_sinusoids)
        self._wave = radius[:, None] * np.column_stack([np.cos(angle), np.sin(angle)])
        self._phase = rng.uniform(0.0, 2.0 * np.pi, size=n_sinusoids)
        self._amplitude = self.sigma * np.sqrt(2.0 / n_sinusoids)

    def __call__(self, position):
        """Shadowing in dB at (x, y[, z]) positions; z is ignored"""
        position = np.asarray(position, dtype=float)
        xy = np.atleast_2d(position)[:, :2]
        values = self._amplitude * np.cos(xy @ self._wave.T + self._phase).sum(axis=1)
        return float(values[0]) if position.ndim == 1 else values


def sample_shadowing(link_class, position, seed, params=None, sigma=None,
                     correlation_distance=None):
    """
    Shadowing in dB at `position` for the field of `seed`

    The same seed always gives the same field, so positions along a
    trajectory are correlated with the class's correlation distance.
    `sigma` and `correlation_distance` override the class defaults.

    Examples
    --------
    sample_shadowing(uma_los, (0, 0, 1.5), seed=3, sigma=0.0)
    # 0.0
    """
    params = params or ChannelParams()
    key = (link_class.scenario, link_class.visibility)
    sigma = params.shadowing_sigma[key] if sigma is None else sigma
    if correlation_distance is None:
        correlation_distance = params.correlation_distance[link_class.scenario]
    field_ = ShadowingField(sigma, correlation_distance, spawn_rng(seed, "shadowing"),
                            params.n_sinusoids)
    return field_(np.asarray(position, dtype=float)[:2])


@dataclass(frozen=True)
class LargeScale:
    path_loss: float
    shadowing: float = 0.0

    @property
    def total_loss(self):
        return self.path_loss + self.shadowing


def large_scale(link_class, pos_a, pos_b, params=None, field=None, at=None):
    """
    Path loss plus shadowing between two positions

    Parameters
    ----------
    link_class : LinkClass
    pos_a, pos_b : array of shape (3,)
    params : ChannelParams, optional
    field : ShadowingField, optional
        Shadowing is zero without a field.
    at : array, optional
        Where to evaluate the field; defaults to `pos_b`.

    Returns
    -------
    LargeScale
    """
    params = params or ChannelParams()
    pos_a = np.asarray(pos_a, dtype=float)
    pos_b = np.asarray(pos_b, dtype=float)
    d3d = float(np.linalg.norm(pos_b - pos_a))
    loss = path_loss(link_class, d3d, params.carrier_ghz, pos_a[2], pos_b[2])
    shadow = 0.0 if field is None else field(pos_b if at is None else np.asarray(at))
    return LargeScale(loss, shadow)


#%%

@dataclass(frozen=True)
class RaySet:
    """
    Rays between endpoints A and B of a node pair

    Attributes
    ----------
    departure : array of shape (L, 3)
        Global unit direction of each ray leaving A.
    arrival : array of shape (L, 3)
        Global unit direction from B back along each ray.
    delays : array of shape (L,)
        Excess delay in seconds.
    gains : array of shape (L,)
        Complex ray amplitudes; sum of expected powers is 1.
    powers : array of shape (L,)
        Expected power of each ray.
    los : array of bool, shape (L,)
        True for the deterministic geometric ray.
    """
    departure: np.ndarray
    arrival: np.ndarray
    delays: np.ndarray
    gains: np.ndarray
    powers: np.ndarray
    los: np.ndarray

    @property
    def n_rays(self):
        return len(self.gains)


def _perturb(direction, az_spread, el_spread, rng, size):
    az = np.degrees(np.arctan2(direction[1], direction[0]))
    el = np.degrees(np.arcsin(np.clip(direction[2], -1.0, 1.0)))
    az = np.radians(az + rng.normal(0.0, az_spread, size))
    el = np.radians(np.clip(el + rng.normal(0.0, el_spread, size), -89.0, 89.0))
    return np.column_stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])


def draw_rays(link_class, pos_a, pos_b, rng, params=None):
    """
    Draw the rays of a link

    LOS classes get a geometric ray carrying K/(K+1) of the power (all of
    it without random rays) plus `n_nlos_rays` random rays sharing the
    rest.  NLOS classes get random rays only.  Random rays scatter around
    the geometric direction at both ends, with exponential excess delays.

    Parameters
    ----------
    link_class : LinkClass
    pos_a, pos_b : array of shape (3,)
    rng : numpy.random.Generator
    params : ChannelParams, optional

    Returns
    -------
    RaySet
    """
    params = params or ChannelParams()
    pos_a = np.asarray(pos_a, dtype=float)
    pos_b = np.asarray(pos_b, dtype=float)
    offset = pos_b - pos_a
    distance = max(float(np.linalg.norm(offset)), 1e-9)
    forward = offset / distance

    n_random = params.n_nlos_rays
    if not link_class.los and n_random < 1:
        raise ValueError("NLOS links need at least one random ray")
    key = (link_class.scenario, link_class.visibility)
    az_spread, el_spread = params.angle_spread[link_class.visibility]

    departure = [forward[None, :]] if link_class.los else []
    arrival = [-forward[None, :]] if link_class.los else []
    if n_random:
        departure.append(_perturb(forward, az_spread, el_spread, rng, n_random))
        arrival.append(_perturb(-forward, az_spread, el_spread, rng, n_random))

    if link_class.los:
        k = float(db_to_linear(params.k_factor_db))
        los_power = k / (k + 1.0) if n_random else 1.0
        powers = np.concatenate([[los_power], np.full(n_random, (1.0 - los_power) / max(n_random, 1))])
        los_phase = np.exp(-2j * np.pi * distance / params.wavelength)
        random_gains = (rng.normal(size=n_random) + 1j * rng.normal(size=n_random)) / np.sqrt(2)
        gains = np.concatenate([[np.sqrt(los_power) * los_phase],
                                np.sqrt(powers[1:]) * random_gains])
        delays = np.concatenate([[0.0], rng.exponential(params.delay_spread[key], n_random)])
        los = np.arange(n_random + 1) == 0
    else:
        powers = np.full(n_random, 1.0 / n_random)
        gains = np.sqrt(powers) * (rng.normal(size=n_random)
                                   + 1j * rng.normal(size=n_random)) / np.sqrt(2)
        delays = rng.exponential(params.delay_spread[key], n_random)
        los = np.zeros(n_random, dtype=bool)

    return RaySet(np.vstack(departure), np.vstack(arrival), delays, gains, powers, los)


def evolve_rays(rays, rng, rho):
    """
    Advance random ray gains by one slot

    g <- rho g + sqrt(1 - rho^2) w with w complex Gaussian of the ray's
    power; the geometric ray is unchanged.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError("temporal correlation must be within [0, 1]")
    random = ~rays.los
    n_random = int(random.sum())
    if n_random == 0 or rho == 1.0:
        return rays
    innovation = (rng.normal(size=n_random) + 1j * rng.normal(size=n_random)) / np.sqrt(2)
    gains = rays.gains.copy()
    gains[random] = rho * gains[random] + np.sqrt(1.0 - rho ** 2) * np.sqrt(rays.powers[random]) * innovation
    return replace(rays, gains=gains)


def _endpoint_response(array, directions, pattern):
    az, el = to_local_angles(array, directions)
    response = array_response(array, az, el)
    if pattern is None:
        return response
    amplitude = np.sqrt(db_to_linear(element_gain(pattern, *element_angles(az, el))))
    return response * amplitude[:, None]


def ray_phases(rays, params, prbs=None):
    """Per-PRB delay rotation exp(-j 2 pi f_k tau_l), shape (K, L)"""
    offsets = params.prb_offsets()
    if prbs is not None:
        offsets = offsets[np.atleast_1d(prbs)]
    return np.exp(-2j * np.pi * offsets[:, None] * rays.delays[None, :])


def _ray_coefficients(rays, prbs, params):
    return rays.gains[None, :] * ray_phases(rays, params, prbs)


def ray_responses(rays, array, endpoint, pattern=None):
    """
    Per-ray array responses at one endpoint, shape (L, n_elements)

    `endpoint` is "a" (rays leave along `departure`) or "b" (rays arrive
    from `arrival`).
    """
    directions = rays.departure if endpoint == "a" else rays.arrival
    return _endpoint_response(array, directions, pattern)


def ray_projection(rays, tx_array, rx_array, f, d, reverse=False,
                   tx_pattern=None, rx_pattern=None):
    """
    Per-ray beamforming factors (d^H a_rx,l)(a_tx,l^H f), shape (L,)

    `beam_gain` on PRB k is sum_l g_l phase_{k,l} projection_l.
    """
    if reverse:
        return ray_projection(rays, rx_array, tx_array, np.conj(d), np.conj(f),
                              tx_pattern=rx_pattern, rx_pattern=tx_pattern)
    a_tx = _endpoint_response(tx_array, rays.departure, tx_pattern)
    a_rx = _endpoint_response(rx_array, rays.arrival, rx_pattern)
    return (a_rx @ np.conj(d)) * (a_tx.conj() @ f)


def ray_matrix(rays, tx_array, rx_array, prbs, params=None, reverse=False,
               tx_pattern=None, rx_pattern=None):
    """
    Channel matrices of a ray set

    H_k = sum_l c_{k,l} a_rx(l) a_tx(l)^H with c_{k,l} = g_l exp(-j 2 pi f_k tau_l)
    and un-normalised array responses, so E ||H||_F^2 = n_rx n_tx.

    Parameters
    ----------
    rays : RaySet
    tx_array, rx_array : ArrayGeometry
    prbs : int or array of int
    params : ChannelParams, optional
    reverse : bool, default False
        If True the transmitter is endpoint B, and the result is the
        transpose of the A-to-B matrix.
    tx_pattern, rx_pattern : ElementPattern, optional
        Element patterns weighting each ray; None means unit gain.

    Returns
    -------
    Complex array of shape (n_rx, n_tx) for a scalar PRB, else
    (n_prbs, n_rx, n_tx).
    """
    params = params or ChannelParams()
    if reverse:
        forward = ray_matrix(rays, rx_array, tx_array, prbs, params,
                             tx_pattern=rx_pattern, rx_pattern=tx_pattern)
        return np.swapaxes(forward, -1, -2)
    a_tx = _endpoint_response(tx_array, rays.departure, tx_pattern)
    a_rx = _endpoint_response(rx_array, rays.arrival, rx_pattern)
    coeff = _ray_coefficients(rays, prbs, params)
    H = np.einsum("kl,lr,lt->krt", coeff, a_rx, a_tx.conj())
    return H[0] if np.ndim(prbs) == 0 else H


def beam_gain(rays, tx_array, rx_array, f, d, prbs, params=None, reverse=False,
              tx_pattern=None, rx_pattern=None):
    """
    Effective gain d^H H_k f on each PRB without forming H

    Returns
    -------
    Complex array of shape (len(prbs),).
    """
    params = params or ChannelParams()
    # For reverse links d^H H^T f = f^T H d*.
    projection = ray_projection(rays, tx_array, rx_array, f, d, reverse, tx_pattern, rx_pattern)
    return _ray_coefficients(rays, np.atleast_1d(prbs), params) @ projection


@dataclass(frozen=True)
class LinkGeometry:
    tx_position: Tuple[float, float, float]
    rx_position: Tuple[float, float, float]


@dataclass(frozen=True)
class ChannelMatrix:
    link_id: Tuple
    prb_index: int
    matrix: np.ndarray
    large_scale: Optional[LargeScale] = None


def small_scale(link_class, tx_array, rx_array, geometry, prb, seed, params=None,
                tx_pattern=None, rx_pattern=None, link_id=None):
    """
    Channel matrix of a link on one PRB

    Rays are drawn for the pair in a canonical endpoint order, so swapping
    transmitter and receiver (with their arrays) gives the transpose.

    Parameters
    ----------
    link_class : LinkClass
    tx_array, rx_array : ArrayGeometry
    geometry : LinkGeometry
    prb : int
        PRB index within [0, n_prbs).
    seed : int
    params : ChannelParams, optional

    Returns
    -------
    ChannelMatrix

    Examples
    --------
    H = small_scale(cls, ArrayGeometry(), ArrayGeometry(), geom, 0, seed=1)
    """
    params = params or ChannelParams()
    if not 0 <= prb < params.n_prbs:
        raise ValueError(f"PRB index must be within [0, {params.n_prbs})")
    tx = tuple(float(v) for v in geometry.tx_position)
    rx = tuple(float(v) for v in geometry.rx_position)
    reverse = rx < tx
    pos_a, pos_b = (rx, tx) if reverse else (tx, rx)
    rays = draw_rays(link_class, pos_a, pos_b, spawn_rng(seed, "small_scale"), params)
    H = ray_matrix(rays, tx_array, rx_array, prb, params, reverse, tx_pattern, rx_pattern)
    return ChannelMatrix(link_id if link_id is not None else (tx, rx), prb, H)


#%%

class LargeScaleModel:
    """
    Large-scale losses between the nodes of a scenario

    Shadowing fields are created on first use per node pair and class,
    from the run seed, and evaluated at the higher-id endpoint's position,
    so static pairs keep a constant shadowing value.

    Parameters
    ----------
    params : ChannelParams
    seed : int
    patterns : mapping of NodeKind to ElementPattern, optional
        Element patterns for antenna gains in received-power estimates.
    """

    def __init__(self, params, seed, patterns=None):
        self.params = params
        self.seed = seed
        self.patterns = patterns or {}
        self._fields = {}

    def link_class(self, a, b):
        return classify_link(a, b, a.cell == b.cell, self.params.backhaul_visibility)

    def field_for(self, a, b, link_class):
        low, high = sorted((a.id, b.id))
        key = (low, high, link_class.scenario, link_class.visibility)
        if key not in self._fields:
            sigma = self.params.shadowing_sigma[(link_class.scenario, link_class.visibility)]
            corr = self.params.correlation_distance[link_class.scenario]
            self._fields[key] = ShadowingField(sigma, corr, spawn_rng(self.seed, "shadowing", low, high),
                                               self.params.n_sinusoids)
        return self._fields[key]

    def loss(self, a, b, link_class=None):
        """LargeScale between nodes `a` and `b`"""
        link_class = link_class or self.link_class(a, b)
        at = (a if a.id > b.id else b).xyz
        return large_scale(link_class, a.xyz, b.xyz, self.params,
                           self.field_for(a, b, link_class), at)

    def loss_db(self, a, b, link_class=None):
        return self.loss(a, b, link_class).total_loss

    def antenna_gain(self, node, toward):
        """Best panel gain of `node` toward node `toward`, dBi, including array gain"""
        pattern = self.patterns.get(node.kind, ElementPattern.isotropic()
                                    if node.kind == NodeKind.UE else ElementPattern())
        direction = toward.xyz - node.xyz
        best = -np.inf
        for panel in node.panels:
            az, el = to_local_angles(panel, direction)
            gain = float(element_gain(pattern, *element_angles(az, el))[0])
            best = max(best, gain + 10.0 * math.log10(panel.n_elements))
        return best

    def element_gain_toward(self, node, toward):
        """Best single-element gain of `node` toward `toward`, dBi"""
        return self.antenna_gain(node, toward) - 10.0 * math.log10(node.panels[0].n_elements)

    def _hop_dbm(self, power_dbm, tx, rx, same_cell=None):
        link_class = self.link_class(tx, rx) if same_cell is None else \
            classify_link(tx, rx, same_cell, self.params.backhaul_visibility)
        return (power_dbm + self.antenna_gain(tx, rx)
                - self.loss_db(tx, rx, link_class) + self.antenna_gain(rx, tx))

    def chain_rsrp(self, state, ue_id, chain, ncr_gain_db=60.0, ncr_max_power_dbm=None):
        """
        Wideband received power at a UE through a candidate chain, dBm

        Direct and IAB chains use the last hop only; NCR and RIS chains add
        the forwarded or reflected path to the direct path as powers.  The
        UE is taken to be in the chain's cell.
        """
        ue = state.node(ue_id)
        gnb = state.node(chain.gnb)
        ue_in_cell = replace(ue, cell=chain.gnb)
        direct = self._hop_dbm(gnb.tx_power_dbm, gnb, ue_in_cell)
        if chain.kind == ChainKind.DIRECT:
            return direct
        relay = state.node(chain.relay)
        if chain.kind == ChainKind.IAB:
            return self._hop_dbm(relay.tx_power_dbm, relay, ue_in_cell)
        if chain.kind == ChainKind.NCR:
            received = self._hop_dbm(gnb.tx_power_dbm, gnb, relay)
            cap = relay.tx_power_dbm if ncr_max_power_dbm is None else ncr_max_power_dbm
            forwarded = min(received + ncr_gain_db, cap)
            relayed = self._hop_dbm(forwarded, relay, ue_in_cell)
        else:
            n = relay.panels[0].n_elements
            incident = (gnb.tx_power_dbm + self.antenna_gain(gnb, relay)
                        - self.loss_db(gnb, relay) + self.element_gain_toward(relay, gnb))
            relayed = (incident + self.element_gain_toward(relay, ue_in_cell)
                       + 20.0 * math.log10(n)
                       - self.loss_db(relay, ue_in_cell) + self.antenna_gain(ue_in_cell, relay))
        return float(linear_to_db(db_to_linear(direct) + db_to_linear(relayed)))


#%%

def dump_channel_trace(records, path):
    """
    Write a channel trace CSV

    Parameters
    ----------
    records : iterable of tuple
        (slot, link_id, prb, loss_dB, |h|^2) rows.
    path : str or Path
    """
    frame = pd.DataFrame.from_records(
        list(records), columns=["slot", "link_id", "prb", "loss_dB", "gain_abs2"])
    frame.to_csv(path, index=False)
    logger.info("wrote %d channel trace rows to %s", len(frame), path)
    return frame
