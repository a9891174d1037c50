"""
antenna
-------
Antenna element patterns, uniform rectangular arrays, beam codebooks and
beam-pair selection

Classes
-------
ElementPattern
    3GPP 3D element pattern parameters (or an omni element).

ArrayGeometry
    Uniform rectangular array (URA) panel with a boresight orientation.

Functions
---------
element_gain
    Element gain in dBi toward zenith/azimuth angles in the element frame.

to_local_angles
    Global direction vectors to local azimuth/elevation of a panel.

element_angles
    Local azimuth/elevation to the (theta, phi) of `element_gain`.

array_response
    Un-normalised URA response toward local angles.

steering_vector
    Unit-norm URA steering vector.

make_codebook
    Uniform grid of steering vectors over a panel's sector.

beam_pair_indices
    Indices and gain of the best (transmit, receive) codebook pair.

select_beam_pair
    Transmit and receive beam vectors maximising |d^H H f|.
"""

#%%

from dataclasses import dataclass

import numpy as np

# Internal imports.
from densim.base import DimensionError

#%%

@dataclass(frozen=True)
class ElementPattern:
    """
    Antenna element radiation pattern

    Attributes
    ----------
    max_gain : float
        Maximum directional gain (dBi).
    half_power_beamwidth : float
        3 dB beamwidth in both planes (degrees).
    sidelobe_floor : float
        Front-to-back attenuation limit A_m (dB).
    vertical_sidelobe_limit : float
        Vertical sidelobe attenuation limit SLA_V (dB).
    omni : bool
        If True the element radiates `max_gain` in every direction.
    """
    max_gain: float = 8.0
    half_power_beamwidth: float = 65.0
    sidelobe_floor: float = 30.0
    vertical_sidelobe_limit: float = 30.0
    omni: bool = False

    @classmethod
    def infrastructure(cls, max_gain=8.0):
        """3GPP 3D pattern used by gNB, IAB, NCR and RIS panels"""
        return cls(max_gain=max_gain)

    @classmethod
    def isotropic(cls, max_gain=0.0):
        """Omni element used by UEs"""
        return cls(max_gain=max_gain, omni=True)


def element_gain(pattern, theta, phi):
    """
    Element gain toward (theta, phi)

    A(theta, phi) = G_max - min{-(A_V(theta) + A_H(phi)), A_m}, with
    A_V = -min[12 ((theta - 90)/theta_3dB)^2, SLA_V] and
    A_H = -min[12 (phi/phi_3dB)^2, A_m].

    Parameters
    ----------
    pattern : ElementPattern
    theta : float or array
        Zenith angle in degrees, 0 (up) to 180 (down); 90 is boresight.
    phi : float or array
        Azimuth in degrees, -180 to 180; 0 is boresight.

    Returns
    -------
    Gain in dBi, same shape as the broadcast angles.

    Raises
    ------
    ValueError
        If an angle is out of range.

    Examples
    --------
    element_gain(ElementPattern(), 90, 65)
    # -4.0
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    eps = 1e-9
    if np.any((theta < -eps) | (theta > 180 + eps)):
        raise ValueError("theta must be within [0, 180] degrees")
    if np.any((phi < -180 - eps) | (phi > 180 + eps)):
        raise ValueError("phi must be within [-180, 180] degrees")

    if pattern.omni:
        return np.full(np.broadcast(theta, phi).shape, float(pattern.max_gain))

    a_v = -np.minimum(12.0 * ((theta - 90.0) / pattern.half_power_beamwidth) ** 2,
                      pattern.vertical_sidelobe_limit)
    a_h = -np.minimum(12.0 * (phi / pattern.half_power_beamwidth) ** 2,
                      pattern.sidelobe_floor)
    return pattern.max_gain - np.minimum(-(a_v + a_h), pattern.sidelobe_floor)


#%%

@dataclass(frozen=True)
class ArrayGeometry:
    """
    Uniform rectangular array panel

    Attributes
    ----------
    n_rows, n_cols : int
        Elements along the vertical and horizontal panel axes.
    element_spacing : float
        Spacing in wavelengths.
    boresight_az : float
        Boresight azimuth in degrees, counter-clockwise from +x.
    boresight_el : float
        Boresight elevation in degrees; negative values tilt the panel down.
    """
    n_rows: int = 1
    n_cols: int = 1
    element_spacing: float = 0.5
    boresight_az: float = 0.0
    boresight_el: float = 0.0

    def __post_init__(self):
        if self.n_rows < 1 or self.n_cols < 1:
            raise ValueError("array needs at least one row and one column")
        if self.element_spacing <= 0:
            raise ValueError("element spacing must be positive")

    @property
    def n_elements(self):
        return self.n_rows * self.n_cols

    def pointed(self, azimuth, elevation=None):
        """Copy of this panel with another boresight"""
        return ArrayGeometry(self.n_rows, self.n_cols, self.element_spacing,
                             float(azimuth),
                             self.boresight_el if elevation is None else float(elevation))

    def frame(self):
        """
        Panel axes as rows of a 3x3 matrix

        Rows are the boresight, the horizontal panel axis and the
        vertical panel axis, in global coordinates.
        """
        az = np.radians(self.boresight_az)
        el = np.radians(self.boresight_el)
        x_axis = np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])
        y_axis = np.array([-np.sin(az), np.cos(az), 0.0])
        z_axis = np.cross(x_axis, y_axis)
        return np.vstack([x_axis, y_axis, z_axis])


def to_local_angles(array, direction):
    """
    Local azimuth and elevation of global direction vectors

    Parameters
    ----------
    array : ArrayGeometry
        Panel whose boresight defines the local frame.
    direction : array of shape (3,) or (L, 3)
        Direction vectors (need not be normalised).

    Returns
    -------
    Tuple (az, el) of arrays in degrees.
    """
    direction = np.atleast_2d(np.asarray(direction, dtype=float))
    norms = np.linalg.norm(direction, axis=1, keepdims=True)
    unit = direction / np.where(norms > 0, norms, 1.0)
    local = unit @ array.frame().T
    az = np.degrees(np.arctan2(local[:, 1], local[:, 0]))
    el = np.degrees(np.arcsin(np.clip(local[:, 2], -1.0, 1.0)))
    return az, el


def element_angles(az, el):
    """Element-pattern (theta, phi) from local azimuth and elevation"""
    return 90.0 - np.asarray(el, dtype=float), np.asarray(az, dtype=float)


def array_response(array, az, el):
    """
    Un-normalised URA response toward local angles

    Element (r, c), flattened row-major, has phase
    2 pi spacing (r sin(el) + c cos(el) sin(az)).

    Parameters
    ----------
    array : ArrayGeometry
    az, el : float or array of shape (L,)
        Local angles in degrees.

    Returns
    -------
    Complex array of shape (L, n_rows * n_cols) with unit-modulus entries.
    """
    az = np.radians(np.atleast_1d(np.asarray(az, dtype=float)))
    el = np.radians(np.atleast_1d(np.asarray(el, dtype=float)))
    rows = np.arange(array.n_rows)
    cols = np.arange(array.n_cols)
    vertical = np.sin(el)[:, None, None] * rows[None, :, None]
    horizontal = (np.cos(el) * np.sin(az))[:, None, None] * cols[None, None, :]
    phase = 2.0 * np.pi * array.element_spacing * (vertical + horizontal)
    return np.exp(1j * phase).reshape(len(az), array.n_elements)


def steering_vector(array, az, el):
    """
    Unit-norm steering vector toward local (az, el)

    Examples
    --------
    steering_vector(ArrayGeometry(2, 1), 0, 0)
    # array([0.70710678+0.j, 0.70710678+0.j])
    """
    response = array_response(array, az, el)[0]
    return response / np.sqrt(array.n_elements)


def codebook_angles(n_az, n_el, az_span=120.0, el_span=60.0):
    """
    Beam directions of a uniform codebook grid

    Grids are centred on boresight, so the set of beams is symmetric
    under (az, el) -> (-az, -el).  Azimuth varies fastest.

    Returns
    -------
    Tuple (az, el) of arrays of length n_az * n_el, in degrees.
    """
    if n_az < 1 or n_el < 1:
        raise ValueError("codebook needs at least one azimuth and one elevation")
    az_grid = -az_span / 2 + az_span * (np.arange(n_az) + 0.5) / n_az
    el_grid = -el_span / 2 + el_span * (np.arange(n_el) + 0.5) / n_el
    az, el = np.meshgrid(az_grid, el_grid)
    return az.ravel(), el.ravel()


def make_codebook(array, n_az, n_el, az_span=120.0, el_span=60.0):
    """
    Uniform grid of steering vectors covering a panel's sector

    Parameters
    ----------
    array : ArrayGeometry
    n_az, n_el : int
        Beams across azimuth and elevation.
    az_span : float, default 120
        Azimuth sector of the panel; adjacent beams are az_span/n_az apart.
    el_span : float, default 60
        Elevation sector.

    Returns
    -------
    Complex array of shape (n_az * n_el, n_elements); each row is a
    unit-norm beam vector.

    Raises
    ------
    ValueError
        If either count is zero.
    """
    az, el = codebook_angles(n_az, n_el, az_span, el_span)
    return array_response(array, az, el) / np.sqrt(array.n_elements)


#%%

def _as_codebook(codebook, size, name):
    codebook = np.atleast_2d(np.asarray(codebook, dtype=complex))
    if codebook.shape[1] != size:
        raise DimensionError(
            f"{name} codebook beams have {codebook.shape[1]} weights, channel needs {size}")
    return codebook


def beam_pair_indices(H, tx_codebook, rx_codebook):
    """
    Best (transmit, receive) pair of codebook beams

    Ties go to the lowest transmit index, then the lowest receive index.

    Parameters
    ----------
    H : array of shape (n_rx, n_tx)
        Channel matrix.
    tx_codebook : array of shape (B_tx, n_tx)
    rx_codebook : array of shape (B_rx, n_rx)

    Returns
    -------
    Tuple (tx_index, rx_index, gain) where gain = |d^H H f|.
    """
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    n_rx, n_tx = H.shape
    tx_codebook = _as_codebook(tx_codebook, n_tx, "transmit")
    rx_codebook = _as_codebook(rx_codebook, n_rx, "receive")

    # gains[i, j] = |d_j^H H f_i|.
    gains = np.abs(tx_codebook @ H.T @ rx_codebook.conj().T)
    flat = int(np.argmax(gains))
    tx_index, rx_index = divmod(flat, gains.shape[1])
    return tx_index, rx_index, float(gains[tx_index, rx_index])


def select_beam_pair(H, tx_codebook, rx_codebook):
    """
    Transmit and receive beams maximising |d^H H f|

    Returns
    -------
    Tuple (f, d) of unit-norm beam vectors.

    Raises
    ------
    DimensionError
        If the codebooks do not match the channel dimensions.

    Examples
    --------
    array = ArrayGeometry(4, 4)
    book = make_codebook(array, 8, 4)
    H = np.outer(book[3], book[5].conj())
    f, d = select_beam_pair(H, book, book)
    # f is book[5], d is book[3]
    """
    tx_index, rx_index, _ = beam_pair_indices(H, tx_codebook, rx_codebook)
    tx_codebook = np.atleast_2d(np.asarray(tx_codebook, dtype=complex))
    rx_codebook = np.atleast_2d(np.asarray(rx_codebook, dtype=complex))
    return tx_codebook[tx_index], rx_codebook[rx_index]
