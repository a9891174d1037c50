"""
Unit tests for densim.antenna
"""

import numpy as np
import pytest

from densim.antenna import (ArrayGeometry, ElementPattern, array_response,
                            beam_pair_indices, codebook_angles, element_gain,
                            make_codebook, select_beam_pair, steering_vector,
                            to_local_angles)
from densim.base import DimensionError


@pytest.mark.parametrize("theta, phi, expected", [
    (90, 0, 8.0),
    (90, 65, -4.0),
    (90, 180, -22.0),
])
def test_element_gain_examples(theta, phi, expected):
    assert element_gain(ElementPattern(), theta, phi) == pytest.approx(expected)


def test_element_gain_range_and_symmetry():
    rng = np.random.default_rng(0)
    theta = rng.uniform(0, 180, 10000)
    phi = rng.uniform(-180, 180, 10000)
    pattern = ElementPattern()
    gain = element_gain(pattern, theta, phi)
    assert np.all(gain <= 8.0 + 1e-12)
    assert np.all(gain >= -22.0 - 1e-12)
    np.testing.assert_allclose(gain, element_gain(pattern, theta, -phi))
    np.testing.assert_allclose(gain, element_gain(pattern, 180 - theta, phi))


def test_ue_pattern_is_flat():
    gain = element_gain(ElementPattern.isotropic(), [0, 45, 180], [-180, 10, 90])
    np.testing.assert_array_equal(gain, 0.0)


@pytest.mark.parametrize("theta, phi", [(-1, 0), (181, 0), (90, 181), (90, -181)])
def test_element_gain_rejects_bad_angles(theta, phi):
    with pytest.raises(ValueError):
        element_gain(ElementPattern(), theta, phi)


def test_array_geometry_rejects_empty():
    with pytest.raises(ValueError):
        ArrayGeometry(0, 4)


#%%

def test_steering_vector_examples():
    np.testing.assert_allclose(steering_vector(ArrayGeometry(1, 1), 20, 10), [1.0])
    np.testing.assert_allclose(steering_vector(ArrayGeometry(2, 1), 0, 0),
                               [1 / np.sqrt(2), 1 / np.sqrt(2)])


def test_steering_vector_array_gain():
    array = ArrayGeometry(8, 8)
    w = steering_vector(array, 30, 0)
    assert np.linalg.norm(w) == pytest.approx(1.0, abs=1e-12)
    assert abs(np.vdot(w, w)) == pytest.approx(1.0)
    a = array_response(array, 30, 0)[0]
    assert abs(np.vdot(w, a)) ** 2 == pytest.approx(64)


def test_array_gain_grows_with_elements():
    gains = []
    for n in (1, 2, 4, 8):
        array = ArrayGeometry(n, n)
        w = steering_vector(array, 15, -5)
        gains.append(abs(np.vdot(w, array_response(array, 15, -5)[0])) ** 2)
    np.testing.assert_allclose(gains, [1, 4, 16, 64])
    assert np.all(np.diff(gains) >= 0)


def test_local_angles_of_boresight():
    array = ArrayGeometry(4, 4, boresight_az=90, boresight_el=-10)
    direction = [0, np.cos(np.radians(10)), -np.sin(np.radians(10))]
    az, el = to_local_angles(array, direction)
    assert az[0] == pytest.approx(0, abs=1e-9)
    assert el[0] == pytest.approx(0, abs=1e-9)


#%%

def test_codebook_shapes_and_norms():
    single = make_codebook(ArrayGeometry(4, 4), 1, 1)
    assert single.shape == (1, 16)
    np.testing.assert_allclose(single[0], steering_vector(ArrayGeometry(4, 4), 0, 0))

    book = make_codebook(ArrayGeometry(8, 8), 8, 4)
    assert book.shape == (32, 64)
    np.testing.assert_allclose(np.linalg.norm(book, axis=1), 1.0, atol=1e-12)


def test_codebook_spacing_and_symmetry():
    az, el = codebook_angles(8, 4)
    np.testing.assert_allclose(np.diff(np.unique(az)), 120.0 / 8)
    assert set(np.round(az, 9)) == set(np.round(-az, 9))
    assert set(np.round(el, 9)) == set(np.round(-el, 9))


def test_codebook_rejects_zero_counts():
    with pytest.raises(ValueError):
        make_codebook(ArrayGeometry(2, 2), 0, 4)


def test_matched_rank_one_channel():
    tx_book = make_codebook(ArrayGeometry(4, 4), 4, 2)
    rx_book = make_codebook(ArrayGeometry(2, 2), 4, 2)
    H = np.outer(rx_book[5], tx_book[3].conj())
    f, d = select_beam_pair(H, tx_book, rx_book)
    np.testing.assert_allclose(f, tx_book[3])
    np.testing.assert_allclose(d, rx_book[5])


def test_beam_pair_is_exhaustive_maximum():
    rng = np.random.default_rng(11)
    tx_book = make_codebook(ArrayGeometry(2, 2), 3, 2)
    rx_book = make_codebook(ArrayGeometry(2, 1), 2, 2)
    for _ in range(200):
        H = rng.normal(size=(2, 4)) + 1j * rng.normal(size=(2, 4))
        ti, ri, gain = beam_pair_indices(H, tx_book, rx_book)
        brute = max(abs(np.vdot(d, H @ f)) for f in tx_book for d in rx_book)
        assert gain == pytest.approx(brute)
        assert abs(np.vdot(rx_book[ri], H @ tx_book[ti])) == pytest.approx(brute)


def test_zero_channel_picks_first_pair():
    ti, ri, gain = beam_pair_indices(np.zeros((4, 16)), make_codebook(ArrayGeometry(4, 4), 2, 2),
                                     make_codebook(ArrayGeometry(2, 2), 2, 2))
    assert (ti, ri, gain) == (0, 0, 0.0)


def test_beam_pair_dimension_mismatch():
    with pytest.raises(DimensionError):
        select_beam_pair(np.ones((4, 16)), make_codebook(ArrayGeometry(2, 2), 2, 2),
                         make_codebook(ArrayGeometry(2, 2), 2, 2))
