"""
dutils
---------
Unit conversion and small numeric helpers

Functions
---------
db_to_linear, linear_to_db
    Power ratio conversions.

dbm_to_mw, mw_to_dbm
    Absolute power conversions.

kmh_to_mps
    Speed conversion.

wrap_degrees
    Wrap angles to [-180, 180).

spawn_rng
    Independent random generator for a named stream of a seeded run.
"""

#%%

import zlib

import numpy as np

#%%

def db_to_linear(value_db):
    """
    Power ratio in linear units from decibels

    Examples
    --------
    db_to_linear(30)
    # 1000.0
    """
    return np.power(10.0, np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value, floor=1e-300):
    """
    Power ratio in decibels

    Values below `floor` are clipped to it so zero power gives a very
    negative number rather than `-inf`.
    """
    return 10.0 * np.log10(np.maximum(np.asarray(value, dtype=float), floor))


def dbm_to_mw(power_dbm):
    return db_to_linear(power_dbm)


def mw_to_dbm(power_mw):
    return linear_to_db(power_mw)


def kmh_to_mps(speed_kmh):
    """
    Speed in metres per second from km/h

    Examples
    --------
    kmh_to_mps(36)
    # 10.0
    """
    return speed_kmh / 3.6


def wrap_degrees(angle):
    """Wrap angles in degrees to the interval [-180, 180)"""
    return (np.asarray(angle, dtype=float) + 180.0) % 360.0 - 180.0


def spawn_rng(seed, stream, *keys):
    """
    Random generator for one named stream of a seeded run

    The same (seed, stream, keys) always yields the same sequence, and
    different streams are statistically independent, so adding draws to one
    stream never perturbs another.

    Parameters
    ----------
    seed : int
        Run seed.
    stream : str
        Stream name, e.g. "fading" or "mac".
    keys : int
        Further integers identifying the stream instance, e.g. node ids.

    Examples
    --------
    rng = spawn_rng(7, "shadowing", 0, 12)
    rng.normal()
    """
    stream_key = zlib.crc32(stream.encode("utf-8"))
    entropy = [int(seed), stream_key, *(int(key) for key in keys)]
    return np.random.default_rng(np.random.SeedSequence(entropy))
