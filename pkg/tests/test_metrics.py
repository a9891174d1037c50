"""
Unit tests for densim.metrics
"""

import math

import numpy as np
import pandas as pd
import pytest

from densim.base import DeploymentKind
from densim.metrics import (build_cdf, jain, mcs_histogram, percentile_table, summarise_run,
                            throughput_gain_table, ue_throughput)
from densim.simulate import TRACE_COLUMNS


def block(slot, ue, bits, outcome="ack", direction="dl", hop="direct", final=True,
          mcs=5, sinr_db=10.0):
    tx, rx = (0, ue) if direction == "dl" else (ue, 0)
    return (slot, direction, f"{tx}-{rx}", tx, rx, ue, hop, 4, 0, mcs, sinr_db, sinr_db,
            0.0, bits, outcome, final)


def make_trace(rows):
    trace = pd.DataFrame.from_records(rows, columns=TRACE_COLUMNS)
    trace["final"] = trace["final"].astype(bool)
    return trace


#%%

def test_cdf_percentiles():
    cdf = build_cdf([4, 1, 3, 2])
    np.testing.assert_array_equal(cdf.values, [1, 2, 3, 4])
    np.testing.assert_allclose(cdf.probs, [0.25, 0.5, 0.75, 1.0])
    assert cdf.percentile(50) == pytest.approx(2.5)
    assert cdf.percentile(0) == 1
    assert cdf.percentile(100) == 4
    assert list(cdf.to_frame("sinr_db").columns) == ["sinr_db", "prob"]


def test_cdf_is_monotone():
    cdf = build_cdf(np.random.default_rng(1).normal(size=500))
    assert np.all(np.diff(cdf.values) >= 0)
    assert np.all(np.diff(cdf.probs) > 0)
    percentiles = cdf.percentile([10, 50, 90])
    assert np.all(np.diff(percentiles) >= 0)


def test_cdf_needs_samples():
    with pytest.raises(ValueError):
        build_cdf([])


@pytest.mark.parametrize("values, expected", [
    ([5, 5, 5, 5], 1.0),
    ([8, 0, 0, 0, 0, 0, 0, 0], 0.125),
    ([1, 2, 3], 0.857),
])
def test_jain_examples(values, expected):
    assert jain(values) == pytest.approx(expected, abs=1e-3)


def test_jain_bounds():
    rng = np.random.default_rng(3)
    for _ in range(100):
        values = rng.exponential(size=rng.integers(1, 12))
        assert 1 / len(values) - 1e-12 <= jain(values) <= 1 + 1e-12


@pytest.mark.parametrize("values", [[], [0, 0], [1, -1]])
def test_jain_rejects(values):
    with pytest.raises(ValueError):
        jain(values)


#%%

def test_mcs_histogram():
    trace = make_trace([block(0, 2, 100, mcs=3), block(2, 2, 100, "nack", mcs=3),
                        block(1, 2, 100, mcs=7, direction="ul")])
    histogram = mcs_histogram(trace)
    assert len(histogram) == 16
    assert histogram.loc[3, ["acks", "nacks"]].tolist() == [1, 1]
    assert histogram.loc[7, "acks"] == 1
    assert histogram[["acks", "nacks"]].to_numpy().sum() == 3
    assert mcs_histogram(trace, direction="dl").loc[7, "acks"] == 0
    assert mcs_histogram(make_trace([]))[["acks", "nacks"]].to_numpy().sum() == 0


def test_ue_throughput_counts_delivered_bits():
    trace = make_trace([
        block(0, 2, 1000),
        block(2, 2, 500, "nack"),
        block(4, 3, 800, hop="backhaul", final=False),
        block(6, 3, 600, hop="access"),
        block(1, 2, 300, direction="ul"),
    ])
    assert ue_throughput(trace, [2, 3, 4], 1.0, "dl") == {2: 1000.0, 3: 600.0, 4: 0.0}
    assert ue_throughput(trace, [2], 2.0, "ul") == {2: 150.0}


def test_summarise_run():
    trace = make_trace([block(0, 2, 1000, sinr_db=5.0), block(2, 3, 3000, sinr_db=15.0),
                        block(4, 3, 3000, hop="backhaul", final=False, sinr_db=30.0),
                        block(1, 2, 2000, direction="ul", sinr_db=0.0)])
    summary = summarise_run(trace, [2, 3], 1e-3, "stationary_iab", seed=4)
    assert summary.deployment == DeploymentKind.STATIONARY_IAB
    np.testing.assert_array_equal(summary.sinr["dl"].values, [5.0, 15.0])
    np.testing.assert_allclose(summary.throughput["dl"].values, [1.0, 3.0])
    assert summary.fairness["dl"].jain_index == pytest.approx(16 / 20)
    assert summary.fairness["ul"].jain_index == pytest.approx(0.5)
    assert summary.mcs["acks"].sum() == 4
    frame = summary.fairness_frame()
    assert set(frame["direction"]) == {"dl", "ul"}


def test_summarise_run_without_deliveries():
    trace = make_trace([block(0, 2, 1000, "nack")])
    summary = summarise_run(trace, [2], 1e-3, DeploymentKind.MACRO_ONLY)
    assert math.isnan(summary.fairness["dl"].jain_index)
    assert math.isnan(summary.sinr["ul"].percentile(50))


#%%

def test_percentile_table():
    table = percentile_table({"a": build_cdf(range(101)), "b": build_cdf([2.0])}, prefix="sinr_")
    assert list(table.columns) == ["sinr_p10", "sinr_p50", "sinr_p90"]
    assert table.loc["a"].tolist() == [10.0, 50.0, 90.0]
    assert table.loc["b"].tolist() == [2.0, 2.0, 2.0]


def test_throughput_gain_table():
    summary = pd.DataFrame([
        dict(deployment="macro_only", direction="dl", tput_p10=10.0, tput_p90=100.0),
        dict(deployment="stationary_ncr", direction="dl", tput_p10=15.0, tput_p90=90.0),
        dict(deployment="macro_only", direction="ul", tput_p10=0.0, tput_p90=50.0),
        dict(deployment="stationary_ncr", direction="ul", tput_p10=2.0, tput_p90=60.0),
    ])
    gains = throughput_gain_table(summary).set_index("direction")
    assert gains.loc["dl", "gain_p10"] == pytest.approx(5.0)
    assert gains.loc["dl", "gain_pct_p10"] == pytest.approx(50.0)
    assert gains.loc["dl", "gain_pct_p90"] == pytest.approx(-10.0)
    assert math.isnan(gains.loc["ul", "gain_pct_p10"])
    assert gains.loc["ul", "gain_pct_p90"] == pytest.approx(20.0)
