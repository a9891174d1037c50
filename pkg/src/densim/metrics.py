"""
metrics
-------
Aggregate slot traces into CDFs, percentiles, Jain's fairness index and
MCS histograms

Classes
-------
Cdf
    Empirical CDF with linear-interpolation percentiles.

FairnessReport
    Jain's index with the per-UE throughputs it was computed from.

RunSummary
    Statistics of one simulation run.

Functions
---------
build_cdf
    Empirical CDF of samples.

jain
    Jain's fairness index.

mcs_histogram
    ACK and NACK counts per MCS.

ue_throughput
    Delivered throughput per UE.

summarise_run
    All statistics of a run trace.

percentile_table
    10th/50th/90th percentiles of several CDFs.

throughput_gain_table
    Throughput gains of assisted deployments over the macro-only one.
"""

#%%

from dataclasses import dataclass, field
import logging
from typing import Dict

import numpy as np
import pandas as pd

# Internal imports.
from densim.base import DeploymentKind, Direction, Outcome

logger = logging.getLogger(__name__)

PERCENTILES = (10, 50, 90)

#%%

@dataclass(frozen=True)
class Cdf:
    """
    Empirical CDF

    Attributes
    ----------
    values : array
        Sorted samples.
    probs : array
        i/n for the i-th sorted sample, from 1/n to 1.
    """
    values: np.ndarray
    probs: np.ndarray

    def percentile(self, q):
        """Percentile(s) `q` in [0, 100], interpolating linearly between order statistics"""
        return np.percentile(self.values, q)

    def to_frame(self, value_name="value"):
        return pd.DataFrame({value_name: self.values, "prob": self.probs})


def build_cdf(samples):
    """
    Empirical CDF of samples

    Raises
    ------
    ValueError
        If `samples` is empty.

    Examples
    --------
    build_cdf([1, 2, 3, 4]).percentile(50)
    # 2.5
    """
    values = np.sort(np.asarray(samples, dtype=float).ravel())
    if values.size == 0:
        raise ValueError("cannot build a CDF from no samples")
    probs = np.arange(1, values.size + 1) / values.size
    return Cdf(values, probs)


@dataclass(frozen=True)
class FairnessReport:
    jain_index: float
    throughputs: Dict[int, float] = field(default_factory=dict)


def jain(throughputs):
    """
    Jain's fairness index (sum x)^2 / (n sum x^2)

    Raises
    ------
    ValueError
        For no values, negative values or all zeros.

    Examples
    --------
    jain([1, 2, 3])
    # 0.857...
    """
    values = np.asarray(list(throughputs), dtype=float)
    if values.size == 0:
        raise ValueError("Jain's index needs at least one throughput")
    if np.any(values < 0):
        raise ValueError("throughputs must be non-negative")
    squares = np.sum(values ** 2)
    if squares == 0:
        raise ValueError("Jain's index is undefined when every throughput is zero")
    return float(np.sum(values) ** 2 / (values.size * squares))


def mcs_histogram(trace, n_mcs=16, direction=None):
    """
    ACK and NACK counts per MCS

    Parameters
    ----------
    trace : DataFrame
        Slot trace with `mcs` and `outcome` columns (and `direction` when
        filtering).
    n_mcs : int, default 16
    direction : Direction or str, optional
        Count only blocks of this direction.

    Returns
    -------
    DataFrame with columns `mcs`, `acks`, `nacks`, one row per MCS index.
    """
    if direction is not None and len(trace):
        trace = trace[trace["direction"] == Direction(direction).value]
    counts = pd.DataFrame({"mcs": np.arange(n_mcs), "acks": 0, "nacks": 0})
    if len(trace):
        grouped = trace.groupby(["mcs", "outcome"]).size()
        for (mcs, outcome), count in grouped.items():
            column = "acks" if outcome == Outcome.ACK.value else "nacks"
            counts.loc[counts["mcs"] == mcs, column] += int(count)
    return counts


def ue_throughput(trace, ues, window, direction):
    """
    Delivered throughput of each UE in bit/s

    Counts bits of ACKed end-to-end blocks of `direction`; UEs with
    nothing delivered get zero.
    """
    direction = Direction(direction).value
    throughput = {ue: 0.0 for ue in ues}
    if len(trace):
        done = trace[(trace["direction"] == direction) & trace["final"]
                     & (trace["outcome"] == Outcome.ACK.value)]
        for ue, bits in done.groupby("ue")["bits"].sum().items():
            if ue in throughput:
                throughput[ue] = bits / window
    return throughput


#%%

@dataclass
class RunSummary:
    """
    Statistics of one run

    Attributes
    ----------
    sinr : dict
        Direction value -> Cdf of SINR (dB) on UE-facing links.
    throughput : dict
        Direction value -> Cdf of per-UE throughput (Mbit/s).
    fairness : dict
        Direction value -> FairnessReport.
    mcs : DataFrame
        MCS histogram of all blocks.
    """
    deployment: DeploymentKind
    seed: int
    sinr: Dict[str, Cdf]
    throughput: Dict[str, Cdf]
    fairness: Dict[str, FairnessReport]
    mcs: pd.DataFrame

    def fairness_frame(self):
        return pd.DataFrame([dict(deployment=self.deployment.value, direction=direction,
                                  jain=report.jain_index)
                             for direction, report in self.fairness.items()])


def summarise_run(trace, ues, window, deployment, seed=0):
    """
    Statistics of a run trace

    Parameters
    ----------
    trace : DataFrame
        Slot trace with one row per transport block.
    ues : sequence of int
        UE ids; UEs missing from the trace count with zero throughput.
    window : float
        Duration of the run in seconds.
    deployment : DeploymentKind
    seed : int

    Returns
    -------
    RunSummary
    """
    sinr, throughput, fairness = {}, {}, {}
    for direction in Direction:
        key = direction.value
        rows = trace[(trace["direction"] == key) & trace["hop"].isin(["direct", "access"])]
        samples = rows["sinr_db"].to_numpy()
        sinr[key] = build_cdf(samples if samples.size else [np.nan])
        per_ue = ue_throughput(trace, ues, window, direction)
        throughput[key] = build_cdf(np.array(list(per_ue.values())) / 1e6)
        try:
            index = jain(per_ue.values())
        except ValueError:
            logger.warning("no data delivered in %s for %s seed %d", key,
                           DeploymentKind.parse(deployment).value, seed)
            index = float("nan")
        fairness[key] = FairnessReport(index, per_ue)
    return RunSummary(DeploymentKind.parse(deployment), seed, sinr, throughput, fairness,
                      mcs_histogram(trace))


def percentile_table(cdfs, percentiles=PERCENTILES, prefix=""):
    """
    Percentiles of several CDFs

    Parameters
    ----------
    cdfs : mapping
        Row label -> Cdf.
    percentiles : sequence of float
    prefix : str
        Prefix of the column names, e.g. "sinr_".

    Returns
    -------
    DataFrame indexed by label with one column per percentile, e.g. `sinr_p10`.
    """
    rows = {label: {f"{prefix}p{q:g}": float(cdf.percentile(q)) for q in percentiles}
            for label, cdf in cdfs.items()}
    return pd.DataFrame.from_dict(rows, orient="index")


def throughput_gain_table(summary, baseline=DeploymentKind.MACRO_ONLY.value,
                          percentiles=(10, 90)):
    """
    Throughput gains over the baseline deployment

    Parameters
    ----------
    summary : DataFrame
        Campaign summary with columns `deployment`, `direction` and
        `tput_p<q>` for each percentile.
    baseline : str
        Deployment the others are compared with.

    Returns
    -------
    DataFrame with, per other deployment and direction, absolute gains
    (Mbit/s) `gain_p<q>` and relative gains (%) `gain_pct_p<q>`.
    """
    base = summary[summary["deployment"] == baseline].set_index("direction")
    rows = []
    for _, row in summary[summary["deployment"] != baseline].iterrows():
        if row["direction"] not in base.index:
            continue
        reference = base.loc[row["direction"]]
        out = dict(deployment=row["deployment"], direction=row["direction"])
        for q in percentiles:
            column = f"tput_p{q:g}"
            gain = row[column] - reference[column]
            out[f"gain_p{q:g}"] = gain
            out[f"gain_pct_p{q:g}"] = (100.0 * gain / reference[column]
                                       if reference[column] > 0 else float("nan"))
        rows.append(out)
    return pd.DataFrame(rows)
