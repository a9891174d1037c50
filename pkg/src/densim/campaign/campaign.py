"""
Run campaigns of simulations and write their results

A campaign runs every (deployment, seed) pair of a config, writes the
per-run statistics to `<output_dir>/<deployment>/seed_<n>/` and then a
summary comparing deployments at the 10th, 50th and 90th percentiles.

Functions
---------
run_one
    Simulate one (deployment, seed) pair and write its files.

run_campaign
    Run all pairs of a config and write the summary files.

validate_config
    Load and check a config file.

summary_table
    Pool run summaries per deployment and direction.
"""

#%%

from concurrent.futures import ProcessPoolExecutor
import logging
from pathlib import Path

import numpy as np
import pandas as pd

# Internal imports.
from densim.base import ConfigError
from densim.channel import dump_channel_trace
from densim.config import dump_config, load_config
from densim.metrics import build_cdf, percentile_table, summarise_run, throughput_gain_table
from densim.scenario import read_layout
from densim.simulate import simulate_run

logger = logging.getLogger(__name__)

#%%

def run_directory(output_dir, deployment, seed):
    """Folder of the files of one run"""
    return Path(output_dir) / deployment / f"seed_{seed}"


def write_run(result, summary, folder, write_trace=True):
    """
    Write the statistics of one run

    Parameters
    ----------
    result : simulate.RunResult
    summary : metrics.RunSummary
    folder : Path
        Created if missing.
    write_trace : bool, default True
        Also write the per-block slot trace.
    """
    folder.mkdir(parents=True, exist_ok=True)
    for direction, cdf in summary.sinr.items():
        cdf.to_frame("sinr_db").to_csv(folder / f"cdf_sinr_{direction}.csv", index=False)
    for direction, cdf in summary.throughput.items():
        cdf.to_frame("throughput_mbps").to_csv(folder / f"cdf_tput_{direction}.csv", index=False)
    summary.fairness_frame().to_csv(folder / "fairness.csv", index=False)
    summary.mcs.to_csv(folder / "mcs_hist.csv", index=False)
    if write_trace:
        result.trace.to_csv(folder / "trace.csv", index=False)
    if result.channel_records:
        dump_channel_trace(result.channel_records, folder / "channel_trace.csv")
    logger.info("wrote results of %s seed %d to %s", summary.deployment.value,
                summary.seed, folder)


def run_one(config, deployment, seed, layout=None):
    """
    Simulate one (deployment, seed) pair and write its files

    Parameters
    ----------
    config : RunConfig
    deployment : str
    seed : int
    layout : list of LayoutRecord, optional

    Returns
    -------
    metrics.RunSummary
    """
    result = simulate_run(config, deployment, seed, layout)
    summary = summarise_run(result.trace, result.ues, result.window, result.deployment, seed)
    write_run(result, summary, run_directory(config.output_dir, result.deployment.value, seed),
              config.write_trace)
    return summary


def _run_task(args):
    return run_one(*args)


#%%

def summary_table(summaries):
    """
    Pool run summaries per deployment and direction

    SINR and throughput samples of all seeds of a deployment are pooled
    before taking percentiles; Jain's index is the median over seeds.

    Returns
    -------
    DataFrame with columns `deployment`, `direction`, `sinr_p10`,
    `sinr_p50`, `sinr_p90`, `tput_p10`, `tput_p50`, `tput_p90`, `jain`
    and `n_seeds`.
    """
    pooled = {}
    for summary in summaries:
        for direction in summary.sinr:
            key = (summary.deployment.value, direction)
            entry = pooled.setdefault(key, dict(sinr=[], tput=[], jain=[]))
            sinr = summary.sinr[direction].values
            entry["sinr"].append(sinr[~np.isnan(sinr)])
            entry["tput"].append(summary.throughput[direction].values)
            entry["jain"].append(summary.fairness[direction].jain_index)

    rows = []
    for (deployment, direction), entry in pooled.items():
        sinr = np.concatenate(entry["sinr"])
        cdfs = dict(sinr=build_cdf(sinr if sinr.size else [np.nan]),
                    tput=build_cdf(np.concatenate(entry["tput"])))
        row = dict(deployment=deployment, direction=direction)
        for name, cdf in cdfs.items():
            row.update(percentile_table({name: cdf}, prefix=f"{name}_").iloc[0].to_dict())
        row["jain"] = float(np.nanmedian(entry["jain"])) \
            if not np.all(np.isnan(entry["jain"])) else float("nan")
        row["n_seeds"] = len(entry["jain"])
        rows.append(row)
    return pd.DataFrame(rows)


def run_campaign(config, layout=None):
    """
    Run every (deployment, seed) pair of a config

    Writes per-run folders, `summary.csv`, `gains.csv` and the resolved
    `config.yaml` under `config.output_dir`.  Runs are independent, so with
    `config.jobs` > 1 they execute in worker processes.

    Parameters
    ----------
    config : RunConfig
    layout : list of LayoutRecord, optional
        Overrides `config.layout_file`.

    Returns
    -------
    Summary DataFrame, see `summary_table`.

    Raises
    ------
    OSError
        If the output folder cannot be written.
    """
    if layout is None and config.layout_file:
        layout = read_layout(config.layout_file)
    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    dump_config(config, output_dir / "config.yaml")

    tasks = [(config, deployment, seed, layout)
             for deployment in config.deployments for seed in config.seeds]
    logger.info("campaign of %d runs into %s", len(tasks), output_dir)
    if config.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            summaries = list(pool.map(_run_task, tasks))
    else:
        summaries = [_run_task(task) for task in tasks]

    summary = summary_table(summaries)
    summary.to_csv(output_dir / "summary.csv", index=False)
    throughput_gain_table(summary).to_csv(output_dir / "gains.csv", index=False)
    logger.info("wrote campaign summary to %s", output_dir / "summary.csv")
    return summary


def validate_config(path=None, **overrides):
    """
    Load a config file, apply overrides and check its layout file

    Returns
    -------
    RunConfig

    Raises
    ------
    ConfigError
        For invalid settings or an unreadable layout file.
    """
    config = load_config(path).with_overrides(**overrides)
    if config.layout_file:
        try:
            read_layout(config.layout_file)
        except OSError as exc:
            raise ConfigError("scenario.layout_file", f"cannot read layout: {exc.strerror}") from None
        except ValueError as exc:
            raise ConfigError("scenario.layout_file", str(exc)) from None
    return config
