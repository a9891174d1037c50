"""
Unit tests for densim.campaign and its command line interface
"""

import pandas as pd
import pytest
import yaml

from densim.base import ConfigError
from densim.campaign import run_campaign, run_one, summary_table, validate_config
from densim.config import RunConfig, load_config
from densim.metrics import summarise_run
from densim.scenario import read_layout
from densim.simulate import TRACE_COLUMNS

SUMMARY_COLUMNS = ["deployment", "direction", "sinr_p10", "sinr_p50", "sinr_p90",
                   "tput_p10", "tput_p50", "tput_p90", "jain", "n_seeds"]


def quick_config(helper_class, tmp_path, **overrides):
    config = load_config(helper_class(__file__).data_file("quick.yaml"))
    return config.with_overrides(output_dir=str(tmp_path / "out"), **overrides)


def test_run_one_writes_files(helper_class, tmp_path):
    config = quick_config(helper_class, tmp_path, n_slots=8)
    summary = run_one(config, "macro_only", 3)
    folder = tmp_path / "out" / "macro_only" / "seed_3"
    for name in ("cdf_sinr_dl.csv", "cdf_sinr_ul.csv", "cdf_tput_dl.csv", "cdf_tput_ul.csv",
                 "fairness.csv", "mcs_hist.csv", "trace.csv"):
        assert (folder / name).is_file()
    assert list(pd.read_csv(folder / "trace.csv").columns) == TRACE_COLUMNS
    assert list(pd.read_csv(folder / "cdf_tput_dl.csv").columns) == ["throughput_mbps", "prob"]
    assert len(pd.read_csv(folder / "mcs_hist.csv")) == 16
    assert summary.seed == 3


def test_run_one_without_trace(helper_class, tmp_path):
    config = quick_config(helper_class, tmp_path, n_slots=4, write_trace=False)
    run_one(config, "macro_only", 3)
    assert not (tmp_path / "out" / "macro_only" / "seed_3" / "trace.csv").exists()


def test_run_campaign(helper_class, tmp_path):
    config = quick_config(helper_class, tmp_path, deployments=("macro_only", "stationary_ncr"),
                          n_slots=8)
    summary = run_campaign(config)
    assert list(summary.columns) == SUMMARY_COLUMNS
    assert len(summary) == 4
    out = tmp_path / "out"
    assert load_config(out / "config.yaml") == config
    pd.testing.assert_frame_equal(pd.read_csv(out / "summary.csv"), summary, check_dtype=False)
    gains = pd.read_csv(out / "gains.csv")
    assert set(gains["deployment"]) == {"stationary_ncr"}


def test_summary_pools_seeds():
    def trace(sinr, bits):
        rows = [(0, "dl", "0-2", 0, 2, 2, "direct", 4, 0, 5, sinr, sinr, 0.0, bits, "ack", True),
                (1, "ul", "2-0", 2, 0, 2, "direct", 4, 0, 5, sinr, sinr, 0.0, bits, "ack", True)]
        frame = pd.DataFrame.from_records(rows, columns=TRACE_COLUMNS)
        return frame

    summaries = [summarise_run(trace(0.0, 1000), [2], 1e-3, "macro_only", 0),
                 summarise_run(trace(10.0, 3000), [2], 1e-3, "macro_only", 1)]
    table = summary_table(summaries).set_index("direction")
    assert table.loc["dl", "sinr_p50"] == pytest.approx(5.0)
    assert table.loc["dl", "tput_p10"] == pytest.approx(1.2)
    assert table.loc["dl", "jain"] == 1.0
    assert table.loc["ul", "n_seeds"] == 2


def test_validate_config_checks_layout(helper_class, tmp_path):
    path = helper_class(__file__).data_file("quick.yaml")
    config = validate_config(path, layout_file=str(helper_class(__file__).data_file("moved_ncr.yaml")))
    assert config.layout_file.endswith("moved_ncr.yaml")
    with pytest.raises(ConfigError) as excinfo:
        validate_config(path, layout_file=str(tmp_path / "missing.yaml"))
    assert excinfo.value.key == "scenario.layout_file"


@pytest.mark.slow
def test_multi_seed_campaign_in_workers(tmp_path):
    config = RunConfig(deployments=("macro_only", "uav_ncr"), seeds=(0, 1, 2), n_slots=40,
                       refresh_slots=20, codebook_az=4, codebook_el=2, jobs=2,
                       output_dir=str(tmp_path), write_trace=False)
    summary = run_campaign(config)
    assert (summary["n_seeds"] == 3).all()
    assert (summary["tput_p90"] >= summary["tput_p10"]).all()
    assert summary["jain"].between(0.0, 1.0).all()


ASSISTED = ["stationary_iab", "stationary_ncr", "stationary_ris", "uav_iab", "uav_ncr"]


@pytest.fixture(scope="module")
def ten_seed_summary(tmp_path_factory):
    config = RunConfig(seeds=tuple(range(10)), n_slots=2000, jobs=4, write_trace=False,
                       output_dir=str(tmp_path_factory.mktemp("campaign")))
    return run_campaign(config).set_index(["deployment", "direction"])


@pytest.mark.slow
def test_deployments_rank_by_sinr(ten_seed_summary):
    median = ten_seed_summary.xs("dl", level="direction")["sinr_p50"]
    assert median["stationary_iab"] >= median["stationary_ncr"] >= median["stationary_ris"] \
        >= median["macro_only"]
    for direction in ("dl", "ul"):
        p10 = ten_seed_summary.xs(direction, level="direction")["sinr_p10"]
        for name in ASSISTED:
            assert p10[name] > p10["macro_only"], (direction, name)


@pytest.mark.slow
def test_stationary_relays_beat_uavs(ten_seed_summary):
    median = ten_seed_summary.xs("dl", level="direction")["sinr_p50"]
    assert median["stationary_iab"] >= median["uav_iab"]
    assert median["stationary_ncr"] >= median["uav_ncr"]


@pytest.mark.slow
def test_ris_is_least_fair(ten_seed_summary):
    jain = ten_seed_summary.xs("dl", level="direction")["jain"]
    assert len(jain) == 6
    assert (jain["stationary_ris"] <= jain).all()


#%%

def test_cli_run(helper_class, tmp_path):
    result = helper_class(__file__).run_script(
        module="densim.campaign", config="quick.yaml",
        options=f"--out {tmp_path} --slots 8 --seed 5")
    assert result.returncode == 0, result.stderr
    assert "macro_only" in result.stdout
    assert (tmp_path / "macro_only" / "seed_5" / "fairness.csv").is_file()
    assert (tmp_path / "summary.csv").is_file()


def test_cli_validate(helper_class):
    helpers = helper_class(__file__)
    result = helpers.run_script(module="densim.campaign", command="validate", config="quick.yaml")
    assert result.returncode == 0
    assert yaml.safe_load(result.stdout)["run"]["n_slots"] == 40

    result = helpers.run_script(module="densim.campaign", command="validate", config="bad_key.yaml")
    assert result.returncode == 1
    assert "radio.carrier_frequency" in result.stderr

    result = helpers.run_script(module="densim.campaign", command="validate", config="bad_prbs.yaml")
    assert result.returncode == 1
    assert "radio.n_prbs" in result.stderr


def test_cli_rejects_unknown_deployment(helper_class, tmp_path):
    result = helper_class(__file__).run_script(
        module="densim.campaign", config="quick.yaml",
        options=f"--out {tmp_path} --deployment macro_plus")
    assert result.returncode == 1
    assert "run.deployments" in result.stderr


def test_cli_layout(helper_class, tmp_path):
    path = tmp_path / "layout.yaml"
    result = helper_class(__file__).run_script(
        module="densim.campaign", command="layout", options=f"-d stationary_ris -o {path}")
    assert result.returncode == 0, result.stderr
    labels = [record.label for record in read_layout(path)]
    assert "ris0" in labels
