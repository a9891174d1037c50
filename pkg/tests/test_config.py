"""
Unit tests for densim.config
"""

import math

import pytest

from densim.base import ConfigError, DeploymentKind
from densim.config import ALL_DEPLOYMENTS, RunConfig, dump_config, load_config


def test_defaults():
    config = RunConfig()
    assert config.carrier_ghz == 28.0
    assert config.n_prbs == 66
    assert config.deployments == ALL_DEPLOYMENTS
    assert len(config.deployment_kinds) == 6
    assert config.seeds == tuple(range(10))
    assert config.association_slots == 0
    assert config.slot_duration == pytest.approx(0.25e-3)
    assert 10 * math.log10(config.noise_mw()) == pytest.approx(-106.43, abs=0.01)
    assert RunConfig.from_mapping(None) == config
    assert load_config() == config


def test_sections_of_settings():
    assert RunConfig.section_of("n_prbs") == "radio"
    assert RunConfig.section_of("ncr_gain_db") == "mac"
    with pytest.raises(KeyError):
        RunConfig.section_of("carrier_frequency")


def test_mapping_round_trip(tmp_path):
    config = RunConfig(deployments=("uav_ncr", "stationary_ris"), seeds=(4, 7),
                       ncr_max_power_dbm=30.0, ris_phase_bits=2, layout_file="layout.yaml")
    assert RunConfig.from_mapping(config.to_mapping()) == config

    path = tmp_path / "config.yaml"
    text = dump_config(config, path)
    assert path.read_text() == text
    assert load_config(path) == config


def test_loads_quick_config(helper_class):
    config = load_config(helper_class(__file__).data_file("quick.yaml"))
    assert config.deployments == ("macro_only",)
    assert config.seeds == (3,)
    assert (config.n_slots, config.refresh_slots) == (40, 20)
    assert config.n_prbs == 66


@pytest.mark.parametrize("fname, key", [
    ("bad_key.yaml", "radio.carrier_frequency"),
    ("bad_prbs.yaml", "radio.n_prbs"),
])
def test_bad_config_files(helper_class, fname, key):
    with pytest.raises(ConfigError) as excinfo:
        load_config(helper_class(__file__).data_file(fname))
    assert excinfo.value.key == key
    assert isinstance(excinfo.value, ValueError)


@pytest.mark.parametrize("mapping, key", [
    ({"physics": {"n_prbs": 10}}, "physics"),
    ({"run": {"n_prbs": 10}}, "run.n_prbs"),
    ({"run": {"seeds": ["x"]}}, "run.seeds"),
    ({"run": {"seeds": [1.5]}}, "run.seeds"),
    ({"run": {"deployments": ["macro_plus"]}}, "run.deployments"),
    ({"run": {"deployments": []}}, "run.deployments"),
    ({"run": {"n_slots": 0}}, "run.n_slots"),
    ({"run": {"association_slots": -1}}, "run.association_slots"),
    ({"output": {"write_trace": "yes"}}, "output.write_trace"),
    ({"radio": {"carrier_ghz": 200}}, "radio.carrier_ghz"),
    ({"scenario": {"street_width": 2.0}}, "scenario.street_width"),
    ({"channel": {"temporal_correlation": 1.5}}, "channel.temporal_correlation"),
    ({"channel": {"backhaul_visibility": "sometimes"}}, "channel.backhaul_visibility"),
    ({"mac": {"olla_min_db": 10.0}}, "mac.olla_min_db"),
    ({"antenna": {"ris_phase_bits": 0}}, "antenna.ris_phase_bits"),
])
def test_invalid_settings_name_their_key(mapping, key):
    with pytest.raises(ConfigError) as excinfo:
        RunConfig.from_mapping(mapping)
    assert excinfo.value.key == key


def test_deployment_names():
    assert RunConfig.from_mapping({"run": {"deployments": "all"}}).deployments == ALL_DEPLOYMENTS
    config = RunConfig.from_mapping({"run": {"deployments": ["Macro_Only", "uav_iab"]}})
    assert config.deployment_kinds == [DeploymentKind.MACRO_ONLY, DeploymentKind.UAV_IAB]


def test_overrides():
    config = RunConfig().with_overrides(n_slots=50, seeds=(1,), output_dir=None)
    assert (config.n_slots, config.seeds, config.output_dir) == (50, (1,), "out")
    with pytest.raises(ConfigError) as excinfo:
        RunConfig().with_overrides(n_prbs=100)
    assert excinfo.value.key == "radio.n_prbs"


def test_unreadable_files(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("run: [1, 2\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    empty = tmp_path / "empty.yaml"
    empty.write_text("")
    assert load_config(empty) == RunConfig()


def test_derived_settings():
    config = RunConfig(ncr_gain_db=50.0)
    assert config.ncr_config(32.0).max_power_dbm == 32.0
    assert config.ncr_config(32.0).gain == pytest.approx(1e5)
    assert RunConfig(ncr_max_power_dbm=20.0).ncr_config(32.0).max_power_dbm == 20.0
    loop = config.outer_loop()
    assert (loop.step_down, loop.step_up, loop.lower, loop.upper) == (1.0, 0.1, -20.0, 5.0)
    assert len(config.mcs_table()) == 16
    assert config.channel_params().n_prbs == 66
