"""
config
------
Run configuration: defaults, YAML files and validation

A config file is a YAML mapping of sections (`run`, `radio`, `scenario`,
`antenna`, `channel`, `mac`, `output`) to flat `key: value` tables.
Every key has a default, so an empty file gives the reference
setup: 28 GHz carrier, 50 MHz, 60 kHz subcarriers, 66 PRBs, 8 UEs at
40 km/h, 60 dB NCR gain.

Classes
-------
RunConfig
    All settings of a campaign.

Functions
---------
load_config, dump_config
    Read and write YAML config files.
"""

#%%

from dataclasses import dataclass, field, fields, replace
import logging
from pathlib import Path
from typing import Optional, Tuple

import yaml

# Internal imports.
from densim.antenna import ElementPattern
from densim.base import ConfigError, DeploymentKind, NodeKind
from densim.channel import ChannelParams
from densim.mac import BlerModel, OuterLoopState, SlotPattern, default_mcs_table
from densim.phy import NcrConfig, noise_power_prb
from densim.scenario import EntityParams, GridGeometry, ScenarioParams

logger = logging.getLogger(__name__)

SECTIONS = ("run", "radio", "scenario", "antenna", "channel", "mac", "output")

ALL_DEPLOYMENTS = tuple(kind.value for kind in DeploymentKind)


def _setting(default, section, **kwargs):
    return field(default=default, metadata={"section": section}, **kwargs)


#%%

@dataclass(frozen=True)
class RunConfig:
    """
    Settings of a campaign of simulation runs

    Each field belongs to one section of the config file; see
    `RunConfig.section_of`.
    """
    # run
    deployments: Tuple[str, ...] = _setting(ALL_DEPLOYMENTS, "run")
    seeds: Tuple[int, ...] = _setting(tuple(range(10)), "run")
    n_slots: int = _setting(8000, "run")
    refresh_slots: int = _setting(40, "run")
    # 0 associates UEs once, at the first slot.
    association_slots: int = _setting(0, "run")
    random_course_offset: bool = _setting(True, "run")
    jobs: int = _setting(1, "run")

    # radio
    carrier_ghz: float = _setting(28.0, "radio")
    bandwidth_mhz: float = _setting(50.0, "radio")
    scs_khz: float = _setting(60.0, "radio")
    n_prbs: int = _setting(66, "radio")
    noise_density_dbm_hz: float = _setting(-174.0, "radio")
    noise_figure_db: float = _setting(9.0, "radio")
    slot_duration_ms: float = _setting(0.25, "radio")
    symbols_per_slot: int = _setting(14, "radio")

    # scenario
    block_size: float = _setting(120.0, "scenario")
    sidewalk_width: float = _setting(3.0, "scenario")
    street_width: float = _setting(14.0, "scenario")
    n_blocks_traversed: int = _setting(3, "scenario")
    ues_per_street: int = _setting(4, "scenario")
    ue_spacing: float = _setting(25.0, "scenario")
    ue_speed_kmh: float = _setting(40.0, "scenario")
    uav_speed_kmh: float = _setting(40.0, "scenario")
    uav_standoff: float = _setting(100.0, "scenario")
    gnb_tx_power_dbm: float = _setting(35.0, "scenario")
    stationary_tx_power_dbm: float = _setting(32.0, "scenario")
    uav_tx_power_dbm: float = _setting(29.0, "scenario")
    ue_tx_power_dbm: float = _setting(24.0, "scenario")
    layout_file: Optional[str] = _setting(None, "scenario")
    association_floor_dbm: float = _setting(-140.0, "scenario")

    # antenna
    codebook_az: int = _setting(8, "antenna")
    codebook_el: int = _setting(4, "antenna")
    codebook_az_span: float = _setting(120.0, "antenna")
    codebook_el_span: float = _setting(60.0, "antenna")
    element_max_gain_dbi: float = _setting(8.0, "antenna")
    element_spacing: float = _setting(0.5, "antenna")
    ris_phase_bits: Optional[int] = _setting(None, "antenna")

    # channel
    n_nlos_rays: int = _setting(6, "channel")
    k_factor_db: float = _setting(10.0, "channel")
    temporal_correlation: float = _setting(0.9, "channel")
    backhaul_visibility: str = _setting("table", "channel")
    shadowing: bool = _setting(True, "channel")

    # mac
    ncr_gain_db: float = _setting(60.0, "mac")
    ncr_max_power_dbm: Optional[float] = _setting(None, "mac")
    bler_slope: float = _setting(1.5, "mac")
    target_bler: float = _setting(0.1, "mac")
    olla_step_down_db: float = _setting(1.0, "mac")
    olla_step_up_db: float = _setting(0.1, "mac")
    olla_min_db: float = _setting(-20.0, "mac")
    olla_max_db: float = _setting(5.0, "mac")
    tbs_overhead: float = _setting(0.86, "mac")

    # output
    output_dir: str = _setting("out", "output")
    write_trace: bool = _setting(True, "output")
    channel_trace: bool = _setting(False, "output")

    def __post_init__(self):
        self.validate()

    #%%

    @staticmethod
    def section_of(name):
        for item in fields(RunConfig):
            if item.name == name:
                return item.metadata["section"]
        raise KeyError(name)

    def validate(self):
        """
        Check settings

        Raises
        ------
        ConfigError
            Naming the first offending `section.key`.
        """
        def fail(name, message):
            raise ConfigError(f"{self.section_of(name)}.{name}", message)

        if not self.deployments:
            fail("deployments", "at least one deployment is required")
        for name in self.deployments:
            try:
                DeploymentKind.parse(name)
            except ValueError as exc:
                fail("deployments", str(exc))
        if not self.seeds or not all(isinstance(seed, int) and not isinstance(seed, bool)
                                     for seed in self.seeds):
            fail("seeds", "seeds must be a non-empty list of integers")
        for name in ("n_slots", "refresh_slots", "jobs", "n_prbs", "symbols_per_slot",
                     "n_blocks_traversed", "ues_per_street", "codebook_az", "codebook_el"):
            if getattr(self, name) < 1:
                fail(name, "must be at least 1")
        for name in ("carrier_ghz", "bandwidth_mhz", "scs_khz", "slot_duration_ms",
                     "block_size", "sidewalk_width", "street_width", "ue_spacing",
                     "element_spacing", "bler_slope", "tbs_overhead",
                     "codebook_az_span", "codebook_el_span"):
            if getattr(self, name) <= 0:
                fail(name, "must be positive")
        for name in ("association_slots", "ue_speed_kmh", "uav_speed_kmh", "uav_standoff",
                     "noise_figure_db", "olla_step_down_db", "olla_step_up_db", "n_nlos_rays"):
            if getattr(self, name) < 0:
                fail(name, "must not be negative")
        if not 0.5 <= self.carrier_ghz <= 100.0:
            fail("carrier_ghz", "must be within [0.5, 100] GHz")
        if self.n_prbs * 12 * self.scs_khz * 1e3 > self.bandwidth_mhz * 1e6:
            fail("n_prbs", f"{self.n_prbs} PRBs of 12 x {self.scs_khz:g} kHz exceed "
                           f"{self.bandwidth_mhz:g} MHz")
        if self.street_width <= self.sidewalk_width:
            fail("street_width", "must exceed sidewalk_width")
        if not 0.0 <= self.temporal_correlation <= 1.0:
            fail("temporal_correlation", "must be within [0, 1]")
        if not 0.0 < self.target_bler < 1.0:
            fail("target_bler", "must be within (0, 1)")
        if not 0.0 < self.tbs_overhead <= 1.0:
            fail("tbs_overhead", "must be within (0, 1]")
        if self.olla_min_db > self.olla_max_db:
            fail("olla_min_db", "must not exceed olla_max_db")
        if self.backhaul_visibility not in ("table", "los", "nlos"):
            fail("backhaul_visibility", "must be one of table, los, nlos")
        if self.ris_phase_bits is not None and self.ris_phase_bits < 1:
            fail("ris_phase_bits", "must be at least 1, or null for continuous phases")

    #%%

    @classmethod
    def from_mapping(cls, mapping):
        """
        Config from a mapping of sections to settings

        Raises
        ------
        ConfigError
            For unknown sections or keys and invalid values.
        """
        mapping = mapping or {}
        if not isinstance(mapping, dict):
            raise ConfigError("<root>", "config must be a mapping of sections")
        known = {item.name: item for item in fields(cls)}
        values = {}
        for section, settings in mapping.items():
            if section not in SECTIONS:
                raise ConfigError(str(section), "unknown section")
            if settings is None:
                continue
            if not isinstance(settings, dict):
                raise ConfigError(section, "section must be a mapping")
            for key, value in settings.items():
                item = known.get(key)
                if item is None or item.metadata["section"] != section:
                    raise ConfigError(f"{section}.{key}", "unknown key")
                values[key] = _coerce(f"{section}.{key}", key, value, item.default)
        return cls(**values)

    def to_mapping(self):
        """Nested mapping of sections, loadable by `from_mapping`"""
        mapping = {section: {} for section in SECTIONS}
        for item in fields(self):
            value = getattr(self, item.name)
            mapping[item.metadata["section"]][item.name] = list(value) if isinstance(value, tuple) else value
        return mapping

    def with_overrides(self, **overrides):
        """Copy with some settings changed, validated"""
        overrides = {key: value for key, value in overrides.items() if value is not None}
        return replace(self, **overrides)

    #%%

    @property
    def deployment_kinds(self):
        return [DeploymentKind.parse(name) for name in self.deployments]

    @property
    def slot_duration(self):
        return self.slot_duration_ms * 1e-3

    @property
    def prb_bandwidth_hz(self):
        return 12 * self.scs_khz * 1e3

    def slot_pattern(self):
        return SlotPattern(self.slot_duration, self.symbols_per_slot)

    def noise_mw(self):
        return noise_power_prb(self.noise_density_dbm_hz, 12, self.scs_khz * 1e3,
                               self.noise_figure_db)

    def grid(self):
        return GridGeometry(self.block_size, self.sidewalk_width, self.street_width,
                            self.n_blocks_traversed, max(5, self.n_blocks_traversed + 2))

    def scenario_params(self):
        gain = self.element_max_gain_dbi
        entities = {
            "gnb": EntityParams(25.0, self.gnb_tx_power_dbm, 8, 8, 1, 0.0, gain),
            "stationary": EntityParams(10.0, self.stationary_tx_power_dbm, 4, 4, 3, 0.0, gain),
            "ris": EntityParams(40.0, None, 8, 8, 1, 0.0, gain),
            "uav": EntityParams(40.0, self.uav_tx_power_dbm, 4, 4, 2, self.uav_speed_kmh, gain),
            "ue": EntityParams(1.5, self.ue_tx_power_dbm, 1, 1, 1, self.ue_speed_kmh, 0.0),
        }
        return ScenarioParams(entities, self.ues_per_street, self.ue_spacing,
                              uav_standoff=self.uav_standoff,
                              element_spacing=self.element_spacing)

    def channel_params(self):
        return ChannelParams(self.carrier_ghz, self.n_prbs, self.prb_bandwidth_hz,
                             self.n_nlos_rays, self.k_factor_db, self.temporal_correlation,
                             self.backhaul_visibility)

    def element_patterns(self):
        infrastructure = ElementPattern.infrastructure(self.element_max_gain_dbi)
        return {NodeKind.GNB: infrastructure, NodeKind.IAB: infrastructure,
                NodeKind.NCR: infrastructure, NodeKind.RIS: infrastructure,
                NodeKind.UE: ElementPattern.isotropic()}

    def ncr_config(self, power_dbm):
        return NcrConfig(self.ncr_gain_db, True,
                         power_dbm if self.ncr_max_power_dbm is None else self.ncr_max_power_dbm)

    def mcs_table(self):
        return default_mcs_table(self.bler_slope, self.target_bler)

    def bler_model(self):
        return BlerModel(self.mcs_table(), self.bler_slope, self.target_bler)

    def outer_loop(self):
        return OuterLoopState(0.0, self.olla_step_down_db, self.olla_step_up_db,
                              self.olla_min_db, self.olla_max_db)


def _coerce(key, name, value, default):
    """Convert a YAML value to the type of a setting's default"""
    try:
        if name == "deployments":
            names = [value] if isinstance(value, str) else list(value)
            if len(names) == 1 and str(names[0]).lower() == "all":
                return ALL_DEPLOYMENTS
            return tuple(DeploymentKind.parse(item).value for item in names)
        if name == "seeds":
            seeds = [value] if isinstance(value, int) else list(value)
            if any(isinstance(seed, bool) or int(seed) != seed for seed in seeds):
                raise ValueError("seeds must be integers")
            return tuple(int(seed) for seed in seeds)
        if value is None:
            return None
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ValueError(f"expected true or false, got {value!r}")
            return value
        if isinstance(default, int) or name in ("ris_phase_bits",):
            if isinstance(value, bool) or int(value) != value:
                raise ValueError(f"expected an integer, got {value!r}")
            return int(value)
        if isinstance(default, float) or name in ("ncr_max_power_dbm",):
            if isinstance(value, bool):
                raise ValueError(f"expected a number, got {value!r}")
            return float(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, str(exc)) from None


#%%

def load_config(path=None):
    """
    Read a YAML config file

    Parameters
    ----------
    path : str or Path, optional
        Missing or empty files give the default config.

    Raises
    ------
    ConfigError
        For malformed YAML or invalid settings.
    """
    if path is None:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as stream:
            mapping = yaml.safe_load(stream)
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"malformed YAML: {exc}") from None
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc.strerror}") from None
    config = RunConfig.from_mapping(mapping)
    logger.info("loaded config %s", path)
    return config


def dump_config(config, path=None):
    """Write `config` as YAML to `path`, and return the YAML text"""
    text = yaml.safe_dump(config.to_mapping(), sort_keys=False)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
