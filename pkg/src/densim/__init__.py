"""
The densim ("densification simulator") package is a slot-level system
simulator for millimetre-wave networks densified with integrated access and
backhaul (IAB) nodes, network-controlled repeaters (NCRs) and reconfigurable
intelligent surfaces (RISs), stationary or carried by UAVs.

Eight UEs drive along two streets of a Manhattan grid served by two gNBs.
Each simulation run places one deployment, moves UEs and UAVs every 0.25 ms
slot, schedules PRBs round robin under TDD, computes per-PRB SINR for every
scheduled link and adapts its MCS with an outer loop.  Runs write SINR and
throughput CDFs, Jain's fairness index and MCS histograms as CSV files.

Command line interface entrypoints
----------------------------------
campaign
    Run every (deployment, seed) pair of a YAML config, write per-run
    statistics and a summary comparing deployments at the 10th, 50th and
    90th percentiles.  Also installed as the `densim` console script.


Modules (exported by the package)
---------------------------------
base
    Deployment, node and chain kinds, and exception types.

dutils
    Unit conversions and seeded random streams.

scenario
    Street grid, node placement, mobility and UE association.

antenna
    Element pattern, planar array responses and beam codebooks.

channel
    Path loss, shadowing, link classes and ray-based MIMO channels.

phy
    Noise, NCR and RIS gains, and per-PRB SINR of every architecture.

mac
    TDD slots, round-robin scheduling, MCS selection, BLER and outer loop.

metrics
    CDFs, percentiles, Jain's index and MCS histograms.

config
    Run configuration and YAML config files.

simulate
    Slot engine of one simulation run.


Subpackages (not exported)
--------------------------
campaign
    Run campaigns and write their results
"""

from . import (base, dutils, antenna, scenario, channel, phy, mac,
               metrics, config, simulate)

__all__ = ["base", "dutils", "antenna", "scenario", "channel", "phy", "mac",
           "metrics", "config", "simulate"]
