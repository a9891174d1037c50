"""
base
----
Shared enumerations and exception types for the densification simulator

Classes
-------
DeploymentKind
    The six network deployments compared by a campaign.

NodeKind
    Kind of network entity (gNB, IAB node, NCR, RIS, UE).

ChainKind
    How a UE is served: directly, or through an IAB node, NCR or RIS.

Direction
    TDD link direction of a slot.

Outcome
    HARQ feedback for a transport block.

DensimError, ConfigError, ScenarioError, ChainMismatchError, DimensionError
    Exception hierarchy.
"""

#%%

from enum import Enum

#%%

class DeploymentKind(str, Enum):
    """
    Network deployment of one simulation run

    Values are the names used in config files and on the command line.
    """
    MACRO_ONLY = "macro_only"
    STATIONARY_IAB = "stationary_iab"
    STATIONARY_NCR = "stationary_ncr"
    STATIONARY_RIS = "stationary_ris"
    UAV_IAB = "uav_iab"
    UAV_NCR = "uav_ncr"

    @classmethod
    def parse(cls, name):
        """
        Look up a deployment by config name, case-insensitive

        Raises
        ------
        ValueError
            If `name` is not one of the six deployment names.
        """
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            names = ", ".join(kind.value for kind in cls)
            raise ValueError(f"unknown deployment '{name}' (expected one of {names})") from None

    @property
    def relay_kind(self):
        """NodeKind of the auxiliary nodes, or None for macro only"""
        return {
            DeploymentKind.MACRO_ONLY: None,
            DeploymentKind.STATIONARY_IAB: NodeKind.IAB,
            DeploymentKind.STATIONARY_NCR: NodeKind.NCR,
            DeploymentKind.STATIONARY_RIS: NodeKind.RIS,
            DeploymentKind.UAV_IAB: NodeKind.IAB,
            DeploymentKind.UAV_NCR: NodeKind.NCR,
        }[self]

    @property
    def uav(self):
        """True if the auxiliary nodes are UAV-mounted"""
        return self in (DeploymentKind.UAV_IAB, DeploymentKind.UAV_NCR)


class NodeKind(str, Enum):
    GNB = "gnb"
    IAB = "iab"
    NCR = "ncr"
    RIS = "ris"
    UE = "ue"


class ChainKind(str, Enum):
    DIRECT = "direct"
    IAB = "iab"
    NCR = "ncr"
    RIS = "ris"


class Direction(str, Enum):
    DL = "dl"
    UL = "ul"


class Outcome(str, Enum):
    ACK = "ack"
    NACK = "nack"


#%%

class DensimError(Exception):
    """Root of the package's exceptions"""


class ConfigError(DensimError, ValueError):
    """
    Invalid configuration value

    Parameters
    ----------
    key : str
        Dotted `section.key` name of the offending setting.
    message : str
        What is wrong with it.
    """

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class ScenarioError(DensimError, ValueError):
    """Invalid geometry, layout or deployment request"""


class ChainMismatchError(DensimError, ValueError):
    """SINR requested for a serving chain the UE is not using"""


class DimensionError(DensimError, ValueError):
    """Matrix or beam dimensions do not conform"""
