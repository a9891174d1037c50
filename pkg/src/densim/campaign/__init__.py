"""
Run simulation campaigns and write their statistics

This sub-package provides a module that can be imported as a Python
module, and a command line interface entry point.


Application program interface
-----------------------------
>>> import densim.campaign


Command line interface
----------------------
> python -m densim.campaign --help
"""

# Export names from .campaign.campaign.
from .campaign import run_campaign, run_one, summary_table, validate_config

__all__ = ["run_campaign", "run_one", "summary_table", "validate_config"]
