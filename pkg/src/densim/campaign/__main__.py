"""
Entry point for command line interface to `campaign` sub-module
"""

import sys
from densim.campaign.xpcampaign import main

sys.exit(main())
