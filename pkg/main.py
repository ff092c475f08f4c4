#!/usr/bin/env python3
"""
Main entry point for the rebalancing laboratory.
Subcommands: fit, simulate, sweep, report (see --help).
"""

import sys

from rebalance_lab.ui.cli import main


if __name__ == "__main__":
    sys.exit(main())
