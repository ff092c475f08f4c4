"""rebalance-lab - a laboratory for bike-sharing rebalancing with trucks and customer incentives."""

__version__ = "1.0.0"
__description__ = "Simulation laboratory for truck repositioning and payout incentives in bike-sharing systems"

# Core exports
from .core import ConfigError, DataError, LabError
from .core.facade import RebalancingLab

# Config exports
from .config import ConfigManager, LabSettings

# Model exports
from .model import ModelBundle, Plateau, PlateauTable

# Simulation exports
from .sim import SimReport, Simulator

__all__ = [
    # Core
    'RebalancingLab',
    'LabError',
    'ConfigError',
    'DataError',

    # Config
    'ConfigManager',
    'LabSettings',

    # Model
    'ModelBundle',
    'Plateau',
    'PlateauTable',

    # Simulation
    'SimReport',
    'Simulator',
]
