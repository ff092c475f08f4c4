"""Configuration loading and typed settings."""

from .manager import ConfigManager, build_section, override
from .settings import (
    DAY_TYPES,
    MINUTES_PER_DAY,
    SLICE_MINUTES,
    SLICES_PER_DAY,
    CacheConfig,
    CustomerConfig,
    LabSettings,
    ModelConfig,
    MpcConfig,
    RoutingConfig,
    SimConfig,
    SweepConfig,
    SyntheticSpec,
    parse_bool,
    parse_float,
)

__all__ = [
    'ConfigManager',
    'build_section',
    'override',
    'parse_bool',
    'parse_float',
    'DAY_TYPES',
    'MINUTES_PER_DAY',
    'SLICE_MINUTES',
    'SLICES_PER_DAY',
    'CacheConfig',
    'CustomerConfig',
    'LabSettings',
    'ModelConfig',
    'MpcConfig',
    'RoutingConfig',
    'SimConfig',
    'SweepConfig',
    'SyntheticSpec',
]
