"""Typed settings for every laboratory component.

Each config section maps onto one frozen dataclass. Defaults carry the
constants of the reference study (truck capacity, horizons, cost ceiling);
anything the study leaves open has a documented default here.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

from ..core.errors import ConfigError

MINUTES_PER_DAY = 1440
SLICE_MINUTES = 20
SLICES_PER_DAY = MINUTES_PER_DAY // SLICE_MINUTES
DAY_TYPES = ("weekday", "weekend")


def parse_float(value) -> float:
    """Accept numbers and the strings ``inf`` / ``infinity``."""
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "infinity", "+inf"):
            return math.inf
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"not a number: {value!r}") from exc
    return float(value)


TRUE_WORDS = ("true", "yes", "on", "1")
FALSE_WORDS = ("false", "no", "off", "0")


def parse_bool(value) -> bool:
    """Accept booleans, 0/1 and the usual on/off words; anything else is an error."""
    if isinstance(value, bool):
        return value
    if isinstance(value, int) and value in (0, 1):
        return bool(value)
    if isinstance(value, str):
        text = value.strip().lower()
        if text in TRUE_WORDS:
            return True
        if text in FALSE_WORDS:
            return False
    raise ConfigError(f"not a boolean: {value!r}")


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic substitute corpus."""

    station_count: int = 50
    fleet_size: int = 500
    weekday_days: int = 10
    weekend_days: int = 10
    base_rate: float = 1.0            # departures per station-hour, 06:00-24:00
    morning_peak_height: float = 3.0  # multiple of the base rate at the peak
    morning_peak_hour: float = 8.25
    morning_peak_width: float = 0.9
    evening_peak_height: float = 3.0
    evening_peak_hour: float = 17.75
    evening_peak_width: float = 1.1
    gravity_sigma_km: float = 1.5
    radius_km: float = 3.0
    min_capacity: int = 10
    max_capacity: int = 30
    cycling_speed_kmh: float = 12.0
    center_lat: float = 51.5072
    center_lon: float = -0.1276
    epoch: str = "2010-07-26"
    seed: int = 7

    def validate(self):
        if self.station_count < 3:
            raise ConfigError("synthetic corpus needs at least 3 stations")
        if self.fleet_size < 0:
            raise ConfigError("fleet_size must be >= 0")
        if self.weekday_days < 0 or self.weekend_days < 0:
            raise ConfigError("day counts must be >= 0")
        if not 1 <= self.min_capacity <= self.max_capacity:
            raise ConfigError("capacity range must satisfy 1 <= min <= max")
        if self.base_rate < 0 or self.morning_peak_height < 0 or self.evening_peak_height < 0:
            raise ConfigError("rates and peak heights must be >= 0")


@dataclass(frozen=True)
class ModelConfig:
    epoch: str = "2010-07-26"
    neighbor_count: int = 10
    bbox_padding_km: float = 0.5
    utility_horizon: int = MINUTES_PER_DAY
    cross_check_plateaus: bool = False

    def validate(self):
        if self.neighbor_count < 1:
            raise ConfigError("neighbor_count must be >= 1")
        if self.utility_horizon < 1:
            raise ConfigError("utility_horizon must be >= 1")


@dataclass(frozen=True)
class CustomerConfig:
    c_max: float = 20.0     # GBP per km
    p_max: float = 5.0      # GBP, payout box used for the linear fit
    samples: int = 500      # payout vectors per station (P)
    customers: int = 400    # customers per payout vector (C)
    seed: int = 0

    def validate(self):
        if self.c_max <= 0:
            raise ConfigError("c_max must be > 0")
        if self.p_max < 0:
            raise ConfigError("p_max must be >= 0")
        if self.samples < 1 or self.customers < 1:
            raise ConfigError("samples and customers must be >= 1")


@dataclass(frozen=True)
class RoutingConfig:
    l_max: int = 20
    n_truck: int = 4
    t_truck: int = 40
    t_impl: int = 30
    speed_kmh: float = 15.0
    step_minutes: int = 5
    branching: int = 3
    l_depot: int = 10
    window_start: int = 8 * 60
    window_end: int = 22 * 60
    depot: Optional[int] = None     # station id; nearest to the centroid when unset
    q: Optional[float] = None
    refine_candidates: int = 16     # leaves refined by QP per search; 0 refines all

    @property
    def q_scale(self) -> float:
        return self.q if self.q is not None else 10.0 * (2 * self.l_max ** 2 + 1)

    @property
    def km_per_step(self) -> float:
        return self.speed_kmh * self.step_minutes / 60.0

    def validate(self):
        if self.branching < 1:
            raise ConfigError("branching (K) must be >= 1")
        if not 0 < self.l_depot <= self.l_max:
            raise ConfigError("l_depot must satisfy 0 < l_depot <= l_max")
        if self.t_impl > max(self.t_truck, self.n_truck * self.step_minutes):
            raise ConfigError("t_impl must not exceed the planning horizon")
        if not 0 <= self.window_start < self.window_end <= MINUTES_PER_DAY:
            raise ConfigError("operating window must lie within one day")
        if self.n_truck < 2:
            raise ConfigError("n_truck must be >= 2 (root plus one stop)")
        if self.refine_candidates < 0:
            raise ConfigError("refine_candidates must be >= 0")


@dataclass(frozen=True)
class MpcConfig:
    alpha: float = 0.1
    p_max: float = 5.0
    horizon: int = 6
    step_minutes: int = 20
    plateau_floor: float = 0.5
    r_floor: float = 1e-6
    tol: float = 1e-6
    max_iter: int = 20000

    @property
    def enabled(self) -> bool:
        return math.isfinite(self.alpha)

    def validate(self):
        if not self.alpha > 0:
            raise ConfigError("alpha must be > 0 (use inf to disable prices)")
        if not self.p_max > 0:
            raise ConfigError("p_max must be > 0")
        if self.horizon < 1:
            raise ConfigError("horizon (T_price) must be >= 1")
        if self.step_minutes < 1:
            raise ConfigError("control step must be >= 1 minute")


@dataclass(frozen=True)
class SimConfig:
    day_type: str = "weekday"
    burn_in_days: int = 1
    measured_days: int = 3
    trucks: int = 0
    alpha: float = math.inf
    seed: int = 1
    trucks_on: bool = True
    prices_on: bool = True
    count_diverted_full: bool = True

    @property
    def day_types(self) -> Tuple[str, ...]:
        return (self.day_type,) * (self.burn_in_days + self.measured_days)

    @property
    def horizon_minutes(self) -> int:
        return self.measured_days * MINUTES_PER_DAY

    @property
    def uses_trucks(self) -> bool:
        return self.trucks_on and self.trucks > 0

    @property
    def uses_prices(self) -> bool:
        return self.prices_on and math.isfinite(self.alpha)

    def validate(self):
        if self.day_type not in DAY_TYPES:
            raise ConfigError(f"day_type must be one of {DAY_TYPES}")
        if self.measured_days < 1:
            raise ConfigError("measured horizon must be > 0")
        if self.burn_in_days < 0:
            raise ConfigError("burn_in_days must be >= 0")
        if self.trucks < 0:
            raise ConfigError("truck count must be >= 0")
        if not self.alpha > 0:
            raise ConfigError("alpha must be > 0 (use inf to disable prices)")


@dataclass(frozen=True)
class SweepConfig:
    trucks: Tuple[int, ...] = (0, 1, 2, 3)
    alphas: Tuple[float, ...] = (math.inf, 0.1)
    seeds: Tuple[int, ...] = tuple(range(1, 21))
    day_types: Tuple[str, ...] = ("weekday",)
    jobs: int = 1

    def validate(self):
        if not self.trucks or not self.alphas or not self.seeds or not self.day_types:
            raise ConfigError("sweep grid must be nonempty")
        for day_type in self.day_types:
            if day_type not in DAY_TYPES:
                raise ConfigError(f"unknown day type {day_type!r}")


@dataclass(frozen=True)
class CacheConfig:
    directory: str = ".cache"


@dataclass(frozen=True)
class LabSettings:
    corpus: SyntheticSpec = field(default_factory=SyntheticSpec)
    model: ModelConfig = field(default_factory=ModelConfig)
    customer: CustomerConfig = field(default_factory=CustomerConfig)
    routing: RoutingConfig = field(default_factory=RoutingConfig)
    pricing: MpcConfig = field(default_factory=MpcConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    cache: CacheConfig = field(default_factory=CacheConfig)
    log_level: str = "INFO"

    def validate(self):
        for section in (self.corpus, self.model, self.customer, self.routing,
                        self.pricing, self.sim, self.sweep):
            section.validate()
        return self
