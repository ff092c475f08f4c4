"""RebalancingLab facade: one object that wires corpus, models, controllers and simulation."""

import dataclasses
import logging
import os
from dataclasses import asdict
from typing import Iterable, Optional, Tuple

import pandas as pd

from ..config.manager import ConfigManager
from ..config.settings import LabSettings, SimConfig
from ..data.corpus import Corpus
from ..data.synthetic import generate_synthetic
from ..model.bundle import ModelBundle, cache_keys, fit_models, load_or_fit
from ..model.demand import DemandTimeline
from ..model.utility import Plateau, PlateauTable
from ..sim.simulator import SimReport, Simulator
from ..sim.sweep import aggregate, run_sweep
from ..utils.cache import ModelCache
from ..utils.helpers import file_digest, params_digest

logger = logging.getLogger(__name__)

CORPUS_FILES = ("stations.csv", "rides.csv", "snapshot.json")


class RebalancingLab:
    """Facade over the laboratory: load or generate a corpus, fit, simulate, sweep."""

    def __init__(self, settings: Optional[LabSettings] = None, config_path: Optional[str] = None,
                 corpus_dir: Optional[str] = None):
        if settings is None:
            settings = ConfigManager(config_path or "config.json").get_settings()
        self.settings = settings
        self.corpus_dir = corpus_dir
        self._corpus: Optional[Corpus] = None
        self._bundle: Optional[ModelBundle] = None
        self.cache_hit = False

    @property
    def corpus(self) -> Corpus:
        if self._corpus is None:
            if self.corpus_dir:
                paths = [os.path.join(self.corpus_dir, name) for name in CORPUS_FILES]
                self._corpus = Corpus.load(*paths, epoch=self.settings.model.epoch)
            else:
                self._corpus = generate_synthetic(self.settings.corpus)
        return self._corpus

    @property
    def corpus_digest(self) -> str:
        if self.corpus_dir:
            return file_digest(os.path.join(self.corpus_dir, name) for name in CORPUS_FILES)
        return params_digest({"synthetic": asdict(self.settings.corpus)})

    def is_fitted(self) -> bool:
        """Whether every model artifact for the current corpus and settings is cached."""
        cache = ModelCache(self.settings.cache.directory)
        keys = cache_keys(self.corpus_digest, self.settings.model, self.settings.customer)
        return all(cache.has(kind, digest) for kind, digest in keys.items())

    def fit(self, jobs: int = 1, use_cache: bool = True) -> Tuple[ModelBundle, bool]:
        """Fit (or load) rates, geometry and the linear customer response."""
        if use_cache:
            cache = ModelCache(self.settings.cache.directory)
            self._bundle, self.cache_hit = load_or_fit(self.corpus, self.corpus_digest, cache,
                                                       self.settings.model, self.settings.customer, jobs)
        else:
            self._bundle = fit_models(self.corpus, self.settings.model, self.settings.customer, jobs)
            self.cache_hit = False
        return self._bundle, self.cache_hit

    @property
    def bundle(self) -> ModelBundle:
        if self._bundle is None:
            self.fit()
        return self._bundle

    def simulate(self, sim: Optional[SimConfig] = None, event_log: Optional[str] = None) -> SimReport:
        simulator = Simulator(self.bundle, self.settings, sim or self.settings.sim)
        report = simulator.run()
        if event_log:
            simulator.write_events(event_log)
        return report

    def sweep(self, out_path: Optional[str] = None, resume: bool = False) -> Tuple[pd.DataFrame, pd.DataFrame]:
        """Run the configured grid; returns the per-run table and its aggregate."""
        runs = run_sweep(self.bundle, self.settings, out_path, self.settings.sweep, resume)
        return runs, aggregate(runs)

    def plateau_table(self, day_type: Optional[str] = None, days: int = 1) -> PlateauTable:
        day_type = day_type or self.settings.sim.day_type
        timeline = DemandTimeline(self.bundle.rates, (day_type,) * days)
        return PlateauTable(timeline, self.bundle.capacity, self.settings.model.utility_horizon,
                            self.bundle.station_ids, self.settings.model.cross_check_plateaus)

    def station_plateau(self, station_id: int, minute: int, day_type: Optional[str] = None) -> Plateau:
        position = self.bundle.stations.position(station_id)
        return self.plateau_table(day_type).plateau(position, minute)

    def dump_plateaus(self, path: str, minutes: Iterable[int], day_type: Optional[str] = None):
        self.plateau_table(day_type).dump_csv(path, minutes)

    def with_sim(self, **changes) -> SimConfig:
        """The configured simulation settings with ``changes`` applied."""
        return dataclasses.replace(self.settings.sim, **{k: v for k, v in changes.items() if v is not None})
