"""Fitted models of one corpus, with digest-keyed caching."""

import logging
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from ..config.settings import CustomerConfig, ModelConfig
from ..data.corpus import Corpus
from ..data.records import StationTable
from ..utils.cache import ModelCache
from ..utils.helpers import params_digest
from .customer import LinearResponse, fit_linear_response
from .demand import RateModel, fit_rates
from .geometry import Geometry, build_geometry

logger = logging.getLogger(__name__)


@dataclass
class ModelBundle:
    """Rate model, geometry and linear customer response of a station network."""

    stations: StationTable
    rates: RateModel
    geometry: Geometry
    response: LinearResponse
    initial_fills: np.ndarray

    @property
    def capacity(self) -> np.ndarray:
        return self.stations.capacity

    @property
    def station_ids(self) -> np.ndarray:
        return self.stations.ids

    @property
    def fleet_size(self) -> int:
        return int(self.initial_fills.sum())


def cache_keys(corpus_digest: str, model: ModelConfig, customer: CustomerConfig) -> Dict[str, str]:
    """Digest of every cached artifact; each includes the parameters it depends on."""
    rates = params_digest({"corpus": corpus_digest, "epoch": model.epoch})
    geometry = params_digest({"corpus": corpus_digest, "neighbors": model.neighbor_count,
                              "padding": model.bbox_padding_km})
    response = params_digest({"geometry": geometry, **asdict(customer)})
    return {"rates": rates, "geometry": geometry, "response": response}


def fit_models(corpus: Corpus, model: Optional[ModelConfig] = None, customer: Optional[CustomerConfig] = None,
               jobs: int = 1) -> ModelBundle:
    model = model or ModelConfig()
    customer = customer or CustomerConfig()
    rides = corpus.ride_arrays()
    rates = fit_rates(rides, len(corpus.stations), corpus.calendar)
    geometry = build_geometry(corpus.stations, rides, model)
    response = fit_linear_response(geometry, customer, jobs=jobs)
    return ModelBundle(corpus.stations, rates, geometry, response, corpus.stations.fill_vector(corpus.snapshot))


def load_or_fit(corpus: Corpus, corpus_digest: str, cache: ModelCache, model: Optional[ModelConfig] = None,
                customer: Optional[CustomerConfig] = None, jobs: int = 1) -> Tuple[ModelBundle, bool]:
    """Read every artifact from ``cache`` or fit and store the missing ones.

    Returns the bundle and whether all three artifacts were cache hits.
    """
    model = model or ModelConfig()
    customer = customer or CustomerConfig()
    keys = cache_keys(corpus_digest, model, customer)
    cache.prepare()
    hits = {kind: cache.has(kind, digest) for kind, digest in keys.items()}

    rides = None
    if hits["rates"]:
        rates = RateModel.load(cache.path("rates", keys["rates"]))
    else:
        rides = corpus.ride_arrays()
        rates = fit_rates(rides, len(corpus.stations), corpus.calendar)
        rates.save(cache.path("rates", keys["rates"]))

    if hits["geometry"]:
        geometry = Geometry.load(cache.path("geometry", keys["geometry"]))
    else:
        rides = rides if rides is not None else corpus.ride_arrays()
        geometry = build_geometry(corpus.stations, rides, model)
        geometry.save(cache.path("geometry", keys["geometry"]))

    if hits["response"]:
        response = LinearResponse.load(cache.path("response", keys["response"]))
    else:
        response = fit_linear_response(geometry, customer, jobs=jobs)
        response.save(cache.path("response", keys["response"]))

    hit = all(hits.values())
    logger.info("Model cache %s (%s)", "hit" if hit else "updated",
                ", ".join(f"{k}={'hit' if v else 'fit'}" for k, v in hits.items()))
    bundle = ModelBundle(corpus.stations, rates, geometry, response, corpus.stations.fill_vector(corpus.snapshot))
    return bundle, hit
