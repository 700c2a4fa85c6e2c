import logging
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Any, Literal

import numpy as np
from pydantic import ValidationError

from bnpl.config import ChainConfig, DynamicConfig, RunConfig, SimulationConfig
from bnpl.data_io import dataset_from_lists, static_truth
from bnpl.dynamic_model import run_dynamic_gibbs, simulate_dynamic_dataset
from bnpl.errors import ConfigurationError
from bnpl.models import (
    GammaProcessParams,
    PartialRanking,
    PosteriorChain,
    RankingDataset,
)
from bnpl.static_model import run_static_gibbs, simulate_static_dataset

logger = logging.getLogger(__name__)


def _fit_static(
    rankings: list[PartialRanking],
    config: ChainConfig,
    seed: np.random.SeedSequence,
) -> PosteriorChain:
    return run_static_gibbs(rankings, config, np.random.default_rng(seed))


def _fit_dynamic(
    epochs: list[list[PartialRanking]],
    config: DynamicConfig,
    seed: np.random.SeedSequence,
) -> PosteriorChain:
    return run_dynamic_gibbs(epochs, config, np.random.default_rng(seed))


class RankingClient:
    """Fits one `RunConfig` to ranking datasets, one process per chain."""

    def __init__(
        self,
        config: RunConfig | None = None,
        *,
        max_workers: int | None = None,
        **overrides: Any,
    ):
        """
        Initialize the client.

        Args:
            config: Pre-built RunConfig (overrides individual settings)
            max_workers: Process pool size (defaults to the number of chains)
            **overrides: RunConfig fields, used when ``config`` is not given
        """
        if config:
            self._cfg = config
        else:
            try:
                self._cfg = RunConfig(**overrides)
            except ValidationError as e:
                raise ConfigurationError(
                    "invalid run configuration",
                    error_code="invalid_run_config",
                    details=e.errors(include_url=False),
                ) from e
        self._max_workers = max_workers or self._cfg.chains
        self._executor: ProcessPoolExecutor | None = None

    @property
    def config(self) -> RunConfig:
        """Access the configuration object."""
        return self._cfg

    def chain_seeds(self) -> list[np.random.SeedSequence]:
        """Independent streams for each chain, all derived from ``config.seed``."""
        return np.random.SeedSequence(self._cfg.seed).spawn(self._cfg.chains)

    def _map(self, task: Any, seeds: list[np.random.SeedSequence]) -> list[Any]:
        if len(seeds) == 1:
            return [task(seeds[0])]
        if self._executor is None:
            self._executor = ProcessPoolExecutor(max_workers=self._max_workers)
        return list(self._executor.map(task, seeds))

    def fit(self, dataset: RankingDataset) -> list[PosteriorChain]:
        """Run ``config.chains`` chains; results come back in chain order."""
        seeds = self.chain_seeds()
        logger.info(
            "fitting %s model: %d chains over %d epochs",
            self._cfg.model,
            len(seeds),
            dataset.n_epochs,
        )
        if self._cfg.model == "static":
            task = partial(
                _fit_static, dataset.all_rankings(), self._cfg.to_chain_config()
            )
        else:
            task = partial(
                _fit_dynamic,
                [list(lists) for lists in dataset.lists],
                self._cfg.to_dynamic_config(dataset.gaps),
            )
        return self._map(task, seeds)

    def close(self) -> None:
        """Shut down the worker pool."""
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None

    # context-manager sugar
    def __enter__(self):
        return self

    def __exit__(self, *_):
        self.close()


def simulate(
    model: Literal["static", "dynamic"],
    config: SimulationConfig,
    params: GammaProcessParams,
    rng: np.random.Generator,
) -> tuple[RankingDataset, dict[str, Any]]:
    """Synthetic dataset plus a JSON-ready description of the measures behind it.

    A static dataset puts each of its ``config.epochs`` lists in its own epoch
    so the CSV stays one list per epoch.
    """
    if model == "static":
        rankings, measure = simulate_static_dataset(
            params, config.epochs, config.list_length, rng
        )
        dataset = dataset_from_lists([[r] for r in rankings])
        return dataset, static_truth(params, measure)
    epochs, truth = simulate_dynamic_dataset(config, params, rng)
    gaps = config.gaps if config.xi is not None else ()
    return dataset_from_lists(epochs, gaps), truth.to_json_dict()
