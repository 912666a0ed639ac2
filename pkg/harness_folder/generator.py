import logging
from dataclasses import dataclass

import numpy as np

from market import Market

logger = logging.getLogger(__name__)

MAX_LEVELS = 10         # Largest value set: 2^1 ... 2^512
EXACT_LEVELS = 6        # Up to 2^32 every bundle sum stays exact in float64


@dataclass(frozen=True)
class GeneratorConfig:

    n_agents: int = 2
    goods_factor: int = 5               # m = goods_factor * n
    seed: int = 0
    value_exponent_levels: int = 5      # K: values drawn from {2^(2^(k-1)) : k = 1..K}
    trials: int = 100

    def __post_init__(self):
        if self.n_agents < 1:
            raise ValueError(f"n_agents must be at least 1, got {self.n_agents}")
        if self.goods_factor < 1:
            raise ValueError(f"goods_factor must be at least 1, got {self.goods_factor}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        if not 1 <= self.value_exponent_levels <= MAX_LEVELS:
            raise ValueError(f"value_exponent_levels must lie in [1, {MAX_LEVELS}], "
                             f"got {self.value_exponent_levels}")
        if self.trials < 0:
            raise ValueError(f"trials must be non-negative, got {self.trials}")
        if self.value_exponent_levels > EXACT_LEVELS:
            logger.warning("With %d value levels bundle sums are no longer exact in floating point",
                           self.value_exponent_levels)

    @property
    def n_goods(self) -> int:
        return self.goods_factor * self.n_agents


def value_set(levels: int) -> np.ndarray:
    return 2.0 ** (2.0 ** np.arange(levels))


def generate_instance(config: GeneratorConfig, trial: int) -> Market:
    """Equal-income market with i.i.d. valuations drawn uniformly from the value set.

    The stream depends only on (seed, n_agents, trial).
    """
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, config.n_agents, trial]))
    values = value_set(config.value_exponent_levels)
    valuations = rng.choice(values, size=(config.n_agents, config.n_goods))
    logger.debug("Generated trial %d: %d agents, %d goods", trial, config.n_agents, config.n_goods)
    return Market(valuations, np.ones(config.n_agents))
