from market import MarketError


class TooLarge(MarketError):
    """An exhaustive search would exceed its enumeration guard."""


from .partition import (PARTITION_GUARD, PartitionInstance, has_equal_split, partition_equilibrium,
                        partition_market, purity_oracle_partition_family)
from .pareto import ALLOCATION_GUARD, brute_force_integral_po
from .comparative import (comparative_expected_prices, comparative_instance,
                          comparative_perturbation_bound, comparative_threshold)

__all__ = [
    'TooLarge',
    'PartitionInstance', 'PARTITION_GUARD', 'partition_market', 'partition_equilibrium',
    'purity_oracle_partition_family', 'has_equal_split',
    'ALLOCATION_GUARD', 'brute_force_integral_po',
    'comparative_instance', 'comparative_threshold', 'comparative_expected_prices',
    'comparative_perturbation_bound',
]
