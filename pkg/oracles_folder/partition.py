import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from market import (EXACT, IntegralAllocation, InvalidMarket, Market, PriceVector,
                    check_equilibrium)
from . import TooLarge

logger = logging.getLogger(__name__)

PARTITION_GUARD = 24    # Most goods enumerated by the purity oracle

Split = Tuple[Tuple[int, ...], Tuple[int, ...]]


@dataclass(frozen=True)
class PartitionInstance:
    """A multiset of positive integers to split into two halves of equal sum."""

    values: Tuple[int, ...]

    def __post_init__(self):
        values = tuple(int(value) for value in self.values)
        if not values:
            raise InvalidMarket("A partition instance needs at least one value")
        if any(value < 1 for value in values):
            raise InvalidMarket(f"Partition values must be positive integers, got {list(values)}")
        object.__setattr__(self, "values", values)

    @property
    def total(self) -> int:
        return sum(self.values)

    def __len__(self) -> int:
        return len(self.values)


def partition_market(instance: PartitionInstance) -> Market:
    """Two agents with identical valuations s_j and budgets of half the total each."""
    values = list(instance.values)
    half = instance.total / 2
    return Market([values, values], [half, half])


def partition_equilibrium(instance: PartitionInstance,
                          witness: Split) -> Tuple[IntegralAllocation, PriceVector]:
    """Integral equilibrium of the reduction market for an equal-sum split: prices equal values."""
    first, second = witness
    if sorted(first + second) != list(range(len(instance))):
        raise InvalidMarket(f"Split {witness} does not cover goods 0..{len(instance) - 1} exactly once")
    alloc = IntegralAllocation.from_bundles([first, second], len(instance))
    return alloc, PriceVector(list(instance.values))


def _find_split(values: Sequence[int]) -> Optional[Split]:
    # Good 0 always sits in the first half; masks run over goods 1..m-1 in increasing order
    total = sum(values)
    if total % 2:
        return None
    half = total // 2
    rest = len(values) - 1

    for mask in range(1 << rest):
        first = [0] + [good + 1 for good in range(rest) if mask & (1 << good)]
        if sum(values[good] for good in first) == half:
            chosen = set(first)
            second = [good for good in range(len(values)) if good not in chosen]
            return tuple(first), tuple(second)
    return None


def purity_oracle_partition_family(instance: PartitionInstance,
                                   guard: int = PARTITION_GUARD) -> Tuple[bool, Optional[Split]]:
    """Decide whether the reduction market of `instance` has an integral equilibrium.

    The witness is the lexicographically first equal-sum split; its integral
    equilibrium is built and checked exactly before it is returned.
    """
    if len(instance) > guard:
        raise TooLarge(f"{len(instance)} values exceed the enumeration guard of {guard}")

    witness = _find_split(instance.values)
    if witness is None:
        logger.debug("No equal-sum split of %s", list(instance.values))
        return False, None

    market = partition_market(instance)
    alloc, prices = partition_equilibrium(instance, witness)
    report = check_equilibrium(market, alloc.to_fractional(), prices, EXACT)
    if not report.is_equilibrium:
        raise RuntimeError(f"Split {witness} does not give an integral equilibrium: {report.summary()}")
    logger.debug("Split %s of %s is an integral equilibrium", witness, list(instance.values))
    return True, witness


def has_equal_split(values: Sequence[int]) -> bool:
    """Reachable-sums search for an equal-sum 2-partition."""
    total = sum(values)
    if total % 2:
        return False
    reachable = {0}
    for value in values:
        reachable |= {reached + value for reached in reachable}
    return total // 2 in reachable
