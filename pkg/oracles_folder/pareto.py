import logging
from itertools import islice, product
from typing import Optional, Tuple

import numpy as np

from market import DimensionMismatch, IntegralAllocation, Market, UNASSIGNED
from . import TooLarge

logger = logging.getLogger(__name__)

ALLOCATION_GUARD = 10 ** 6      # Most complete allocations enumerated
BATCH_CELLS = 1 << 22           # Agent-good cells evaluated per batch


def _utilities(market: Market, owners: np.ndarray) -> np.ndarray:
    # owners: (batch, m) -> utilities: (batch, n)
    agents = np.arange(market.n_agents)
    held = owners[:, None, :] == agents[None, :, None]
    return (held * market.valuations[None, :, :]).sum(axis=2)


def brute_force_integral_po(market: Market, alloc: IntegralAllocation,
                            guard: int = ALLOCATION_GUARD,
                            rel_tol: float = 0.0) -> Tuple[bool, Optional[IntegralAllocation]]:
    """Search every complete integral allocation for one that Pareto-dominates `alloc`.

    Returns (dominated, dominator), the dominator being the first in
    lexicographic owner order. `rel_tol` asks for a strict gain larger
    than that fraction of an agent's current value.
    """
    if alloc.n_goods != market.n_goods or alloc.n_agents != market.n_agents:
        raise DimensionMismatch("Allocation does not fit the market")
    n, m = market.n_agents, market.n_goods
    if n ** m > guard:
        raise TooLarge(f"{n}^{m} allocations exceed the enumeration guard of {guard}")

    owner = alloc.owner
    base = np.array([market.valuations[agent, owner == agent].sum() for agent in range(n)])
    if np.any(owner == UNASSIGNED):
        logger.debug("Allocation leaves %d goods unassigned", int((owner == UNASSIGNED).sum()))
    slack = rel_tol * np.abs(base)

    candidates = product(range(n), repeat=m)
    batch_size = max(1, BATCH_CELLS // (n * m))
    while True:
        batch = list(islice(candidates, batch_size))
        if not batch:
            break
        owners = np.array(batch, dtype=int).reshape(len(batch), m)
        utilities = _utilities(market, owners)
        weakly = np.all(utilities >= base - slack, axis=1)
        strictly = np.any(utilities > base + slack, axis=1)
        hits = np.flatnonzero(weakly & strictly)
        if hits.size:
            dominator = IntegralAllocation(owners[hits[0]], n)
            logger.debug("Allocation %s is dominated by %s", owner.tolist(), dominator.owner.tolist())
            return True, dominator
    return False, None
