import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from market import (DimensionMismatch, FractionalAllocation, IntegralAllocation, Market,
                    bundle_value)

logger = logging.getLogger(__name__)


class Notion(Enum):

    EF = "ef"           # Envy-free
    EF1 = "ef1"         # Envy-free up to removing one good from the envied bundle
    EF11 = "ef11"       # ... and adding one good to the envious bundle
    PROP = "prop"       # Proportional
    PROP1 = "prop1"     # Proportional up to adding one good


@dataclass(frozen=True)
class PairEvidence:
    """How agent `agent` sees agent `other`'s bundle."""

    agent: int
    other: int
    own_value: float                # v_i(x_i)
    other_value: float              # v_i(x_k)
    removed: Optional[int]          # Most valuable good of x_k for i
    added: Optional[int]            # Most valuable good outside x_i for i
    reduced_value: float            # v_i(x_k \ {removed})
    boosted_value: float            # v_i(x_i + {added})

    @property
    def envy_free(self) -> bool:
        return self.own_value >= self.other_value

    @property
    def ef1(self) -> bool:
        return self.removed is None or self.own_value >= self.reduced_value

    @property
    def ef11(self) -> bool:
        return self.removed is None or self.boosted_value >= self.reduced_value


@dataclass(frozen=True)
class ShareEvidence:

    agent: int
    own_value: float
    proportional_share: float       # v_i([m]) / n
    added: Optional[int]
    boosted_value: float

    @property
    def prop(self) -> bool:
        return self.own_value >= self.proportional_share

    @property
    def prop1(self) -> bool:
        return self.boosted_value >= self.proportional_share


@dataclass(frozen=True)
class FairnessProfile:

    ef: bool
    ef1: bool
    ef11: bool
    prop: bool
    prop1: bool
    pairs: Tuple[PairEvidence, ...]     # Every ordered pair with envy (EF fails)
    shares: Tuple[ShareEvidence, ...]   # One per agent

    def holds(self, notion: Notion) -> bool:
        return getattr(self, notion.value)


def _best_good(values: np.ndarray, goods) -> Optional[int]:
    # Highest value, lowest index on ties
    best = None
    for good in goods:
        if best is None or values[good] > values[best]:
            best = good
    return best


def _pair_evidence(market: Market, bundles, agent: int, other: int) -> PairEvidence:
    values = market.valuations[agent]
    own = bundles[agent]
    theirs = bundles[other]
    held = set(own)
    outside = [good for good in range(market.n_goods) if good not in held]

    removed = _best_good(values, theirs)
    added = _best_good(values, outside)

    # Sums are recomputed from the goods themselves, never by subtraction
    reduced = [good for good in theirs if good != removed]
    boosted = list(own) + ([added] if added is not None else [])
    return PairEvidence(
        agent=agent,
        other=other,
        own_value=bundle_value(market, agent, own),
        other_value=bundle_value(market, agent, theirs),
        removed=removed,
        added=added,
        reduced_value=bundle_value(market, agent, reduced),
        boosted_value=bundle_value(market, agent, boosted),
    )


def _share_evidence(market: Market, bundles, agent: int) -> ShareEvidence:
    values = market.valuations[agent]
    own = bundles[agent]
    held = set(own)
    outside = [good for good in range(market.n_goods) if good not in held]
    added = _best_good(values, outside)
    boosted = list(own) + ([added] if added is not None else [])

    grand = bundle_value(market, agent, range(market.n_goods))
    return ShareEvidence(
        agent=agent,
        own_value=bundle_value(market, agent, own),
        proportional_share=grand / market.n_agents,
        added=added,
        boosted_value=bundle_value(market, agent, boosted),
    )


def fairness_profile(market: Market, alloc: IntegralAllocation) -> FairnessProfile:
    """Evaluate EF, EF1, EF11, Prop and Prop1 of an integral allocation.

    Budgets play no part. Comparisons are exact on the given values.
    """
    if alloc.n_goods != market.n_goods or alloc.n_agents != market.n_agents:
        raise DimensionMismatch(
            f"Allocation of {alloc.n_goods} goods to {alloc.n_agents} agents does not fit "
            f"a market with {market.n_goods} goods and {market.n_agents} agents")

    bundles = alloc.bundles()
    envious = []
    ef = ef1 = ef11 = True
    for agent in range(market.n_agents):
        for other in range(market.n_agents):
            if agent == other:
                continue
            pair = _pair_evidence(market, bundles, agent, other)
            if pair.envy_free:
                continue
            envious.append(pair)
            ef = False
            ef1 = ef1 and pair.ef1
            ef11 = ef11 and pair.ef11

    shares = tuple(_share_evidence(market, bundles, agent) for agent in range(market.n_agents))
    profile = FairnessProfile(
        ef=ef,
        ef1=ef1,
        ef11=ef11,
        prop=all(share.prop for share in shares),
        prop1=all(share.prop1 for share in shares),
        pairs=tuple(envious),
        shares=shares,
    )
    logger.debug("Fairness: EF=%s EF1=%s EF11=%s Prop=%s Prop1=%s (%d envious pairs)",
                 profile.ef, profile.ef1, profile.ef11, profile.prop, profile.prop1, len(envious))
    return profile


def is_ef(market: Market, alloc: IntegralAllocation) -> bool:
    return fairness_profile(market, alloc).ef


def is_ef1(market: Market, alloc: IntegralAllocation) -> bool:
    return fairness_profile(market, alloc).ef1


def is_ef11(market: Market, alloc: IntegralAllocation) -> bool:
    return fairness_profile(market, alloc).ef11


def is_prop(market: Market, alloc: IntegralAllocation) -> bool:
    return fairness_profile(market, alloc).prop


def is_prop1(market: Market, alloc: IntegralAllocation) -> bool:
    return fairness_profile(market, alloc).prop1


def is_envy_free_fractional(market: Market, alloc: FractionalAllocation, rel_tol: float = 1e-5) -> bool:
    """Envy-freeness of a divisible allocation, with relative slack for solver noise.

    An equilibrium of an equal-budget market passes this check.
    """
    if alloc.shares.shape != market.valuations.shape:
        raise DimensionMismatch(f"Allocation shape {alloc.shares.shape} does not match market")
    # seen[i, k] = v_i(x_k)
    seen = market.valuations @ alloc.shares.T
    own = np.diag(seen)
    return bool(np.all(own[:, None] >= seen * (1 - rel_tol)))
