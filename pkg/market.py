import logging
from dataclasses import dataclass
from typing import FrozenSet, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

UNASSIGNED = -1         # Owner marker for a good nobody holds
SHARE_SLACK = 1e-7      # Round-off accepted on shares and column sums


class MarketError(ValueError):
    """Base class for malformed markets, allocations and documents."""


class InvalidMarket(MarketError):
    pass


class InvalidAllocation(MarketError):
    pass


class DimensionMismatch(MarketError):
    pass


class IndexOutOfRange(MarketError, IndexError):
    pass


class UnboundedMBB(MarketError):
    pass


class DegeneratePrices(MarketError):
    pass


class ZeroBundleValue(MarketError):
    pass


@dataclass(frozen=True)
class ToleranceConfig:

    abs: float = 1e-7       # Absolute slack on clearing and spending
    rel: float = 1e-5       # Relative slack on budgets and bang-per-buck ratios
    spend: float = 1e-9     # Shares at or below this count as "not spent on"

    def __post_init__(self):
        for name in ("abs", "rel", "spend"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"Tolerance '{name}' must be a finite non-negative number, got {value}")

    def budget_slack(self, budget):
        """Allowed gap between a budget and the money spent against it."""
        return self.abs + self.rel * budget


EXACT = ToleranceConfig(abs=0.0, rel=0.0, spend=0.0)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Market:
    """A Fisher market: valuations (agents x goods) and one budget per agent."""

    valuations: np.ndarray
    budgets: np.ndarray

    def __post_init__(self):
        valuations = np.array(self.valuations, dtype=float)
        budgets = np.array(self.budgets, dtype=float)

        if valuations.ndim != 2 or valuations.shape[0] < 1 or valuations.shape[1] < 1:
            raise InvalidMarket(f"Valuations must be a non-empty matrix, got shape {valuations.shape}")
        if budgets.shape != (valuations.shape[0],):
            raise InvalidMarket(
                f"Expected {valuations.shape[0]} budgets, got shape {budgets.shape}")
        if not np.all(np.isfinite(valuations)):
            raise InvalidMarket("Valuations must be finite")
        if np.any(valuations < 0):
            i, j = np.argwhere(valuations < 0)[0]
            raise InvalidMarket(f"Valuation of agent {i} for good {j} is negative ({valuations[i, j]})")
        if not np.all(np.isfinite(budgets)) or np.any(budgets <= 0):
            raise InvalidMarket(f"Budgets must be finite and positive, got {budgets.tolist()}")

        # The log objective needs every agent to like something
        idle = np.flatnonzero(valuations.max(axis=1) <= 0)
        if idle.size:
            raise InvalidMarket(f"Agent {idle[0]} values every good at zero")

        object.__setattr__(self, "valuations", _frozen(valuations))
        object.__setattr__(self, "budgets", _frozen(budgets))

    @property
    def n_agents(self) -> int:
        return self.valuations.shape[0]

    @property
    def n_goods(self) -> int:
        return self.valuations.shape[1]

    @property
    def total_budget(self) -> float:
        return float(sum(self.budgets.tolist()))

    def with_budgets(self, budgets: Sequence[float]) -> "Market":
        return Market(self.valuations, np.asarray(budgets, dtype=float))

    def check_agent(self, agent: int) -> None:
        if not 0 <= agent < self.n_agents:
            raise IndexOutOfRange(f"Agent {agent} out of range [0, {self.n_agents})")

    def __eq__(self, other):
        if not isinstance(other, Market):
            return NotImplemented
        return (np.array_equal(self.valuations, other.valuations)
                and np.array_equal(self.budgets, other.budgets))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class FractionalAllocation:

    shares: np.ndarray

    def __post_init__(self):
        shares = np.array(self.shares, dtype=float)
        if shares.ndim != 2:
            raise InvalidAllocation(f"Shares must be a matrix, got shape {shares.shape}")
        if not np.all(np.isfinite(shares)):
            raise InvalidAllocation("Shares must be finite")
        if np.any(shares < -SHARE_SLACK) or np.any(shares > 1 + SHARE_SLACK):
            raise InvalidAllocation("Shares must lie in [0, 1]")
        shares = np.clip(shares, 0.0, 1.0)
        over = np.flatnonzero(shares.sum(axis=0) > 1 + SHARE_SLACK)
        if over.size:
            raise InvalidAllocation(f"Good {over[0]} is allocated more than once")
        object.__setattr__(self, "shares", _frozen(shares))

    @property
    def n_agents(self) -> int:
        return self.shares.shape[0]

    @property
    def n_goods(self) -> int:
        return self.shares.shape[1]

    def consumption(self) -> np.ndarray:
        """Total amount of each good handed out."""
        return self.shares.sum(axis=0)

    def support(self, agent: int, spend_tol: float = 0.0) -> Tuple[int, ...]:
        return tuple(np.flatnonzero(self.shares[agent] > spend_tol).tolist())

    def __eq__(self, other):
        if not isinstance(other, FractionalAllocation):
            return NotImplemented
        return np.array_equal(self.shares, other.shares)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class IntegralAllocation:
    """One owner per good (UNASSIGNED when nobody holds it)."""

    owner: np.ndarray
    n_agents: int

    def __post_init__(self):
        owner = np.array(self.owner, dtype=int).reshape(-1)
        if self.n_agents < 1:
            raise InvalidAllocation("An allocation needs at least one agent")
        bad = np.flatnonzero((owner < UNASSIGNED) | (owner >= self.n_agents))
        if bad.size:
            raise InvalidAllocation(f"Good {bad[0]} has invalid owner {owner[bad[0]]}")
        object.__setattr__(self, "owner", _frozen(owner))

    @classmethod
    def from_bundles(cls, bundles: Sequence[Iterable[int]], n_goods: int) -> "IntegralAllocation":
        owner = np.full(n_goods, UNASSIGNED, dtype=int)
        for agent, bundle in enumerate(bundles):
            for good in bundle:
                if owner[good] != UNASSIGNED:
                    raise InvalidAllocation(f"Good {good} appears in two bundles")
                owner[good] = agent
        return cls(owner, len(bundles))

    @property
    def n_goods(self) -> int:
        return self.owner.shape[0]

    def bundle(self, agent: int) -> Tuple[int, ...]:
        return tuple(np.flatnonzero(self.owner == agent).tolist())

    def bundles(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(self.bundle(agent) for agent in range(self.n_agents))

    def is_complete(self) -> bool:
        return bool(np.all(self.owner != UNASSIGNED))

    def to_fractional(self) -> FractionalAllocation:
        shares = np.zeros((self.n_agents, self.n_goods))
        held = np.flatnonzero(self.owner != UNASSIGNED)
        shares[self.owner[held], held] = 1.0
        return FractionalAllocation(shares)

    def __eq__(self, other):
        if not isinstance(other, IntegralAllocation):
            return NotImplemented
        return self.n_agents == other.n_agents and np.array_equal(self.owner, other.owner)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class PriceVector:

    prices: np.ndarray

    def __post_init__(self):
        prices = np.array(self.prices, dtype=float).reshape(-1)
        if not np.all(np.isfinite(prices)) or np.any(prices < 0):
            raise MarketError(f"Prices must be finite and non-negative, got {prices.tolist()}")
        object.__setattr__(self, "prices", _frozen(prices))

    @property
    def n_goods(self) -> int:
        return self.prices.shape[0]

    @property
    def norm_inf(self) -> float:
        return float(self.prices.max()) if self.prices.size else 0.0

    def cost(self, goods: Iterable[int]) -> float:
        """Price of a bundle, summed in ascending good order."""
        return float(sum(self.prices[good] for good in sorted(goods)))

    def __eq__(self, other):
        if not isinstance(other, PriceVector):
            return NotImplemented
        return np.array_equal(self.prices, other.prices)

    __hash__ = None


Bundle = Union[Iterable[int], np.ndarray]


def bundle_value(market: Market, agent: int, bundle: Bundle) -> float:
    """Additive value v_i(s). A float row of length m (list or array) is a fractional
    bundle, anything else is a collection of good indices."""
    market.check_agent(agent)
    values = market.valuations[agent]

    if isinstance(bundle, (set, frozenset)):
        goods = sorted(bundle)
    else:
        row = bundle if isinstance(bundle, np.ndarray) else np.asarray(list(bundle))
        if row.dtype.kind == "f" and row.shape == (market.n_goods,):
            return float(sum((values * row).tolist()))
        if row.ndim != 1 or (row.dtype.kind == "f" and np.any(row != np.floor(row))):
            raise DimensionMismatch(f"Bundle of shape {row.shape} is neither a fractional row of "
                                    f"length {market.n_goods} nor a list of good indices")
        goods = row.tolist()

    if any(isinstance(good, float) and not good.is_integer() for good in goods):
        raise IndexOutOfRange(f"Bundle {goods} has non-integer good indices")
    goods = sorted(set(int(good) for good in goods))
    if goods and (goods[0] < 0 or goods[-1] >= market.n_goods):
        raise IndexOutOfRange(f"Bundle {goods} references goods outside [0, {market.n_goods})")
    return float(sum(values[good] for good in goods))


def mbb(market: Market, agent: int, prices: PriceVector,
        rel_tol: float = 1e-5) -> Tuple[float, FrozenSet[int]]:
    """Maximum bang-per-buck ratio of an agent and the goods attaining it.

    Zero-priced goods nobody values are part of every MBB set.
    """
    market.check_agent(agent)
    if prices.n_goods != market.n_goods:
        raise DimensionMismatch(f"{prices.n_goods} prices for {market.n_goods} goods")

    p = prices.prices
    v = market.valuations[agent]
    if not np.any(p > 0):
        raise DegeneratePrices("All prices are zero")

    free = p == 0
    unbounded = np.flatnonzero(free & (v > 0))
    if unbounded.size:
        raise UnboundedMBB(f"Agent {agent} values good {unbounded[0]} but it is priced at zero")

    priced = np.flatnonzero(~free)
    ratios = v[priced] / p[priced]
    ratio = float(ratios.max())

    goods = set(priced[ratios >= ratio * (1 - rel_tol)].tolist())
    goods.update(np.flatnonzero(free).tolist())
    return ratio, frozenset(goods)


@dataclass(frozen=True, eq=False)
class EquilibriumReport:

    market_clearing_ok: bool
    clearing_violation: float           # Worst |1 - consumption| over priced goods
    budget_exhaustion_ok: bool
    budget_residuals: np.ndarray        # |x_i . p - e_i| per agent
    mbb_ok: bool
    mbb_gap: float                      # Worst relative bang-per-buck shortfall on spent goods
    is_equilibrium: bool
    tolerance_used: ToleranceConfig
    budgets: np.ndarray

    @property
    def worst_violation(self) -> float:
        # Relative to the budget; an agent with budget 0 contributes its raw residual
        relative = np.divide(self.budget_residuals, self.budgets,
                             out=self.budget_residuals.copy(), where=self.budgets > 0)
        budget_part = float(relative.max()) if relative.size else 0.0
        return max(self.clearing_violation, budget_part, self.mbb_gap)

    def summary(self) -> str:
        return (f"{_mark(self.market_clearing_ok)} clearing (worst {self.clearing_violation:.3g})  "
                f"{_mark(self.budget_exhaustion_ok)} budgets (worst {float(self.budget_residuals.max()):.3g})  "
                f"{_mark(self.mbb_ok)} MBB (gap {self.mbb_gap:.3g})")


def _mark(ok: bool) -> str:
    return "✓" if ok else "✗"


def _check_dimensions(market: Market, alloc: FractionalAllocation, prices: PriceVector) -> None:
    if alloc.shares.shape != market.valuations.shape:
        raise DimensionMismatch(
            f"Allocation shape {alloc.shares.shape} does not match market {market.valuations.shape}")
    if prices.n_goods != market.n_goods:
        raise DimensionMismatch(f"{prices.n_goods} prices for {market.n_goods} goods")


def mbb_gap_matrix(market: Market, prices: PriceVector) -> np.ndarray:
    """Relative bang-per-buck shortfall 1 - (v_ij / p_j) / MBB_i for every pair.

    Pairs on zero-priced goods nobody values have gap 0; an agent facing a
    good it values at price zero has infinite gap everywhere it is priced.
    """
    v = market.valuations
    p = prices.prices
    priced = p > 0

    gaps = np.zeros_like(v)
    if np.any(priced):
        ratios = v[:, priced] / p[priced]
        best = ratios.max(axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            gaps[:, priced] = np.where(best > 0, 1.0 - ratios / best, 0.0)

    unbounded = np.any(v[:, ~priced] > 0, axis=1)
    gaps[np.ix_(unbounded, priced)] = np.inf
    return gaps


def check_equilibrium(market: Market, alloc: FractionalAllocation, prices: PriceVector,
                      tol: ToleranceConfig = ToleranceConfig(),
                      budgets: Optional[Sequence[float]] = None) -> EquilibriumReport:
    """Evaluate market clearing, budget exhaustion and MBB spending.

    Violations are reported, never raised. `budgets` overrides the market's
    budgets (used to audit a rounded outcome against its new budgets).
    """
    _check_dimensions(market, alloc, prices)
    e = market.budgets if budgets is None else np.asarray(budgets, dtype=float)
    if e.shape != (market.n_agents,):
        raise DimensionMismatch(f"{e.shape[0]} budgets for {market.n_agents} agents")

    x = alloc.shares
    p = prices.prices

    # Market clearing: priced goods are fully sold
    priced = p > tol.abs
    shortfall = np.abs(1.0 - x.sum(axis=0))
    clearing_violation = float(shortfall[priced].max()) if np.any(priced) else 0.0
    clearing_ok = clearing_violation <= tol.abs

    # Budget exhaustion
    spend = x @ p
    residuals = np.abs(spend - e)
    exhaustion_ok = bool(np.all(residuals <= tol.budget_slack(e)))

    # MBB spending, on goods actually bought
    spent = x > tol.spend
    gaps = mbb_gap_matrix(market, prices)
    mbb_gap = float(gaps[spent].max()) if np.any(spent) else 0.0
    mbb_gap = max(mbb_gap, 0.0)
    mbb_ok = mbb_gap <= tol.rel

    return EquilibriumReport(
        market_clearing_ok=bool(clearing_ok),
        clearing_violation=clearing_violation,
        budget_exhaustion_ok=exhaustion_ok,
        budget_residuals=_frozen(residuals),
        mbb_ok=bool(mbb_ok),
        mbb_gap=mbb_gap,
        is_equilibrium=bool(clearing_ok and exhaustion_ok and mbb_ok),
        tolerance_used=tol,
        budgets=_frozen(np.array(e, dtype=float)),
    )
