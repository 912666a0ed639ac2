import logging
from typing import Optional

import numpy as np

from market import InvalidMarket, Market, PriceVector

logger = logging.getLogger(__name__)


def _check_size(n: int) -> None:
    if n < 1:
        raise InvalidMarket(f"The comparative family needs n >= 1, got {n}")


def comparative_instance(n: int, eps: float) -> Market:
    """2n unit-budget agents and 4n-1 goods.

    The first n agents value the first 2n goods at n and nothing else; the
    last n agents value the first 2n goods at 1-eps and the rest at 1.
    """
    _check_size(n)
    if not 0 < eps < 1:
        raise InvalidMarket(f"eps must lie in (0, 1), got {eps}")

    valuations = np.zeros((2 * n, 4 * n - 1))
    valuations[:n, :2 * n] = n
    valuations[n:, :2 * n] = 1 - eps
    valuations[n:, 2 * n:] = 1.0
    return Market(valuations, np.ones(2 * n))


def comparative_threshold(n: int) -> float:
    """Smallest eps at which the first block sells at exactly 1/2."""
    _check_size(n)
    return 1 / (2 * n)


def comparative_expected_prices(n: int, eps: Optional[float] = None) -> PriceVector:
    """Equilibrium prices of comparative_instance(n, eps).

    For eps >= 1/(2n), or eps omitted: 1/2 on the first 2n goods and n/(2n-1)
    on the last 2n-1. Below the threshold the last n agents also buy from the
    first block, and both blocks share one bang-per-buck ratio:
    a = 2n / (2n + (2n-1)/(1-eps)) on the first block and b = a/(1-eps) on the last.
    """
    _check_size(n)
    if eps is None or eps >= comparative_threshold(n):
        first, last = 0.5, n / (2 * n - 1)
    else:
        logger.warning("eps=%g is below 1/(2n)=%g; the 1/2 and n/(2n-1) prices are not an equilibrium",
                       eps, comparative_threshold(n))
        first = 2 * n / (2 * n + (2 * n - 1) / (1 - eps))
        last = first / (1 - eps)
    return PriceVector([first] * (2 * n) + [last] * (2 * n - 1))


def comparative_perturbation_bound(n: int) -> float:
    _check_size(n)
    return n / (2 * n - 1)
