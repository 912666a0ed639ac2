import numpy as np
from hypothesis import strategies as st

from market import IntegralAllocation, Market

POWERS = [2.0, 4.0, 16.0, 256.0]


@st.composite
def markets(draw, max_agents=3, max_goods=6, values=POWERS):
    """Equal-income markets with power-of-two values, so bundle sums stay exact."""
    n = draw(st.integers(1, max_agents))
    m = draw(st.integers(1, max_goods))
    rows = draw(st.lists(st.lists(st.sampled_from(values), min_size=m, max_size=m),
                         min_size=n, max_size=n))
    return Market(rows, np.ones(n))


@st.composite
def complete_allocations(draw, market):
    owner = draw(st.lists(st.integers(0, market.n_agents - 1),
                          min_size=market.n_goods, max_size=market.n_goods))
    return IntegralAllocation(owner, market.n_agents)
