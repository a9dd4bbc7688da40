import pytest

from burnlab.distributions import (exponential, pareto, piecewise_inverse_hazard,
                                   two_piece, uniform)
from burnlab.ironing import iron


@pytest.fixture(scope="session")
def iv_uniform():
    return iron(uniform(0.0, 1.0))


@pytest.fixture(scope="session")
def iv_exp():
    return iron(exponential(1.0))


@pytest.fixture(scope="session")
def iv_pareto():
    return iron(pareto(1.0, 2.0))


@pytest.fixture(scope="session")
def iv_twopiece():
    return iron(two_piece())


@pytest.fixture(scope="session")
def bridge_dist():
    # inverse hazard steps 1 -> 3 -> 1.2 -> 4 make theta jump up at v=1 and
    # at v=2, producing exactly one interior ironed interval near [1, 2]
    return piecewise_inverse_hazard([0.0, 1.0, 1.5, 2.0], [1.0, 3.0, 1.2, 4.0])


@pytest.fixture(scope="session")
def iv_bridge(bridge_dist):
    return iron(bridge_dist)
