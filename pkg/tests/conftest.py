import numpy as np
import pytest

from ersc.discretize import build_grid
from ersc.model import builtin_ou_lq, builtin_w_network


@pytest.fixture(scope="session")
def ou_uncontrolled():
    # stable scalar benchmark with closed-form value 0.25
    return builtin_ou_lq(a=-1.0, sigma=1.0, q=0.75, c=0.0, u_max=0.0, n_controls=1)


@pytest.fixture(scope="session")
def lq_model():
    # controlled benchmark; optimal value (2 - sqrt(2))/2
    return builtin_ou_lq(a=-1.0, sigma=1.0, q=1.0, c=2.0, u_max=5.0, n_controls=201)


@pytest.fixture(scope="session")
def grid_241():
    return build_grid([6.0], [241])


@pytest.fixture(scope="session")
def w_network():
    mu = np.array([[1.0, 0.0], [1.0, 2.0], [0.0, 1.5]])
    return builtin_w_network(
        arrival_rates=[1.0, 1.0, 1.0],
        service_rates=mu,
        l_vec=[-0.5, -0.5, -0.5],
        cost_weights=[1.0, 2.0, 3.0],
        n_controls=1,
    )
