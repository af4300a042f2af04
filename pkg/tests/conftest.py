import numpy as np
import pytest

from rilco.mdp import gridworld, occupancy_exact, snapshot_policies


@pytest.fixture(scope="session")
def grid():
    return gridworld()


@pytest.fixture(scope="session")
def snaps(grid):
    return snapshot_policies(grid)


@pytest.fixture(scope="session")
def densities(grid, snaps):
    """Expert occupancy and the mean non-expert occupancy."""
    rho_e = occupancy_exact(grid, snaps[0]).density
    rho_n = np.mean([occupancy_exact(grid, p).density for p in snaps[1:]], axis=0)
    return rho_e, rho_n


def dirichlet(rng, shape):
    x = rng.gamma(1.0, size=shape)
    return x / x.sum()
