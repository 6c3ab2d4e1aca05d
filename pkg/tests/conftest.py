from __future__ import annotations

import numpy as np
import pytest

from jostkit.bc import dirichlet, kirchhoff, neumann, robin
from jostkit.potential import PotentialSpec

WELL_DEPTH = (0.6 * np.pi) ** 2


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def square_well():
    """Scalar well of depth (0.6π)² on [0, 1]; one Dirichlet bound state."""
    return PotentialSpec.builtin("square_well", n=1, depth=WELL_DEPTH, width=1.0)


@pytest.fixture
def coupled_well():
    return PotentialSpec.builtin("coupled_well", n=2, depths=(3.0, 1.5), coupling=0.7, width=1.0)


@pytest.fixture
def exp_decay():
    return PotentialSpec.builtin("exp_decay", n=2, strength=2.0, rate=1.5)


@pytest.fixture
def scalar_bcs():
    return {
        "dirichlet": dirichlet(1),
        "neumann": neumann(1),
        "robin_attractive": robin(1, 0.5),
        "robin_repulsive": robin(1, 2.0),
    }


@pytest.fixture
def star_graph():
    return kirchhoff(3)
