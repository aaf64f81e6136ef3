import numpy as np
import pytest

from hansgcl.graph import Graph, generate_sbm


@pytest.fixture
def tiny_graph():
    rng = np.random.default_rng(0)
    pairs = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (1, 4)]
    return Graph.from_pairs(rng.standard_normal((6, 5)), pairs, [0, 1, 0, 1, 0, 1], 2)


@pytest.fixture(scope="session")
def sbm_300():
    return generate_sbm(300, 3, 0.10, 0.01, 32, 1.0, seed=7)
