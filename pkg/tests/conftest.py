import warnings

import numpy as np
import pytest

from ipld.applications import (build_dsl_instance, build_num_instance,
                               generate_dsl, generate_num, synthetic_network)
from ipld.blocks import BoxBarrierFamily, QuadraticFamily
from ipld.composites import BoxWindowComposite
from ipld.model import BlockGroup, ProblemInstance

warnings.filterwarnings("ignore", message="dropping .* edge")
warnings.filterwarnings("ignore", message="merged .* duplicated")


def make_one_d():
    """g = 0.5 (x - 1)^2, barrier on [0, 2], coupling A = [1], window [0, 2]."""
    smooth = QuadraticFamily(np.eye(1), [[1.0]])
    barrier = BoxBarrierFamily(0.0, 2.0, 1, 1)
    return ProblemInstance(
        [BlockGroup(smooth, barrier, np.ones((1, 1, 1)))],
        BoxWindowComposite([0.0], [2.0]),
    )


def make_num(nodes, seed, pairs_per_node=None):
    net = synthetic_network(nodes, seed=seed)
    data = generate_num(net, seed=seed, pairs_per_node=pairs_per_node)
    return build_num_instance(net, data)


def make_dsl(users, channels, seed):
    return build_dsl_instance(generate_dsl(users, channels, seed=seed))


@pytest.fixture
def one_d():
    return make_one_d()


@pytest.fixture
def tiny_num():
    return make_num(6, seed=2, pairs_per_node=2)


@pytest.fixture
def small_num():
    return make_num(10, seed=7)
