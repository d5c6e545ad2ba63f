import numpy as np
import pytest

from aoisim.netmodel import (AvailabilityProcess, NetworkSpec, NodeSpec,
                             build_grid)


def iot(node_id, cell, l=2, p=0.8):
    return NodeSpec(id=node_id, kind="iot", packet_count=l, success_prob=p,
                    home_cell=cell)


def uav(node_id, radius=1, l=6, p=0.8, mobility="random-walk", start=0):
    return NodeSpec(id=node_id, kind="uav", packet_count=l, success_prob=p,
                    radius=radius, mobility=mobility, start_cell=start)


def sat(node_id="sat", l=20, p=0.6):
    return NodeSpec(id=node_id, kind="satellite", packet_count=l,
                    success_prob=p)


def single_cell_spec(l=1, p=1.0):
    return NetworkSpec(graph=build_grid(1, 1),
                       nodes=(iot("n0", 0, l=l, p=p),),
                       scenario_id="one-cell")


def geometric(lam_a=0.05, lam_u=0.05, init="stationary"):
    return AvailabilityProcess("geometric", lam_a=lam_a, lam_u=lam_u,
                               init=init)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
