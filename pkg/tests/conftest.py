import numpy as np
import pytest

from cellbem import coupling as cpl
from cellbem import geometry as geo

KAPPA_EFF = 690.0e-4   # table permeability scaled to the um length unit


@pytest.fixture(scope="session")
def single_cell_system():
    scene = geo.build_single_cell(2.0, 4.0, 64, sigma=(20.0, 3.0))
    ops = cpl.build_steklov_maps(scene)
    return scene, ops, cpl.build_coupled(scene, ops, KAPPA_EFF)


@pytest.fixture(scope="session")
def split_circle_system():
    scene = geo.build_split_circle(2.0, 4.0, 0.0, 0.0, geo.split_circle_counts(96),
                                   sigma=(20.0, 3.0, 3.0))
    ops = cpl.build_steklov_maps(scene)
    return scene, ops, cpl.build_coupled(scene, ops, KAPPA_EFF)


@pytest.fixture(scope="session")
def nested_pair_system():
    scene = geo.build_nested_pair(1.0, 2.0, 4.0, 64, 96, 96, sigma=(20.0, 3.0, 3.0))
    ops = cpl.build_steklov_maps(scene)
    return scene, ops, cpl.build_coupled(scene, ops, KAPPA_EFF)


def kite_nodes(M):
    """A strongly deformed smooth closed test curve."""
    t = 2 * np.pi * np.arange(M) / M
    return np.column_stack((np.cos(t) + 0.65 * np.cos(2 * t) - 0.65,
                            1.5 * np.sin(t)))


def blob_nodes(M):
    """A mildly deformed non-symmetric smooth curve (fully resolved at M=64)."""
    t = 2 * np.pi * np.arange(M) / M
    r = 2.0 + 0.3 * np.cos(2 * t) + 0.15 * np.sin(3 * t)
    return np.column_stack((r * np.cos(t), r * np.sin(t)))
