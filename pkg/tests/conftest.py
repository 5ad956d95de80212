"""Shared fixtures: synthetic materials, desk-scale geometry, solved bundles."""

import numpy as np
import pytest

from sawfeti import feti
from sawfeti.geometry import GeometrySpec
from sawfeti.materials import MaterialSet, voigt_to_piezo


def synthetic_substrate():
    """O(1) isotropic elastic solid with a PZT-style coupling pattern."""
    iso = MaterialSet.isotropic_elastic(2.0, 1.0, rho=1.0)
    ev = np.zeros((3, 6))
    ev[2, 0] = ev[2, 1] = 0.3
    ev[2, 2] = 0.8
    ev[0, 4] = ev[1, 3] = 0.5
    return MaterialSet(c=iso.c, e=voigt_to_piezo(ev), eps=np.eye(3), rho=1.0)


def synthetic_electrode():
    return MaterialSet.isotropic_elastic(1.5, 0.8, rho=0.5)


def tiny_geometry(**overrides):
    """Unit-magnitude desk geometry: 5x3x5 substrate, 3x3x3 electrode."""
    kw = dict(
        pitch=1.0, width=0.1, depth=1.0,
        electrode_width=0.5, electrode_height=0.15, pml_thickness=0.5,
        substrate_nodes=(5, 3, 5), electrode_nodes=(3, 3, 3), pml_nodes=3,
        orders=(2, 1, 2),
    )
    kw.update(overrides)
    return GeometrySpec(**kw)


@pytest.fixture(scope="session")
def substrate():
    return synthetic_substrate()


@pytest.fixture(scope="session")
def electrode_mat():
    return synthetic_electrode()


@pytest.fixture(scope="session")
def geom():
    return tiny_geometry()


@pytest.fixture(scope="session")
def omega():
    return 2.0


@pytest.fixture(scope="session")
def systems(geom, substrate, electrode_mat, omega):
    """Assembled subregion operators on the tiny synthetic problem."""
    return feti.build_systems(geom, substrate, electrode_mat, omega)


@pytest.fixture(scope="session")
def blocks(systems):
    return feti.interface_blocks(systems)


@pytest.fixture(scope="session")
def desk_bundle(geom, systems, blocks):
    """Blocks, right-hand sides and the padded system for N=3 mixed voltages."""
    voltages = [1.0, 0.5, 1.0]
    rhs = feti.rhs_blocks(systems, voltages, blocks)
    qt = feti.assemble_multiplier_system(blocks, rhs, 3)
    return {
        "geom": geom, "systems": systems, "blocks": blocks,
        "voltages": voltages, "rhs": rhs, "qt": qt,
    }
