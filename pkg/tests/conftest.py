"""Shared fixtures."""

import numpy as np
import pytest

from boussinesq_bench.bench import checks
from boussinesq_bench.numerics import mesh
from boussinesq_bench import utils


@pytest.fixture
def grid():
    return mesh.Grid(8, 8)

@pytest.fixture
def rectangle():
    return mesh.Grid(8, 6, lx=1.5, ly=1.0)

@pytest.fixture
def generator():
    return utils.random_generator(0, 'tests')

@pytest.fixture
def params():
    return mesh.PhysicalParams(lambda0=1.5)

@pytest.fixture
def solenoidal(grid, generator):
    return checks.random_solenoidal(grid, generator)

@pytest.fixture
def random_field(grid, generator):
    return mesh.VectorField.from_flat(grid, generator.standard_normal(grid.n_velocity))

def trig_stream(grid):
    """Stream function and velocity with nonzero normal and tangential data on every wall."""
    def psi(x, y):
        return np.sin(np.pi * x / grid.lx) * np.cos(np.pi * y / grid.ly)

    def velocity(x, y):
        return (-np.pi / grid.ly * np.sin(np.pi * x / grid.lx) * np.sin(np.pi * y / grid.ly),
                -np.pi / grid.lx * np.cos(np.pi * x / grid.lx) * np.cos(np.pi * y / grid.ly))

    return psi, velocity

def smooth_boundary_data(grid):
    """Trig velocity trace and a cosine heat flux through the bottom wall."""
    psi, velocity = trig_stream(grid)
    return (mesh.BoundaryTrace.from_stream_function(grid, psi, velocity),
            mesh.BoundaryFlux.from_walls(grid, bottom=np.cos(np.pi * grid.xc)))

@pytest.fixture
def trig_trace(grid):
    return smooth_boundary_data(grid)[0]

@pytest.fixture
def cosine_flux(grid):
    return smooth_boundary_data(grid)[1]

@pytest.fixture
def boundary_data():
    return smooth_boundary_data
