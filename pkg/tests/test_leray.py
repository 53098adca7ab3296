import numpy as np
import pytest

from boussinesq_bench.numerics import leray
from boussinesq_bench.numerics import mesh
from boussinesq_bench import errors
from boussinesq_bench import utils


@pytest.mark.parametrize('n', [8, 16])
def test_projection_identities(n):
    grid = mesh.Grid(n, n)
    generator = utils.random_generator(0, 'leray', n)
    w = mesh.VectorField.from_flat(grid, generator.standard_normal(grid.n_velocity))
    decomposition = leray.project(w)
    solenoidal, gradient = decomposition.solenoidal, decomposition.gradient_part
    size = mesh.inner_product(w, w)
    again = leray.project(solenoidal).solenoidal
    assert mesh.norms(again - solenoidal).l2 <= 1e-9 * np.sqrt(size)
    assert abs(mesh.inner_product(solenoidal, gradient)) <= 1e-9 * size
    assert abs(size - mesh.inner_product(solenoidal, solenoidal)
               - mesh.inner_product(gradient, gradient)) <= 1e-9 * size

def test_projection_is_solenoidal_with_zero_trace(rectangle, generator):
    w = mesh.VectorField.from_flat(rectangle, generator.standard_normal(rectangle.n_velocity))
    decomposition = leray.project(w)
    solenoidal = decomposition.solenoidal
    assert not solenoidal.normal_values.any()
    assert np.abs(mesh.divergence(solenoidal).values).max() < 1e-10
    assert decomposition.potential.mean() == pytest.approx(0.0, abs=1e-12)

def test_projection_keeps_solenoidal_fields(solenoidal):
    velocity, _ = solenoidal
    projected = leray.project(velocity).solenoidal
    assert mesh.norms(projected - velocity).l2 <= 1e-10 * mesh.norms(velocity).l2

def test_harmonic_extension_carries_trace(grid, trig_trace):
    extension = leray.harmonic_extension(trig_trace)
    assert np.allclose(extension.normal_values, trig_trace.normal, atol=1e-12)
    assert np.abs(mesh.divergence(extension).values).max() < 1e-9

def test_harmonic_extension_rejects_net_flux(grid):
    outflow = mesh.BoundaryTrace.from_function(grid, lambda x, y: (x, 0 * y))
    with pytest.raises(errors.CompatibilityError) as raised:
        leray.harmonic_extension(outflow)
    assert raised.value.defect != 0

def test_neumann_solve_matches_source(grid, cosine_flux):
    flux = cosine_flux
    rhs = mesh.ScalarField(grid, np.zeros((grid.nx, grid.ny)))
    solution = leray.solve_neumann_poisson(rhs, flux)
    assert solution.mean_zero
    residual = mesh.laplacian_neumann(solution, flux)
    assert np.abs(residual.values).max() < 1e-9

def test_project_coupled_passes_temperature(solenoidal, random_field):
    _, temperature = solenoidal
    velocity, passed = leray.project_coupled((random_field, temperature))
    assert passed is temperature
    assert not velocity.normal_values.any()
