import numpy as np
import pytest

from boussinesq_bench.numerics import mesh
from boussinesq_bench import errors


def _bump(grid):
    def bump(x, y):
        return np.sin(np.pi * x / grid.lx) * np.sin(np.pi * y / grid.ly)
    return mesh.VectorField.from_function(grid, bump, bump)

def _laplacian_error(grid):
    w = _bump(grid)
    laplacian = mesh.laplacian_dirichlet(w, mesh.BoundaryTrace.zero(grid))
    inner = grid.interior_edges
    exact = -np.pi ** 2 * (grid.lx ** -2 + grid.ly ** -2) * w.flat[inner]
    return np.linalg.norm(laplacian.flat[inner] - exact) / np.linalg.norm(exact)

def test_grid_rejects_small_or_invalid():
    with pytest.raises(errors.GridError):
        mesh.Grid(3, 8)
    with pytest.raises(errors.GridError):
        mesh.Grid(8, 8, lx=0.0)
    with pytest.raises(errors.GridError):
        mesh.Grid(8, 8, closure='quadratic')

def test_grid_counts(rectangle):
    assert rectangle.n_u == 9 * 6
    assert rectangle.n_v == 8 * 7
    assert rectangle.n_normal == 2 * (8 + 6)
    assert rectangle.n_extended == rectangle.n_velocity + rectangle.n_tangential
    assert rectangle.hx == pytest.approx(1.5 / 8)

def test_field_on_other_grid_rejected(grid, rectangle):
    with pytest.raises(errors.GridError):
        mesh.VectorField.zero(grid) + mesh.VectorField.zero(rectangle)

def test_stream_function_velocity_is_solenoidal(rectangle):
    w = mesh.VectorField.from_stream_function(
        rectangle, lambda x, y: np.sin(2 * x) * np.cos(3 * y) + x * y ** 2)
    assert np.abs(mesh.divergence(w).values).max() < 1e-12 * max(1.0, w.max_speed())

def test_dirichlet_laplacian_is_second_order():
    coarse, fine = _laplacian_error(mesh.Grid(8, 8)), _laplacian_error(mesh.Grid(16, 16))
    assert fine < 1e-2
    assert coarse / fine > 3

def test_dirichlet_laplacian_on_rectangle(rectangle):
    operator = rectangle.dirichlet_laplacian
    assert operator.shape == (rectangle.n_velocity, rectangle.n_extended)
    assert not operator[rectangle.normal_edges].count_nonzero()
    coarse = _laplacian_error(rectangle)
    fine = _laplacian_error(mesh.Grid(16, 12, lx=1.5, ly=1.0))
    assert fine < 1e-2
    assert coarse / fine > 3

def test_dirichlet_laplacian_matches_gradient_product(grid, generator):
    flat = np.zeros(grid.n_velocity)
    flat[grid.interior_edges] = generator.standard_normal(grid.interior_edges.size)
    w = mesh.VectorField.from_flat(grid, flat)
    laplacian = mesh.laplacian_dirichlet(w, mesh.BoundaryTrace.zero(grid))
    product = mesh.gradient_inner_product(w, w)
    assert -mesh.inner_product(laplacian, w) == pytest.approx(product, rel=1e-10)

def test_neumann_laplacian_matches_gradient_product(grid, generator):
    q = mesh.ScalarField(grid, generator.standard_normal((grid.nx, grid.ny)))
    laplacian = mesh.laplacian_neumann(q)
    assert -mesh.inner_product(laplacian, q) == pytest.approx(mesh.gradient_inner_product(q, q),
                                                              rel=1e-10)

def test_advection_is_skew(grid, generator, solenoidal):
    z, _ = solenoidal
    tau = mesh.ScalarField(grid, generator.standard_normal((grid.nx, grid.ny)))
    flat = np.zeros(grid.n_velocity)
    flat[grid.interior_edges] = generator.standard_normal(grid.interior_edges.size)
    u = mesh.VectorField.from_flat(grid, flat)
    heat = mesh.advect(z, tau)
    transport = mesh.advect(z, u)
    carrier = mesh.norms(z).l2
    assert abs(mesh.inner_product(heat, tau)) <= 1e-12 * carrier * mesh.norms(tau).l2 ** 2
    assert abs(mesh.inner_product(transport, u)) <= 1e-12 * carrier * mesh.norms(u).l2 ** 2

def test_flux_mean_free(cosine_flux):
    shifted = mesh.BoundaryFlux(cosine_flux.grid, cosine_flux.values + 0.3)
    assert abs(shifted.net_flux()) > 0.1
    assert shifted.mean_free().net_flux() == pytest.approx(0.0, abs=1e-14)

def test_trace_net_flux(grid, trig_trace):
    assert trig_trace.net_flux() == pytest.approx(0.0, abs=1e-13)
    outflow = mesh.BoundaryTrace.from_function(grid, lambda x, y: (x, 0 * y))
    assert outflow.net_flux() == pytest.approx(1.0)
    with pytest.raises(errors.CompatibilityError):
        mesh.BoundaryTrace(grid, outflow.normal, outflow.tangential,
                           normal_flux_compatible=True)

def test_mean_zero_flag_checked(grid):
    with pytest.raises(errors.GridError):
        mesh.ScalarField(grid, np.ones((grid.nx, grid.ny)), mean_zero=True)
    field = mesh.ScalarField.from_function(grid, lambda x, y: x + y).mean_free()
    assert field.mean_zero
    assert field.mean() == pytest.approx(0.0, abs=1e-14)

def test_norms_of_zero_state(grid):
    norms = mesh.norms(mesh.VectorField.zero(grid), mesh.BoundaryTrace.zero(grid))
    assert norms == mesh.Norms(0.0, 0.0, 0.0)
    assert mesh.l4_norm(mesh.ScalarField.zero(grid)) == 0.0

def test_physical_params_validated():
    with pytest.raises(ValueError):
        mesh.PhysicalParams(nu=0.0)
    with pytest.raises(ValueError):
        mesh.PhysicalParams(lambda0=-1.0)
    assert mesh.PhysicalParams(beta=(3, -4)).beta_sup == 4.0
