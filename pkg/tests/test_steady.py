import numpy as np
import pytest

from boussinesq_bench.numerics import mesh
from boussinesq_bench.numerics import steady
from boussinesq_bench import errors


@pytest.fixture
def rest(grid):
    return steady.LinearizationPoint.rest(grid)

def test_zero_sources_give_zero_fields(rest, params):
    solution = steady.solve_steady_homogeneous(rest, params)
    assert not solution.velocity.flat.any()
    assert not solution.temperature.flat.any()
    assert np.abs(solution.pressure.flat).max() == 0.0

def test_heated_floor_drives_solenoidal_flow(grid, rest, params, cosine_flux):
    solution = steady.solve_steady_nonhomogeneous(rest, params, None, None,
                                                  mesh.BoundaryTrace.zero(grid), cosine_flux)
    velocity = solution.velocity
    assert mesh.norms(velocity).l2 > 1e-4
    assert np.abs(mesh.divergence(velocity).values).max() < 1e-9 * max(1.0, velocity.max_speed())
    assert solution.pressure.mean() == pytest.approx(0.0, abs=1e-12)

def test_trace_normal_values_are_kept(rest, params, trig_trace, cosine_flux):
    solution = steady.solve_steady_nonhomogeneous(rest, params, None, None, trig_trace,
                                                  cosine_flux)
    assert np.array_equal(solution.velocity.normal_values, trig_trace.normal)

def test_regularity_split_sums_to_direct_solve(grid, rest, params, trig_trace, cosine_flux,
                                               solenoidal):
    f1, f2 = solenoidal
    direct = steady.solve_steady_nonhomogeneous(rest, params, f1, f2, trig_trace, cosine_flux)
    velocity, pressure, temperature = steady.regularity_split(rest, params, f1, f2, trig_trace,
                                                              cosine_flux).total()
    scale = max(1.0, mesh.norms(direct.velocity).l2)
    assert mesh.norms(velocity - direct.velocity).l2 <= 1e-9 * scale
    assert mesh.norms(pressure - direct.pressure).l2 <= 1e-9 * scale
    assert mesh.norms(temperature - direct.temperature).l2 <= 1e-9 * scale

def test_dirichlet_operator_rejects_net_flux(grid, rest, params):
    outflow = mesh.BoundaryTrace.from_function(grid, lambda x, y: (x, 0 * y))
    with pytest.raises(errors.CompatibilityError):
        steady.dirichlet_operator_dz(rest, params, outflow)

def test_lift_removes_flux_mean(grid, params, trig_trace, cosine_flux):
    shifted = cosine_flux + mesh.BoundaryFlux(grid, np.full(grid.n_normal, 0.25))
    lift = steady.lift_l0(params, trig_trace, shifted)
    assert lift.removed_flux_mean == pytest.approx(0.25)
    assert lift.shift == 0.0
    assert lift.temperature.mean() == pytest.approx(0.0, abs=1e-12)

def test_rest_shift_is_one_plus_half_buoyancy(rest):
    constants = steady.EmbeddingConstants(1.0, 1.0)
    assert steady.lambda0_estimate(rest, (0.0, 1.0), constants) == 1.5
    assert steady.lambda0_estimate(rest, (-3.0, 2.0), constants) == 2.5

def test_coercivity_with_rest_shift(rest, params):
    report = steady.coercivity_probe(rest, params, trials=20,
                                     constants=steady.EmbeddingConstants(1.0, 1.0))
    assert report.lambda0 == 1.5
    assert report.trials == 20
    assert report.min_ratio >= 1.0
    assert report.passed

def test_coercivity_without_samples(rest, params):
    report = steady.coercivity_probe(rest, params, trials=0,
                                     constants=steady.EmbeddingConstants(1.0, 1.0))
    assert report.min_ratio == float('inf')

def test_bilinear_form_matches_operator(grid, rest, params, generator):
    flat = np.zeros(grid.n_velocity)
    flat[grid.interior_edges] = generator.standard_normal(grid.interior_edges.size)
    u = mesh.VectorField.from_flat(grid, flat)
    phi = mesh.ScalarField(grid, generator.standard_normal((grid.nx, grid.ny)))
    operator = steady.SteadyOperator(grid, params)
    momentum, _, heat = operator.apply(u, mesh.ScalarField.zero(grid), phi)
    expected = mesh.inner_product(momentum, u) + mesh.inner_product(heat, phi)
    assert steady.bilinear_form_a(rest, params, (u, phi), (u, phi)) == pytest.approx(expected,
                                                                                     rel=1e-10)

def test_implicit_euler_operator_rejects_bad_step(grid, params):
    with pytest.raises(ValueError):
        steady.implicit_euler_operator(grid, params, 0.0)
    operator = steady.implicit_euler_operator(grid, params, 0.01)
    assert operator.shift == pytest.approx(100.0)
    selector = steady.mass_selector(operator)
    assert selector.sum() == grid.interior_edges.size + grid.n_cells

def test_linearization_point_must_be_solenoidal(grid, random_field):
    with pytest.raises(errors.CompatibilityError):
        steady.LinearizationPoint(random_field, mesh.ScalarField.zero(grid))

@pytest.mark.slow
def test_coercivity_at_moving_point(params):
    grid = mesh.Grid(16, 16)
    velocity = mesh.VectorField.from_stream_function(
        grid, lambda x, y: 0.1 * np.sin(np.pi * x) * np.sin(np.pi * y) ** 2)
    temperature = mesh.ScalarField.from_function(grid, lambda x, y: np.cos(np.pi * x) * y)
    point = steady.LinearizationPoint(velocity, temperature)
    report = steady.coercivity_probe(point, params, trials=1000)
    assert report.lambda0 > 1.5
    assert report.trials == 1000
    assert report.min_ratio >= 1.0
    assert report.passed
