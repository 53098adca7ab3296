import numpy as np
import pytest

from boussinesq_bench.bench import mms
from boussinesq_bench.numerics import adjoint
from boussinesq_bench.numerics import mesh
from boussinesq_bench.numerics import steady
from boussinesq_bench import errors
from boussinesq_bench import utils


@pytest.fixture
def rest(grid):
    return steady.LinearizationPoint.rest(grid)

def test_steady_duality(rest, params, trig_trace, cosine_flux):
    report = adjoint.duality_check_steady(rest, params, trig_trace, cosine_flux, trials=3)
    assert report.rel_residual <= 1e-8
    assert report.trials == 3
    assert report.mode == 'steady'
    assert report.adjoint_kind == 'discrete-transpose'

def test_pressure_duality(rest, params, trig_trace, cosine_flux):
    report = adjoint.duality_check_pressure(rest, params, trig_trace, cosine_flux, trials=2)
    assert report.rel_residual <= 1e-8

def test_divergence_adjoint_rejects_nonzero_mean(grid, rest, params):
    with pytest.raises(errors.CompatibilityError):
        adjoint.solve_steady_adjoint_div(rest, params, mesh.ScalarField(grid, np.ones((8, 8))))

def test_unknown_backend(rest, params):
    with pytest.raises(ValueError):
        adjoint.solve_steady_adjoint(rest, params, backend='finite-difference')

def test_unsteady_duality(grid, params):
    boundary = mms.mms_generate('time-modulated-trig', grid, params).boundary()
    initial = mesh.VectorField.zero(grid), mesh.ScalarField.zero(grid)
    report = adjoint.duality_check_unsteady(grid, params, boundary, initial, 0.01, 4)
    assert report.rel_residual <= 1e-7
    assert report.mode == 'unsteady'

def test_unsteady_adjoint_checks_step(grid, params):
    sources = [adjoint.smooth_sources(grid, utils.random_generator(0, 'sources'))]
    with pytest.raises(errors.ConsistencyError):
        adjoint.solve_unsteady_adjoint(grid, params, sources, 0.01, primal_dt=0.02)
    trajectory = adjoint.solve_unsteady_adjoint(grid, params, sources, 0.01)
    assert len(trajectory.states) == 1
    assert list(trajectory.times) == [0.0]

def test_smooth_sources_do_not_depend_on_grid():
    coarse = adjoint.smooth_sources(mesh.Grid(8, 8), utils.random_generator(0, 'sources'))
    fine = adjoint.smooth_sources(mesh.Grid(16, 16), utils.random_generator(0, 'sources'))
    assert not coarse[0].normal_values.any()
    assert mesh.norms(coarse[1]).l2 == pytest.approx(mesh.norms(fine[1]).l2, rel=0.05)

def test_report_compare_and_worst():
    first = adjoint.DualityReport.compare(1.0, 1.0 + 1e-12, 'steady', 'transpose')
    second = adjoint.DualityReport.compare(2.0, 2.5, 'steady', 'continuous')
    assert first.abs_residual == pytest.approx(1e-12)
    assert second.rel_residual == pytest.approx(0.2)
    assert second.adjoint_kind == 'continuous-discretized'
    worst = adjoint.DualityReport.worst([first, second])
    assert worst.lhs == 2.0 and worst.trials == 2
    assert set(worst.as_dict()) == {'lhs', 'rhs', 'abs_residual', 'rel_residual', 'mode',
                                    'adjoint_kind', 'trials'}

def test_zero_data_zero_residual():
    report = adjoint.DualityReport.compare(0.0, 0.0, 'steady', 'transpose')
    assert report.rel_residual == 0.0

def _sheared_state(n, offset):
    """Adjoint state with u = sin(pi x) (y - y^3 + offset * h^2) and no other fields."""
    grid = mesh.Grid(n, n)
    r = mesh.VectorField.from_function(
        grid, lambda x, y: np.sin(np.pi * x) * (y - y ** 3 + offset * grid.hy ** 2),
        lambda x, y: 0 * x)
    zero = mesh.ScalarField.zero(grid)
    return adjoint.AdjointState(r, zero, zero, 0.0)

@pytest.mark.parametrize('offset', [0.0, 1.0])
def test_tangential_functional_is_second_order(offset):
    gaps = []
    for n in 8, 16:
        state = _sheared_state(n, offset)
        grid = state.r.grid
        velocity, _ = adjoint.transposition_functional(state)
        _, bottom = velocity.wall('bottom')
        _, top = velocity.wall('top')
        exact = np.sin(np.pi * grid.xn)
        gaps.append(max(np.abs(bottom - exact).max(), np.abs(top - 2 * exact).max()))
    assert gaps[1] < 0.05
    assert gaps[0] / gaps[1] > 3

def test_backends_agree_at_rest(rest, params):
    f3, f4 = adjoint.smooth_sources(rest.grid, utils.random_generator(0, 'sources'))
    transposed = adjoint.solve_steady_adjoint(rest, params, f3, f4, backend='transpose')
    continuous = adjoint.solve_steady_adjoint(rest, params, f3, f4, backend='continuous')
    scale = np.abs(transposed.r.flat).max()
    assert np.allclose(continuous.r.flat, transposed.r.flat, atol=1e-10 * scale)
    assert np.allclose(continuous.s.values, transposed.s.values,
                       atol=1e-10 * np.abs(transposed.s.values).max())

@pytest.mark.slow
def test_continuous_backend_refines_at_second_order(params, boundary_data):
    residuals = []
    for n in 16, 32:
        grid = mesh.Grid(n, n)
        trace, flux = boundary_data(grid)
        report = adjoint.duality_check_steady(steady.LinearizationPoint.rest(grid), params,
                                              trace, flux, backend='continuous')
        assert report.adjoint_kind == 'continuous-discretized'
        residuals.append(report.abs_residual)
    assert 3.2 <= residuals[0] / residuals[1] <= 4.8
