import numpy as np
import pytest

from boussinesq_bench.bench import checks
from boussinesq_bench.bench import mms
from boussinesq_bench.numerics import evolve
from boussinesq_bench.numerics import mesh
from boussinesq_bench.numerics import steady
from boussinesq_bench import errors
from boussinesq_bench import utils


@pytest.fixture
def stokes(grid, params):
    return mms.mms_generate('trig', grid, params, 'stokes')

@pytest.fixture
def small_state(grid):
    return checks.random_solenoidal(grid, utils.random_generator(0, 'energy'), 0.01)

def _zero_state(grid):
    return mesh.VectorField.zero(grid), mesh.ScalarField.zero(grid)

def test_homogeneous_energy_decays(grid, params, small_state):
    run = evolve.solve_nonlinear_homogeneous(grid, params, *small_state, 1e-3, 5)
    report = evolve.energy_report(run)
    assert run.steps == 5
    assert report.nonincreasing
    assert report.bounded
    assert report.energies[-1] < report.energies[0]
    assert report.dissipation_velocity > 0

def test_bdf2_runs(grid, params, small_state):
    run = evolve.solve_nonlinear_homogeneous(grid, params, *small_state, 1e-3, 4,
                                             time_scheme='bdf2')
    assert run.scheme == 'homogeneous-bdf2'
    assert run.steps == 4
    assert evolve.energy_report(run).bounded
    with pytest.raises(ValueError):
        evolve.solve_nonlinear_homogeneous(grid, params, *small_state, 1e-3, 4,
                                           time_scheme='crank-nicolson')

def test_homogeneous_run_needs_zero_trace(grid, params, random_field):
    with pytest.raises(errors.CompatibilityError):
        evolve.solve_nonlinear_homogeneous(grid, params, random_field,
                                           mesh.ScalarField.zero(grid), 1e-3, 1)

def test_cfl_guard(grid):
    fast = mesh.VectorField.from_function(grid, lambda x, y: 10 + 0 * x, lambda x, y: 0 * x)
    assert evolve.check_cfl(fast, 1e-3) == pytest.approx(10 * 1e-3 / grid.hx)
    with pytest.raises(errors.StepSizeError) as raised:
        evolve.check_cfl(fast, 0.1)
    assert raised.value.suggested_dt == pytest.approx(0.5 * grid.hx / 10)

def test_zero_data_stay_zero(grid, params):
    run = evolve.solve_full_monolithic(grid, params, mesh.BoundaryData.zero(grid),
                                       _zero_state(grid), 1e-3, 3)
    assert run.steps == 3
    assert all(not velocity.flat.any() for velocity in run.velocity)
    assert all(not temperature.flat.any() for temperature in run.temperature)
    assert run.divergence_ratio() == 0.0

@pytest.mark.parametrize('scheme', evolve.PRESSURE_SCHEMES)
def test_monolithic_run_is_solenoidal(grid, params, stokes, scheme):
    run = evolve.solve_full_monolithic(grid, params, stokes.boundary(), stokes.initial(), 1e-3,
                                       3, stokes.forcing, advection=False,
                                       pressure_scheme=scheme)
    assert run.scheme == f'monolithic-{scheme}'
    assert run.divergence_ratio() <= 1e-9
    assert np.allclose(run.velocity[-1].normal_values, stokes.trace(run.final_time).normal,
                       atol=1e-12)

def test_unknown_pressure_scheme(grid, params):
    with pytest.raises(ValueError):
        evolve.solve_full_monolithic(grid, params, mesh.BoundaryData.zero(grid),
                                     _zero_state(grid), 1e-3, 1, pressure_scheme='chorin')

def test_diagnostics_rows(grid, params, stokes):
    run = evolve.solve_full_monolithic(grid, params, stokes.boundary(), stokes.initial(), 1e-3,
                                       2, stokes.forcing, advection=False)
    assert [row['step'] for row in run.diagnostics] == [0, 1, 2]
    assert all(tuple(row) == evolve.DIAGNOSTIC_COLUMNS for row in run.diagnostics)
    assert run.times == pytest.approx([0.0, 1e-3, 2e-3])

@pytest.mark.parametrize('advection', [False, True])
def test_split_matches_monolithic(grid, params, stokes, advection):
    boundary = mesh.BoundaryData(stokes.trace, lambda t: stokes.flux(t).mean_free())
    split = evolve.solve_full_split(grid, params, boundary, stokes.initial(), 1e-3, 3,
                                    advection=advection)
    monolithic = evolve.solve_full_monolithic(grid, params, boundary, stokes.initial(), 1e-3,
                                              3, advection=advection)
    assert set(split.parts) == {'lifted', 'homogeneous'}
    for a, b, c, d in zip(split.velocity, monolithic.velocity, split.temperature,
                          monolithic.temperature):
        scale = max(1.0, mesh.norms(b).l2 + mesh.norms(d).l2)
        assert mesh.norms(a - b).l2 + mesh.norms(c - d).l2 <= 1e-8 * scale

def test_lifted_run_rests_on_constant_lift(grid, params, trig_trace, cosine_flux):
    boundary = mesh.BoundaryData.constant(trig_trace, cosine_flux)
    run = evolve.solve_linear_lifted(grid, params, boundary, 1e-2, 3)
    first, last = run.velocity[0], run.velocity[-1]
    assert mesh.norms(last - first).l2 <= 1e-9 * mesh.norms(first).l2
    assert set(run.parts) == {'projected', 'lift'}
    assert np.allclose(run.temperature[-1].values, run.temperature[0].values, atol=1e-10)

def test_lifted_step_rejects_non_solenoidal_state(grid, params, trig_trace, cosine_flux,
                                                  random_field):
    target = evolve.lift_target(params, trig_trace, cosine_flux)
    state = evolve.LiftedState(random_field, mesh.ScalarField.zero(grid),
                               mesh.ScalarField.zero(grid), target)
    with pytest.raises(errors.CompatibilityError):
        evolve.step_linear_lifted(params, state, trig_trace, cosine_flux, 1e-2)

def test_primitive_pressure_recovery(grid, params, stokes):
    run = evolve.solve_full_monolithic(grid, params, stokes.boundary(), stokes.initial(), 1e-3,
                                       4, stokes.forcing, advection=False)
    series = evolve.recover_pressure(run, 'primitive')
    scale = max(1.0, max(mesh.norms(velocity).l2 for velocity in run.velocity))
    assert series.max_residual <= 1e-8 * scale
    assert len(series.pressure) == run.steps + 1
    assert all(abs(p.mean()) < 1e-12 for p in series.pressure)
    poisson = evolve.recover_pressure(run, 'poisson')
    assert poisson.primitive == ()

def test_pressure_recovery_arguments(grid, params):
    run = evolve.solve_full_monolithic(grid, params, mesh.BoundaryData.zero(grid),
                                       _zero_state(grid), 1e-3, 2)
    with pytest.raises(ValueError):
        evolve.recover_pressure(run, 'primitive')
    with pytest.raises(ValueError):
        evolve.recover_pressure(run, 'leapfrog')

def test_compatibility_of_lift(grid, params, trig_trace, cosine_flux):
    lift = steady.lift_l0(params, trig_trace, cosine_flux)
    assert evolve.compatibility_check(lift.velocity, lift.temperature, trig_trace, cosine_flux,
                                      params) < 1e-9
    zero_velocity, zero_temperature = _zero_state(grid)
    assert evolve.compatibility_check(zero_velocity, zero_temperature, trig_trace, cosine_flux,
                                      params) > 1e-3

def test_linearized_energy_identity(grid, params, small_state):
    base = evolve.solve_full_monolithic(grid, params, mesh.BoundaryData.zero(grid),
                                        _zero_state(grid), 1e-3, 3)
    run = evolve.solve_linearized_instationary(base, params, *small_state)
    assert len(run.energy_residuals) == 3
    assert min(run.energy_residuals) >= -1e-12
    with pytest.raises(ValueError):
        evolve.solve_linearized_instationary(base, params, *small_state, dt=2e-3)

def test_energy_report_from_rows():
    rows = [{'t': 0.0, 'E': 1.0, 'grad_y_sq': 2.0, 'grad_tau_sq': 1.0},
            {'t': 0.5, 'E': 0.5, 'grad_y_sq': 2.0, 'grad_tau_sq': 1.0},
            {'t': 1.0, 'E': 0.75, 'grad_y_sq': 4.0, 'grad_tau_sq': 0.0}]
    report = evolve.EnergyReport.from_rows(rows)
    assert report.sup_energy == 1.0
    assert report.sup_l2 == pytest.approx(np.sqrt(2.0))
    assert not report.nonincreasing
    assert report.bounded
    assert report.dissipation_velocity == pytest.approx(3.0)
    assert report.dissipation_temperature == pytest.approx(0.5)

@pytest.mark.slow
def test_energy_decays_until_unit_time(params):
    grid = mesh.Grid(16, 16)
    y0, tau0 = checks.random_solenoidal(grid, utils.random_generator(0, 'energy'), 0.5)
    run = evolve.solve_nonlinear_homogeneous(grid, params, y0, tau0, 1e-3, 1000)
    report = evolve.energy_report(run)
    assert run.final_time == pytest.approx(1.0)
    assert report.nonincreasing
    assert report.bounded
    assert report.energies[-1] < report.energies[0]

def _space_time_gap(first, second):
    """Relative L2(0, T; L2) distance of two runs on the same time levels."""
    gap = size = 0.0
    for a, b, c, d in zip(first.velocity, second.velocity, first.temperature,
                          second.temperature):
        gap += mesh.norms(a - b).l2 ** 2 + mesh.norms(c - d).l2 ** 2
        size += mesh.norms(b).l2 ** 2 + mesh.norms(d).l2 ** 2
    return np.sqrt(gap / size)

@pytest.mark.slow
def test_split_tracks_monolithic_under_refinement(params):
    gaps = []
    for n, dt in (16, 1e-3), (32, 5e-4):
        grid = mesh.Grid(n, n)
        solution = mms.mms_generate('time-modulated-trig', grid, params, 'navier-stokes')
        boundary = mesh.BoundaryData(solution.trace, lambda t: solution.flux(t).mean_free())
        steps = int(round(0.05 / dt))
        split = evolve.solve_full_split(grid, params, boundary, solution.initial(), dt, steps,
                                        solution.forcing)
        monolithic = evolve.solve_full_monolithic(grid, params, boundary, solution.initial(),
                                                  dt, steps, solution.forcing)
        gaps.append(_space_time_gap(split, monolithic))
    assert gaps[0] <= 5e-2
    assert gaps[1] <= max(gaps[0], 1e-8)

def test_divergence_violations_are_recorded(grid, params, random_field):
    run = evolve.Trajectory(grid, 1e-3, 'recorded', params)
    zero = mesh.ScalarField.zero(grid)
    for velocity in mesh.VectorField.zero(grid), random_field:
        run.append(velocity, zero, zero, mesh.BoundaryTrace.zero(grid),
                   mesh.BoundaryFlux.zero(grid), np.zeros(grid.n_velocity),
                   (velocity, zero, None))
    assert [step for step, _ in run.divergence_violations] == [1]
    assert run.divergence_violations[0][1] == pytest.approx(run.divergence_ratio())

def test_solenoidal_run_records_no_violations(grid, params, small_state):
    run = evolve.solve_nonlinear_homogeneous(grid, params, *small_state, 1e-3, 3)
    assert run.divergence_violations == []
