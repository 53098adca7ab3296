import pytest

from boussinesq_bench.bench import checks
from boussinesq_bench.bench import scenario
from boussinesq_bench.numerics import mesh

CHEAP = ['leray', 'skew', 'coercivity', 'duality', 'pressure-duality', 'semigroup',
         'analyticity', 'energy', 'compatibility', 'pressure', 'divergence', 'splitting']
EXPENSIVE = ['duhamel', 'duality-unsteady']


@pytest.fixture(scope='module')
def context():
    cfg = scenario.ScenarioConfig(nx=8, t_final=0.005, boundary='trig', trials=5)
    return scenario.build_context(cfg)

def test_registry():
    assert set(checks.check_names()) == set(CHEAP + EXPENSIVE)
    tolerances = checks.default_tolerances()
    assert tolerances['divergence'] == 1e-9
    assert tolerances['coercivity'] == 1.0

def test_unknown_check(context):
    with pytest.raises(ValueError):
        checks.run_checks(context, ['divergence', 'monotonicity'])

@pytest.mark.parametrize('name', CHEAP)
def test_cheap_checks_pass(context, name):
    result, = checks.run_checks(context, [name])
    assert result.name == name
    assert result.passed, result.as_dict()

@pytest.mark.slow
@pytest.mark.parametrize('name', EXPENSIVE)
def test_expensive_checks_pass(context, name):
    result, = checks.run_checks(context, [name])
    assert result.passed, result.as_dict()

def test_tolerance_override(context):
    relaxed, strict = checks.run_checks(context, ['divergence', 'analyticity'],
                                        {'divergence': 1.0, 'analyticity': 1e300})
    assert relaxed.tolerance == 1.0 and relaxed.passed
    assert strict.tolerance == 1e300 and not strict.passed

def test_result_row(context):
    result, = checks.run_checks(context, ['divergence'])
    row = result.as_dict()
    assert set(row) == {'name', 'passed', 'value', 'tolerance', 'details'}
    assert row['details']['steps'] == 5
    assert row['details']['violations'] == 0

def test_context_integrates_on_demand(grid, params):
    context = checks.CheckContext(grid, params, mesh.BoundaryData.zero(grid),
                                  (mesh.VectorField.zero(grid), mesh.ScalarField.zero(grid)),
                                  1e-3, 1)
    run = context.run()
    assert run.steps == 3
    assert context.run() is run
    trace, flux = context.smooth_data()
    assert trace.normal.any() and flux.values.any()

def test_dense_grid_is_capped():
    grid = mesh.Grid(16, 12, lx=2.0)
    context = checks.CheckContext(grid, mesh.PhysicalParams(), mesh.BoundaryData.zero(grid),
                                  (mesh.VectorField.zero(grid), mesh.ScalarField.zero(grid)),
                                  1e-3, 1)
    dense = context.dense_grid()
    assert (dense.nx, dense.ny, dense.lx) == (8, 8, 2.0)

def test_random_solenoidal_has_zero_trace(rectangle, generator):
    velocity, temperature = checks.random_solenoidal(rectangle, generator, amplitude=0.5)
    assert not velocity.normal_values.any()
    assert abs(mesh.divergence(velocity).values).max() < 1e-12
    assert temperature.values.shape == (rectangle.nx, rectangle.ny)

def test_skew_scaled_by_carrier_and_field(context, monkeypatch):
    carriers = []

    def identity_transport(z, field):
        carriers.append(mesh.norms(z).l2)
        return field

    monkeypatch.setattr(mesh, 'advect', identity_transport)
    result, = checks.run_checks(context, ['skew'], {'skew': 1e300})
    assert result.value == pytest.approx(max(1 / norm for norm in carriers), rel=1e-12)
    assert result.details['momentum'] == pytest.approx(result.details['temperature'], rel=1e-12)
