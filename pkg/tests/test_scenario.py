import pytest

from boussinesq_bench.bench import scenario
from boussinesq_bench.config import io
from boussinesq_bench import errors


def _quick(**changes):
    fields = dict(nx=8, t_final=0.003, trials=3)
    fields.update(changes)
    return scenario.ScenarioConfig(**fields)

def test_defaults():
    cfg = scenario.ScenarioConfig(nx=8)
    assert cfg.ny == 8
    assert (cfg.dt, cfg.t_final, cfg.steps) == (1e-3, 0.1, 100)
    assert cfg.beta == (0.0, 1.0)
    assert cfg.lambda0 is None
    assert cfg.suites == scenario.DEFAULT_SUITES
    assert cfg.levels == (8, 16, 32)
    assert cfg.params().lambda0 == pytest.approx(1.5)

@pytest.mark.parametrize('changes, key', [({'dt': 0.0}, 'time.dt'),
                                          ({'nx': 2}, 'grid.nx'),
                                          ({'beta': (1.0,)}, 'physics.beta'),
                                          ({'lambda0': -1.0}, 'physics.lambda0'),
                                          ({'boundary': 'vortex'}, 'boundary.generator'),
                                          ({'solver': 'spectral'}, 'solver.kind'),
                                          ({'suites': ('unknown',)}, 'checks.suites'),
                                          ({'levels': (2, 4, 8)}, 'study.levels'),
                                          ({'tolerances': {'energy': -1.0}}, 'tolerances.energy')])
def test_invalid_fields_name_their_key(changes, key):
    with pytest.raises(errors.ConfigError) as raised:
        scenario.ScenarioConfig(**dict({'nx': 8}, **changes))
    assert raised.value.key == key

def test_boundary_generators():
    assert scenario.boundary_generator_names()[:3] == list(scenario.BASIC_BOUNDARY_GENERATORS)
    cfg = _quick(boundary='inflow')
    grid = cfg.grid()
    trace, flux = scenario.make_boundary(cfg, grid, cfg.params(grid)).at(0.0)
    assert trace.net_flux() == pytest.approx(0.0, abs=1e-12)
    assert trace.normal.any()
    assert not flux.values.any()

def test_lid_moves_only_the_top_wall():
    cfg = _quick(boundary='lid')
    grid = cfg.grid()
    trace, _ = scenario.make_boundary(cfg, grid, cfg.params(grid)).at(0.0)
    assert not trace.normal.any()
    _, top = trace.wall('top')
    _, bottom = trace.wall('bottom')
    assert top.max() > 0 and not bottom.any()

def test_zero_scenario_writes_artifacts(tmp_path):
    output = tmp_path.joinpath('zero')
    report = scenario.run_scenario(_quick(output=str(output)))
    assert report.passed
    assert report.norms['velocity_l2'] == 0.0
    assert report.norms['steps'] == 3
    assert report.norms['divergence_violations'] == 0
    assert {path.name for path in output.iterdir()} == {'diagnostics.csv', 'checkpoint.bspl',
                                                        'report.json'}
    written = io.read_report(output.joinpath('report.json'))
    assert set(written) == {'config', 'checks', 'norms', 'timings'}
    assert [check['name'] for check in written['checks']] == list(scenario.DEFAULT_SUITES)

def test_seeded_runs_give_equal_diagnostics(tmp_path):
    outputs = []
    for name in 'first', 'second':
        cfg = _quick(initial='random', initial_amplitude=0.1, suites=(),
                     output=str(tmp_path.joinpath(name)))
        scenario.run_scenario(cfg)
        outputs.append(tmp_path.joinpath(name, 'diagnostics.csv').read_bytes())
    assert outputs[0] == outputs[1]

def test_batch_needs_distinct_outputs(tmp_path):
    cfg = _quick(output=str(tmp_path))
    with pytest.raises(ValueError):
        scenario.run_batch([cfg, cfg])

@pytest.mark.parametrize('solver', scenario.SOLVERS)
def test_every_solver_runs(solver):
    cfg = _quick(boundary='trig', initial='lift', solver=solver, suites=('divergence',))
    report = scenario.run_scenario(cfg)
    assert report.trajectory.steps == 3
    assert report.passed, [result.as_dict() for result in report.checks]

def test_run_suites_without_solving():
    results = scenario.run_suites(_quick(boundary='trig'), ('leray', 'compatibility'))
    assert [result.name for result in results] == ['leray', 'compatibility']
    assert all(result.passed for result in results)
