import numpy as np
import pytest

from boussinesq_bench.bench import scenario
from boussinesq_bench.config import io
from boussinesq_bench.numerics import evolve
from boussinesq_bench.numerics import mesh
from boussinesq_bench import errors

FULL = """\
# heated cavity
[grid]
nx = 8
ny = 6
lx = 1.5

[time]
dt = 0.002   # coarse
t_final = 0.01

[physics]
beta = 0, 2
lambda0 = auto

[boundary]
generator = lid
amplitude = 0.5

[solver]
kind = split
advection = false

[checks]
suites = divergence, splitting
trials = 4

[study]
levels = 8, 16, 32, 64

[run]
seed = 7

[tolerances]
splitting = 1e-6
"""


def _error(text):
    with pytest.raises(errors.ConfigError) as raised:
        io.parse_config(text)
    return raised.value

def test_minimal_scenario_takes_defaults():
    cfg = io.parse_config('[grid]\nnx = 8\n')
    assert cfg == scenario.ScenarioConfig(nx=8)

def test_full_scenario():
    cfg = io.parse_config(FULL)
    assert (cfg.nx, cfg.ny, cfg.lx) == (8, 6, 1.5)
    assert cfg.dt == 0.002
    assert cfg.beta == (0.0, 2.0)
    assert cfg.lambda0 is None
    assert cfg.boundary == 'lid' and cfg.boundary_amplitude == 0.5
    assert cfg.solver == 'split' and not cfg.advection
    assert cfg.suites == ('divergence', 'splitting')
    assert cfg.levels == (8, 16, 32, 64)
    assert cfg.seed == 7
    assert cfg.tolerances == {'splitting': 1e-6}
    assert cfg.tolerance('splitting') == 1e-6

def test_invalid_value_names_key_and_line():
    error = _error('[grid]\nnx = 8\n\n[time]\ndt = -0.1\n')
    assert error.key == 'time.dt'
    assert error.line == 5
    assert 'time.dt' in str(error)

@pytest.mark.parametrize('text, key, line', [
    ('[grid]\nnx = 8\nnz = 4\n', 'grid.nz', 3),
    ('[grid]\nnx = 8\n[mesh]\nnx = 4\n', 'mesh', 3),
    ('[grid]\nnx = eight\n', 'grid.nx', 2),
    ('[grid]\nnx = 8\n[solver]\nadvection = sometimes\n', 'solver.advection', 4),
    ('[grid]\nnx = 8\n[physics]\nbeta = 1\n', 'physics.beta', 4),
    ('[grid]\nnx = 8\nnx = 16\n', 'grid.nx', 3),
    ('[grid]\nny = 8\n', 'grid.nx', 1),
])
def test_problems_are_located(text, key, line):
    error = _error(text)
    assert error.key == key
    assert error.line == line

def test_key_outside_section():
    assert _error('nx = 8\n').line == 1

def test_emitted_text_parses_back():
    cfg = io.parse_config(FULL).replace(lambda0=2.0, output='out')
    assert io.parse_config(io.emit_config(cfg)) == cfg

def test_scenario_file(tmp_path):
    cfg = io.parse_config(FULL)
    filename = tmp_path.joinpath('cavity.ini')
    io.write_scenario(filename, cfg)
    assert io.read_scenario(filename) == cfg

def test_report_file(tmp_path):
    filename = tmp_path.joinpath('report.json')
    io.write_report(filename, {'norms': {'l2': np.float64(0.5)}, 'values': np.arange(3)})
    assert io.read_report(filename) == {'norms': {'l2': 0.5}, 'values': [0, 1, 2]}

def test_diagnostics_file(tmp_path):
    rows = [{'step': m, 't': 0.1 * m, 'E': 1.0 / (m + 1), 'div_norm': 0.0, 'grad_y_sq': 2.0,
             'grad_tau_sq': 1.0 / 3, 'residual': 1e-15} for m in range(3)]
    filename = tmp_path.joinpath('diagnostics.csv')
    io.write_diagnostics(filename, rows)
    assert filename.read_text().splitlines()[0] == ','.join(evolve.DIAGNOSTIC_COLUMNS)
    assert io.read_diagnostics(filename) == rows

@pytest.fixture
def trajectory(grid, generator):
    run = evolve.Trajectory(grid, 0.01, 'written', mesh.PhysicalParams())
    for _ in range(3):
        velocity = mesh.VectorField.from_flat(grid, generator.standard_normal(grid.n_velocity))
        temperature = mesh.ScalarField(grid, generator.standard_normal((8, 8)))
        run.append(velocity, temperature, temperature.mean_free(), mesh.BoundaryTrace.zero(grid),
                   mesh.BoundaryFlux.zero(grid), np.zeros(grid.n_velocity),
                   (velocity, temperature, None))
    return run

def test_checkpoint_file(tmp_path, trajectory):
    filename = tmp_path.joinpath('run.bspl')
    io.write_checkpoint(filename, trajectory)
    data = filename.read_bytes()
    assert data[:4] == io.CHECKPOINT_MAGIC
    stored = io.read_checkpoint(filename)
    assert stored.steps == trajectory.steps == 2
    assert stored.dt == 0.01
    assert stored.times == pytest.approx(trajectory.times)
    for m in range(3):
        assert np.array_equal(stored.velocity[m].flat, trajectory.velocity[m].flat)
        assert np.array_equal(stored.temperature[m].values, trajectory.temperature[m].values)
        assert np.array_equal(stored.pressure[m].values, trajectory.pressure[m].values)
    assert stored.finite()
    assert max(stored.pressure_means()) < 1e-12

@pytest.mark.parametrize('damage', [lambda data: b'XXXX' + data[4:],
                                    lambda data: data[:4] + b'\x02' + data[5:],
                                    lambda data: data[:-8],
                                    lambda data: data[:10]])
def test_damaged_checkpoint(tmp_path, trajectory, damage):
    filename = tmp_path.joinpath('run.bspl')
    io.write_checkpoint(filename, trajectory)
    filename.write_bytes(damage(filename.read_bytes()))
    with pytest.raises(errors.CheckpointError):
        io.read_checkpoint(filename)
