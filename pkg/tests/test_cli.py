import pytest
from click.testing import CliRunner

from boussinesq_bench.config import cli

ZERO = """\
[grid]
nx = 8

[time]
t_final = 0.003

[checks]
trials = 3

[run]
output = {output}
"""


@pytest.fixture
def runner():
    return CliRunner()

@pytest.fixture
def scenario_file(tmp_path):
    filename = tmp_path.joinpath('zero.ini')
    filename.write_text(ZERO.format(output=tmp_path.joinpath('out')))
    return filename

def _invoke(runner, *args):
    return runner.invoke(cli.command_line_interface, ['--no-file', *map(str, args)])

def test_run_and_check(runner, scenario_file, tmp_path):
    result = _invoke(runner, 'run', scenario_file)
    assert result.exit_code == 0, result.output
    assert 'divergence' in result.output
    checkpoint = tmp_path.joinpath('out', 'checkpoint.bspl')
    assert checkpoint.exists()
    result = _invoke(runner, 'check', checkpoint, '--energy')
    assert result.exit_code == 0, result.output

def test_study_needs_three_levels(runner, scenario_file):
    result = _invoke(runner, 'study', scenario_file, '--levels', '8')
    assert result.exit_code == 2

def test_invalid_scenario(runner, tmp_path):
    filename = tmp_path.joinpath('bad.ini')
    filename.write_text('[grid]\nnx = 8\n[time]\ndt = -0.1\n')
    result = _invoke(runner, 'run', filename)
    assert result.exit_code == 2
    assert 'time.dt' in result.output

def test_damaged_checkpoint(runner, tmp_path):
    filename = tmp_path.joinpath('bad.bspl')
    filename.write_bytes(b'BSPL')
    result = _invoke(runner, 'check', filename)
    assert result.exit_code == 2

def test_commands_are_registered():
    assert set(cli.command_line_interface.commands) == {'run', 'study', 'duality', 'semigroup',
                                                        'check'}
