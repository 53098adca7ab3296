import pytest

from boussinesq_bench.bench import scenario
from boussinesq_bench.bench import study


def test_second_order_errors_pass():
    table = study.ConvergenceTable.from_errors([8, 16, 32], [None] * 3, [4e-2, 1e-2, 2.5e-3], 2.0)
    assert table.rows[0].order is None
    assert [row.order for row in table.rows[1:]] == pytest.approx([2.0, 2.0])
    assert table.final_order == pytest.approx(2.0)
    assert table.passed
    assert table.recomputed() == table

def test_first_order_errors_fail():
    table = study.ConvergenceTable.from_errors([8, 16, 32], [None] * 3, [4e-2, 2e-2, 1e-2], 2.0)
    assert table.final_order == pytest.approx(1.0)
    assert not table.passed

def test_order_slack():
    errors = [1.0, 2 ** -1.8, 2 ** -3.6]
    assert study.ConvergenceTable.from_errors([8, 16, 32], [None] * 3, errors, 2.0).passed
    errors = [1.0, 2 ** -1.6, 2 ** -3.2]
    assert not study.ConvergenceTable.from_errors([8, 16, 32], [None] * 3, errors, 2.0).passed

def test_temporal_orders_use_steps():
    table = study.ConvergenceTable.from_errors([8] * 3, [4e-3, 2e-3, 1e-3], [8e-3, 4e-3, 2e-3],
                                               1.0, 'time', 'temporal')
    assert table.final_order == pytest.approx(1.0)
    assert table.passed
    assert table.as_dict()['refined'] == 'time'

def test_zero_error_gives_no_order():
    table = study.ConvergenceTable.from_errors([8, 16, 32], [None] * 3, [1e-2, 0.0, 0.0], 2.0)
    assert not table.passed

def test_at_least_three_levels():
    with pytest.raises(ValueError):
        study.ConvergenceTable.from_errors([8, 16], [None] * 2, [1e-2, 2.5e-3], 2.0)
    with pytest.raises(ValueError):
        study.convergence_study(scenario.ScenarioConfig(nx=8), levels=[8, 16])

@pytest.mark.slow
def test_steady_trig_study():
    cfg = scenario.ScenarioConfig(nx=8, lambda0=1.0, family='trig', target='steady')
    table = study.convergence_study(cfg)
    assert [row.resolution for row in table.rows] == [8, 16, 32]
    assert table.final_order >= 1.7
    assert table.passed

@pytest.mark.slow
def test_first_order_closure_fails():
    cfg = scenario.ScenarioConfig(nx=8, lambda0=1.0, closure='first-order', family='trig',
                                  target='steady')
    table = study.convergence_study(cfg)
    assert table.final_order < 1.7
    assert not table.passed

@pytest.mark.slow
def test_temporal_self_convergence():
    cfg = scenario.ScenarioConfig(nx=8, lambda0=1.0, t_final=0.02,
                                  family='time-modulated-trig', target='temporal',
                                  levels=(5, 10, 20), advection=False)
    table = study.convergence_study(cfg)
    assert table.refined == 'time'
    assert [row.dt for row in table.rows] == pytest.approx([4e-3, 2e-3, 1e-3])
    assert table.final_order >= 0.8

@pytest.mark.slow
def test_monolithic_spatial_study():
    cfg = scenario.ScenarioConfig(nx=8, family='trig', target='monolithic')
    table = study.convergence_study(cfg)
    assert table.refined == 'space'
    assert [row.resolution for row in table.rows] == [8, 16, 32]
    assert table.final_order >= 1.7
    assert table.passed
