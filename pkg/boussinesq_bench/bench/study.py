"""Convergence studies against manufactured solutions."""

__author__ = 'Rajarshi Mandal'
__version__ = '1.0'
__all__ = ['ORDER_SLACK',
           'TARGET_ORDERS',
           'ConvergenceRow',
           'ConvergenceTable',
           'steady_error',
           'monolithic_error',
           'convergence_study']

import dataclasses
import logging
from typing import Optional, Tuple

import numpy as np

from boussinesq_bench.bench import mms
from boussinesq_bench.numerics import evolve
from boussinesq_bench.numerics import mesh
from boussinesq_bench.numerics import steady

ORDER_SLACK = 0.3
TARGET_ORDERS = {'steady': 2.0, 'monolithic': 2.0, 'temporal': 1.0}

@dataclasses.dataclass(frozen=True)
class ConvergenceRow:
    """One refinement level.

    Args:
        resolution (int): Cells along x.
        dt (float): Time step, None for steady studies.
        error (float): Error norm.
        order (float): Observed order against the previous row, None on the first row.
    """
    resolution: int
    dt: Optional[float]
    error: float
    order: Optional[float] = None

@dataclasses.dataclass(frozen=True)
class ConvergenceTable:
    """Errors over refinement levels with observed orders.

    Args:
        rows (tuple(ConvergenceRow)): Rows from coarse to fine.
        target_order (float): Expected order.
        refined (str): 'space' or 'time', the quantity halved between rows.
        study (str): Study target.
    """
    rows: Tuple[ConvergenceRow, ...]
    target_order: float
    refined: str = 'space'
    study: str = 'steady'

    @classmethod
    def from_errors(cls, resolutions, dts, errors, target_order, refined='space',
                    study='steady'):
        """Build a table, computing observed orders from consecutive errors.

        Raises:
            ValueError: Fewer than 3 levels.

        Returns:
            ConvergenceTable: Table.
        """
        if len(errors) < 3:
            raise ValueError('≥3 levels required')
        spacings = [1.0 / n for n in resolutions] if refined == 'space' else list(dts)
        rows = [ConvergenceRow(int(resolutions[0]), dts[0], float(errors[0]))]
        for k in range(1, len(errors)):
            order = (np.log(errors[k - 1] / errors[k]) / np.log(spacings[k - 1] / spacings[k])
                     if errors[k] > 0 and errors[k - 1] > 0 else float('nan'))
            rows.append(ConvergenceRow(int(resolutions[k]), dts[k], float(errors[k]),
                                       float(order)))
        return cls(tuple(rows), float(target_order), refined, study)

    def recomputed(self):
        """Table with the orders rebuilt from resolutions, steps and errors alone."""
        return ConvergenceTable.from_errors([row.resolution for row in self.rows],
                                            [row.dt for row in self.rows],
                                            [row.error for row in self.rows],
                                            self.target_order, self.refined, self.study)

    @property
    def final_order(self):
        return self.rows[-1].order

    @property
    def passed(self):
        order = self.final_order
        return bool(order is not None and np.isfinite(order)
                    and order >= self.target_order - ORDER_SLACK)

    def as_dict(self):
        return {'study': self.study, 'refined': self.refined, 'target_order': self.target_order,
                'passed': self.passed, 'rows': [dataclasses.asdict(row) for row in self.rows]}

def _state_error(velocity, temperature, exact_velocity, exact_temperature, mean_free=False):
    if mean_free:
        temperature, exact_temperature = temperature.mean_free(), exact_temperature.mean_free()
    velocity_gap = velocity - exact_velocity
    temperature_gap = temperature - exact_temperature
    return float(np.sqrt(mesh.inner_product(velocity_gap, velocity_gap)
                         + mesh.inner_product(temperature_gap, temperature_gap)))

def steady_error(cfg, grid):
    """Error of the nonhomogeneous steady solve around rest against the manufactured fields.

    Without shift the temperature is fixed only up to a constant and is compared mean-free.

    Returns:
        float: L2 error of velocity and temperature.
    """
    params = cfg.params(grid)
    solution = mms.mms_generate(cfg.family, grid, params, 'steady')
    f1, f2 = solution.sources()
    result = steady.solve_steady_nonhomogeneous(steady.LinearizationPoint.rest(grid), params,
                                                f1, f2, solution.trace(), solution.flux())
    return _state_error(result.velocity, result.temperature, solution.velocity(),
                        solution.temperature(), mean_free=params.lambda0 == 0)

def _unsteady_run(cfg, grid, dt, steps):
    params = cfg.params(grid)
    regime = 'navier-stokes' if cfg.advection else 'stokes'
    solution = mms.mms_generate(cfg.family, grid, params, regime)
    run = evolve.solve_full_monolithic(grid, params, solution.boundary(), solution.initial(), dt,
                                       steps, solution.forcing, cfg.advection,
                                       cfg.pressure_scheme)
    return run, solution

def monolithic_error(cfg, grid):
    """Error of the monolithic run at the final time against the manufactured fields.

    Returns:
        float: L2 error of velocity and temperature.
    """
    run, solution = _unsteady_run(cfg, grid, cfg.dt, cfg.steps)
    velocity, temperature = run.state(run.steps)
    return _state_error(velocity, temperature, solution.velocity(run.final_time),
                        solution.temperature(run.final_time))

def convergence_study(cfg, levels=None):
    """Run the configured study over refinement levels.

    Spatial targets ('steady', 'monolithic') use the levels as cells per direction, keeping the
    aspect ratio of the configured grid. The temporal target uses them as step counts over
    ``cfg.t_final`` on the configured grid and measures self-convergence: the error of each
    level is its distance at the final time to the run with twice as many steps.

    Args:
        cfg (bench.scenario.ScenarioConfig): Scenario with family, target and solver settings.
        levels (:obj:`sequence(int)`, optional): Levels; ``cfg.levels`` when omitted.

    Raises:
        ValueError: Fewer than 3 levels.

    Returns:
        ConvergenceTable: Errors and observed orders.
    """
    levels = list(cfg.levels if levels is None else levels)
    if len(levels) < 3:
        raise ValueError('≥3 levels required')
    target = cfg.target
    logging.info(f'Convergence study {target} of family {cfg.family} over levels {levels}.')
    if target == 'temporal':
        grid = cfg.grid()
        finals = []
        for steps in levels + [2 * levels[-1]]:
            run, _ = _unsteady_run(cfg, grid, cfg.t_final / steps, steps)
            finals.append(run.state(run.steps))
        errors = [_state_error(*coarse, *fine) for coarse, fine in zip(finals[:-1], finals[1:])]
        table = ConvergenceTable.from_errors([grid.nx] * len(levels),
                                             [cfg.t_final / steps for steps in levels], errors,
                                             TARGET_ORDERS[target], 'time', target)
    else:
        measure = steady_error if target == 'steady' else monolithic_error
        errors, grids = [], []
        for n in levels:
            grid = cfg.grid(n, max(4, int(round(n * cfg.ny / cfg.nx))))
            grids.append(grid)
            errors.append(measure(cfg, grid))
            logging.info(f'Study level {grid}: error {errors[-1]:.4e}.')
        dts = [None if target == 'steady' else cfg.dt] * len(levels)
        table = ConvergenceTable.from_errors([grid.nx for grid in grids], dts, errors,
                                             TARGET_ORDERS[target], 'space', target)
    logging.info(f'Convergence study {target}: final order {table.final_order:.3f}, passed '
                 f'{table.passed}.')
    return table
