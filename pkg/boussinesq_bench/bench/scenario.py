"""Scenarios: a validated configuration, the boundary and initial data it names, the run of the
selected solver, the invariant checks and the artifacts written for it.
"""

__author__ = 'Rajarshi Mandal'
__version__ = '1.0'
__all__ = ['BASIC_BOUNDARY_GENERATORS',
           'INITIAL_GENERATORS',
           'SOLVERS',
           'STUDY_TARGETS',
           'FIELD_KEYS',
           'ScenarioConfig',
           'SolveReport',
           'boundary_generator_names',
           'make_boundary',
           'make_initial',
           'make_forcing',
           'build_context',
           'solve',
           'run_suites',
           'run_scenario',
           'run_batch']

import concurrent.futures
import dataclasses
import functools
import logging
import math
import pathlib
import time
from typing import Dict, Optional, Tuple

import numpy as np

from boussinesq_bench.bench import checks
from boussinesq_bench.bench import mms
from boussinesq_bench.config import io
from boussinesq_bench.numerics import evolve
from boussinesq_bench.numerics import leray
from boussinesq_bench.numerics import mesh
from boussinesq_bench.numerics import semigroup
from boussinesq_bench.numerics import steady
from boussinesq_bench import errors
from boussinesq_bench import utils

BASIC_BOUNDARY_GENERATORS = ('zero', 'inflow', 'lid')
INITIAL_GENERATORS = ('zero', 'lift', 'random', 'manufactured')
SOLVERS = ('split', 'monolithic', 'linear', 'semigroup-duhamel')
STUDY_TARGETS = ('steady', 'monolithic', 'temporal')
DEFAULT_SUITES = ('divergence', 'energy')

# Scenario field -> (section, key) of the scenario file.
FIELD_KEYS = {'nx': ('grid', 'nx'),
              'ny': ('grid', 'ny'),
              'lx': ('grid', 'lx'),
              'ly': ('grid', 'ly'),
              'closure': ('grid', 'closure'),
              'dt': ('time', 'dt'),
              't_final': ('time', 't_final'),
              'nu': ('physics', 'nu'),
              'mu': ('physics', 'mu'),
              'beta': ('physics', 'beta'),
              'lambda0': ('physics', 'lambda0'),
              'boundary': ('boundary', 'generator'),
              'boundary_amplitude': ('boundary', 'amplitude'),
              'initial': ('initial', 'generator'),
              'initial_amplitude': ('initial', 'amplitude'),
              'solver': ('solver', 'kind'),
              'advection': ('solver', 'advection'),
              'pressure_scheme': ('solver', 'pressure_scheme'),
              'suites': ('checks', 'suites'),
              'trials': ('checks', 'trials'),
              'family': ('study', 'family'),
              'target': ('study', 'target'),
              'levels': ('study', 'levels'),
              'seed': ('run', 'seed'),
              'output': ('run', 'output')}

def boundary_generator_names():
    """Returns:
        list(str): Basic generators followed by the manufactured families.
    """
    return list(BASIC_BOUNDARY_GENERATORS) + mms.family_names()

@dataclasses.dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario.

    Args:
        nx (int): Cells along x.
        ny (:obj:`int`, optional): Cells along y; ``nx`` when omitted.
        lx (:obj:`float`, optional): Domain width.
        ly (:obj:`float`, optional): Domain height.
        closure (:obj:`str`, optional): Wall closure of the velocity Laplacian.
        dt (:obj:`float`, optional): Time step.
        t_final (:obj:`float`, optional): Final time.
        nu (:obj:`float`, optional): Viscosity.
        mu (:obj:`float`, optional): Thermal diffusivity.
        beta (:obj:`tuple(float, float)`, optional): Buoyancy vector.
        lambda0 (:obj:`float`, optional): Shift; estimated around rest when None.
        boundary (:obj:`str`, optional): Boundary data generator.
        boundary_amplitude (:obj:`float`, optional): Boundary data scale.
        initial (:obj:`str`, optional): Initial data generator.
        initial_amplitude (:obj:`float`, optional): Initial data scale.
        solver (:obj:`str`, optional): Solver kind.
        advection (:obj:`bool`, optional): Include advection.
        pressure_scheme (:obj:`str`, optional): Monolithic pressure scheme.
        suites (:obj:`tuple(str)`, optional): Checks to run.
        trials (:obj:`int`, optional): Random samples per check.
        family (:obj:`str`, optional): Manufactured family of studies.
        target (:obj:`str`, optional): Study target.
        levels (:obj:`tuple(int)`, optional): Study levels.
        seed (:obj:`int`, optional): Seed.
        output (:obj:`str`, optional): Output directory; nothing is written when None.
        tolerances (:obj:`dict(str, float)`, optional): Tolerance overrides per check.

    Raises:
        ConfigError: A field is invalid; the error names its scenario file key.
    """
    nx: int
    ny: Optional[int] = None
    lx: float = 1.0
    ly: float = 1.0
    closure: str = 'linear'
    dt: float = 1e-3
    t_final: float = 0.1
    nu: float = 1.0
    mu: float = 1.0
    beta: Tuple[float, float] = (0.0, 1.0)
    lambda0: Optional[float] = None
    boundary: str = 'zero'
    boundary_amplitude: float = 1.0
    initial: str = 'zero'
    initial_amplitude: float = 1.0
    solver: str = 'monolithic'
    advection: bool = True
    pressure_scheme: str = 'coupled'
    suites: Tuple[str, ...] = DEFAULT_SUITES
    trials: int = 20
    family: str = 'trig'
    target: str = 'steady'
    levels: Tuple[int, ...] = (8, 16, 32)
    seed: int = 0
    output: Optional[str] = None
    tolerances: Dict[str, float] = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.ny is None:
            object.__setattr__(self, 'ny', self.nx)
        object.__setattr__(self, 'beta', tuple(float(b) for b in self.beta))
        object.__setattr__(self, 'suites', tuple(self.suites))
        object.__setattr__(self, 'levels', tuple(int(level) for level in self.levels))
        object.__setattr__(self, 'tolerances', {name: float(value) for name, value
                                                in self.tolerances.items()})
        self.validate()

    def _fail(self, field, message):
        section, key = FIELD_KEYS.get(field, ('tolerances', field))
        raise errors.ConfigError(f'{section}.{key}: {message}', key=f'{section}.{key}')

    def validate(self):
        """Raises:
            ConfigError: A field is invalid.
        """
        for field in ('nx', 'ny'):
            if getattr(self, field) < 4:
                self._fail(field, f'at least 4 cells required, got {getattr(self, field)}')
        for field in ('lx', 'ly', 'dt', 't_final', 'nu', 'mu'):
            value = getattr(self, field)
            if not (math.isfinite(value) and value > 0):
                self._fail(field, f'must be positive, got {value}')
        if len(self.beta) != 2:
            self._fail('beta', f'two components required, got {len(self.beta)}')
        if self.lambda0 is not None and not self.lambda0 >= 0:
            self._fail('lambda0', f'must be nonnegative or auto, got {self.lambda0}')
        for field in ('boundary_amplitude', 'initial_amplitude'):
            if not math.isfinite(getattr(self, field)):
                self._fail(field, 'must be finite')
        choices = {'closure': mesh.CLOSURES,
                   'boundary': boundary_generator_names(),
                   'initial': INITIAL_GENERATORS,
                   'solver': SOLVERS,
                   'pressure_scheme': evolve.PRESSURE_SCHEMES,
                   'family': mms.family_names(),
                   'target': STUDY_TARGETS}
        for field, allowed in choices.items():
            if getattr(self, field) not in allowed:
                self._fail(field, f'unknown id \'{getattr(self, field)}\', use one of '
                                  f'{", ".join(allowed)}')
        names = checks.check_names()
        for suite in self.suites:
            if suite not in names:
                self._fail('suites', f'unknown check \'{suite}\', use any of {", ".join(names)}')
        for name, value in self.tolerances.items():
            if name not in names:
                self._fail(name, 'unknown check')
            if not value > 0:
                self._fail(name, f'tolerance must be positive, got {value}')
        if self.trials < 0:
            self._fail('trials', f'must be nonnegative, got {self.trials}')
        if any(level < 4 for level in self.levels):
            self._fail('levels', f'levels must be at least 4, got {list(self.levels)}')
        if self.seed < 0:
            self._fail('seed', f'must be nonnegative, got {self.seed}')

    @property
    def steps(self):
        return max(1, int(round(self.t_final / self.dt)))

    def grid(self, nx=None, ny=None):
        """Grid of the scenario, optionally at another resolution."""
        return mesh.Grid(self.nx if nx is None else nx, self.ny if ny is None else ny, self.lx,
                         self.ly, self.closure)

    def params(self, grid=None):
        """Physical parameters with the shift resolved.

        Returns:
            mesh.PhysicalParams: Parameters.
        """
        lambda0 = self.lambda0
        if lambda0 is None:
            lambda0 = _rest_shift(self.grid() if grid is None else grid, self.beta)
        return mesh.PhysicalParams(self.nu, self.mu, self.beta, lambda0)

    def tolerance(self, name):
        """Effective tolerance of a check."""
        return self.tolerances.get(name, checks.default_tolerances()[name])

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def as_dict(self):
        return dataclasses.asdict(self)

@functools.lru_cache(maxsize=16)
def _rest_shift(grid, beta):
    return steady.lambda0_estimate(steady.LinearizationPoint.rest(grid), beta)

def _lid_profile(grid, amplitude):
    def lid(x, y):
        bump = 16 * (x / grid.lx) ** 2 * (1 - x / grid.lx) ** 2
        return amplitude * bump * np.isclose(y, grid.ly), np.zeros_like(x)
    return lid

def make_boundary(cfg, grid, params):
    """Boundary data named by the configuration.

    ``lid`` drives the top wall tangentially with a smooth profile vanishing at the corners.
    ``inflow`` adds a parabolic flow entering on the left wall and leaving on the right. The
    manufactured families give the data of their exact fields. Temperature fluxes of the basic
    generators are zero.

    Returns:
        mesh.BoundaryData: Data.
    """
    name, amplitude = cfg.boundary, cfg.boundary_amplitude
    if name == 'zero':
        return mesh.BoundaryData.zero(grid)
    if name in mms.family_names():
        return mms.mms_generate(name, grid, params, amplitude=amplitude).boundary()
    lid = _lid_profile(grid, amplitude)
    if name == 'lid':
        trace = mesh.BoundaryTrace.from_function(grid, lid)
    else:
        def inflow(x, y):
            profile = 4 * (y / grid.ly) * (1 - y / grid.ly)
            sides = np.isclose(x, 0.0) | np.isclose(x, grid.lx)
            gx, gy = lid(x, y)
            return gx + amplitude * profile * sides, gy
        trace = mesh.BoundaryTrace.from_function(grid, inflow)
    return mesh.BoundaryData.constant(trace, mesh.BoundaryFlux.zero(grid))

def _manufactured(cfg, grid, params):
    family = cfg.boundary if cfg.boundary in mms.family_names() else cfg.family
    regime = 'navier-stokes' if cfg.advection else 'stokes'
    return mms.mms_generate(family, grid, params, regime, cfg.initial_amplitude)

def make_initial(cfg, grid, params, boundary):
    """Initial data named by the configuration.

    Returns:
        tuple(mesh.VectorField, mesh.ScalarField): Initial velocity and temperature.
    """
    name = cfg.initial
    if name == 'zero':
        return mesh.VectorField.zero(grid), mesh.ScalarField.zero(grid)
    if name == 'lift':
        lift = steady.lift_l0(params, *boundary.at(0.0))
        return lift.velocity, lift.temperature
    if name == 'random':
        generator = utils.random_generator(cfg.seed, 'initial')
        velocity, temperature = checks.random_solenoidal(grid, generator, cfg.initial_amplitude)
        trace = boundary.at(0.0)[0]
        if trace.normal.any():
            velocity = velocity + leray.harmonic_extension(trace)
        return velocity, temperature
    return _manufactured(cfg, grid, params).initial()

def make_forcing(cfg, grid, params):
    """Sources of the manufactured family when the boundary data come from one.

    Returns:
        callable: t -> (f1, f2), or None.
    """
    if cfg.boundary not in mms.family_names():
        return None
    regime = 'navier-stokes' if cfg.advection else 'stokes'
    return mms.mms_generate(cfg.boundary, grid, params, regime, cfg.boundary_amplitude).forcing

def _solve_semigroup_duhamel(grid, params, boundary, initial, dt, steps):
    """Lifted linear evolution through the exact Duhamel step of the dense generator."""
    operator = semigroup.assemble_coupled_operator(grid, params)
    targets = [evolve.lift_target(params, *boundary.at(m * dt)) for m in range(steps + 1)]
    lifts = np.array([semigroup.encode(operator, target.projected, target.lift.temperature)
                      for target in targets])
    velocity, temperature = initial
    start = semigroup.encode(operator, leray.project(velocity).solenoidal, temperature)
    states = semigroup.duhamel_solve(operator, lifts, start, dt)
    trajectory = evolve.Trajectory(grid, dt, 'semigroup-duhamel', params)
    zero = np.zeros(grid.n_velocity)
    for target, state in zip(targets, states):
        projected, phi = semigroup.decode(operator, state)
        trajectory.append(projected + target.complement, phi, target.lift.pressure,
                          target.trace, target.flux, zero, (projected, phi, None))
    return trajectory

def solve(cfg, grid=None):
    """Run the configured solver.

    Args:
        cfg (ScenarioConfig): Scenario.
        grid (:obj:`mesh.Grid`, optional): Grid overriding the configured one.

    Returns:
        tuple(evolve.Trajectory, CheckContext): Run and the context checks use.
    """
    context = build_context(cfg, grid)
    grid, params, boundary = context.grid, context.params, context.boundary
    forcing = make_forcing(cfg, grid, params)
    logging.info(f'Solving scenario with the {cfg.solver} solver on {grid}.')
    if cfg.solver == 'split':
        run = evolve.solve_full_split(grid, params, boundary, context.initial, cfg.dt,
                                      cfg.steps, forcing, cfg.advection)
    elif cfg.solver == 'monolithic':
        run = evolve.solve_full_monolithic(grid, params, boundary, context.initial, cfg.dt,
                                           cfg.steps, forcing, cfg.advection,
                                           cfg.pressure_scheme)
    elif cfg.solver == 'linear':
        run = evolve.solve_linear_lifted(grid, params, boundary, cfg.dt, cfg.steps,
                                         context.initial)
    else:
        run = _solve_semigroup_duhamel(grid, params, boundary, context.initial, cfg.dt,
                                       cfg.steps)
    context.trajectory = run
    return run, context

def build_context(cfg, grid=None):
    """Returns:
        CheckContext: Grid, parameters and data of the scenario, without a run.
    """
    grid = cfg.grid() if grid is None else grid
    params = cfg.params(grid)
    boundary = make_boundary(cfg, grid, params)
    initial = make_initial(cfg, grid, params, boundary)
    return checks.CheckContext(grid, params, boundary, initial, cfg.dt, cfg.steps, cfg.trials,
                               cfg.seed, cfg.advection, cfg.pressure_scheme,
                               cfg.initial_amplitude)

@dataclasses.dataclass
class SolveReport:
    """Outcome of a scenario.

    Args:
        config (ScenarioConfig): Scenario.
        checks (list(checks.CheckResult)): Check outcomes.
        norms (dict(str, float)): Summary norms of the run.
        timings (dict(str, float)): Wall clock seconds per stage.
        trajectory (:obj:`evolve.Trajectory`, optional): Run.
        artifacts (dict(str, str)): Written files by kind.
    """
    config: ScenarioConfig
    checks: list
    norms: Dict[str, float] = dataclasses.field(default_factory=dict)
    timings: Dict[str, float] = dataclasses.field(default_factory=dict)
    trajectory: Optional[evolve.Trajectory] = None
    artifacts: Dict[str, str] = dataclasses.field(default_factory=dict)

    @property
    def passed(self):
        return all(result.passed for result in self.checks)

    def as_dict(self):
        """Returns:
            dict: JSON report with the keys config, checks, norms and timings.
        """
        return {'config': self.config.as_dict(),
                'checks': [result.as_dict() for result in self.checks],
                'norms': dict(self.norms),
                'timings': dict(self.timings)}

def _summary_norms(run):
    velocity, temperature = run.state(run.steps)
    report = evolve.energy_report(run)
    return {'velocity_l2': mesh.norms(velocity).l2,
            'velocity_h1': mesh.norms(velocity, run.traces[-1]).h1,
            'temperature_l2': mesh.norms(temperature).l2,
            'pressure_l2': mesh.norms(run.pressure[-1]).l2,
            'sup_energy': report.sup_energy,
            'divergence_ratio': run.divergence_ratio(),
            'divergence_violations': len(run.divergence_violations),
            'final_time': run.final_time,
            'steps': run.steps}

def run_suites(cfg, suites=None):
    """Run checks on the scenario data without integrating the scenario first.

    Args:
        cfg (ScenarioConfig): Scenario.
        suites (:obj:`sequence(str)`, optional): Checks; the configured ones when omitted.

    Returns:
        list(checks.CheckResult): Outcomes.
    """
    suites = cfg.suites if suites is None else suites
    context = build_context(cfg)
    return checks.run_checks(context, suites, cfg.tolerances)

def run_scenario(cfg):
    """Solve a scenario, run its checks and write its artifacts.

    With an output directory the run writes ``diagnostics.csv``, ``checkpoint.bspl`` and
    ``report.json`` into it.

    Args:
        cfg (ScenarioConfig): Scenario.

    Returns:
        SolveReport: Outcome.
    """
    timings = {}
    start = time.perf_counter()
    run, context = solve(cfg)
    timings['solve'] = time.perf_counter() - start
    start = time.perf_counter()
    results = checks.run_checks(context, cfg.suites, cfg.tolerances)
    timings['checks'] = time.perf_counter() - start
    report = SolveReport(cfg, results, _summary_norms(run), timings, run)
    if cfg.output is not None:
        start = time.perf_counter()
        directory = pathlib.Path(cfg.output)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {'diagnostics': directory.joinpath('diagnostics.csv'),
                 'checkpoint': directory.joinpath('checkpoint.bspl'),
                 'report': directory.joinpath('report.json')}
        io.write_diagnostics(paths['diagnostics'], run.diagnostics)
        io.write_checkpoint(paths['checkpoint'], run)
        timings['write'] = time.perf_counter() - start
        io.write_report(paths['report'], report.as_dict())
        report.artifacts = {kind: str(path) for kind, path in paths.items()}
    passed = sum(result.passed for result in results)
    logging.info(f'Scenario finished: {passed} of {len(results)} checks passed.')
    return report

def run_batch(configs, workers=None):
    """Run scenarios in a process pool, one scenario per worker.

    Args:
        configs (sequence(ScenarioConfig)): Scenarios; their output directories must differ.
        workers (:obj:`int`, optional): Pool size.

    Raises:
        ValueError: Two scenarios share an output directory.

    Returns:
        list(SolveReport): Reports in input order.
    """
    outputs = [cfg.output for cfg in configs if cfg.output is not None]
    if len(set(outputs)) != len(outputs):
        raise ValueError('Scenarios of a batch need distinct output directories!')
    if workers == 1 or len(configs) <= 1:
        return [run_scenario(cfg) for cfg in configs]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_scenario, configs))
