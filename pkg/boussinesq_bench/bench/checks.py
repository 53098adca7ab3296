"""Invariant checks. Each check is a registered class measuring one value against a tolerance and
returning a :class:`CheckResult`, the row the JSON report stores.
"""

__author__ = 'Rajarshi Mandal'
__version__ = '1.0'
__all__ = ['CheckResult',
           'CheckContext',
           'Check',
           'check_names',
           'default_tolerances',
           'random_solenoidal',
           'run_checks']

import abc
import dataclasses
import logging
from typing import Any, Dict, Optional, Tuple

import numpy as np

from boussinesq_bench.bench import mms
from boussinesq_bench.numerics import adjoint
from boussinesq_bench.numerics import evolve
from boussinesq_bench.numerics import leray
from boussinesq_bench.numerics import mesh
from boussinesq_bench.numerics import semigroup
from boussinesq_bench.numerics import steady
from boussinesq_bench import utils

DENSE_CELLS = 8
DUHAMEL_TIME = 0.2
DUHAMEL_STEPS = (10, 20, 40, 80)
DUALITY_STEPS = 16

@dataclasses.dataclass(frozen=True)
class CheckResult:
    """Outcome of one check.

    Args:
        name (str): Check name.
        passed (bool): Whether the value meets the tolerance.
        value (float): Measured value.
        tolerance (float): Effective tolerance.
        details (dict): Supporting measurements.
    """
    name: str
    passed: bool
    value: float
    tolerance: float
    details: Dict[str, Any] = dataclasses.field(default_factory=dict)

    def as_dict(self):
        return {'name': self.name, 'passed': self.passed, 'value': self.value,
                'tolerance': self.tolerance, 'details': self.details}

def random_solenoidal(grid, generator, amplitude=1.0, modes=3):
    """Smooth random state: a solenoidal velocity with zero trace and a temperature.

    The velocity derives from a sine series stream function vanishing on the boundary, and the
    coefficients do not depend on the grid, so refining keeps the character of the sample.

    Args:
        grid (mesh.Grid): Grid.
        generator (numpy.random.Generator): Coefficient stream.
        amplitude (:obj:`float`, optional): Scale of both fields.
        modes (:obj:`int`, optional): Modes per direction.

    Returns:
        tuple(mesh.VectorField, mesh.ScalarField): Velocity and temperature.
    """
    stream, heat = generator.standard_normal((2, modes, modes)) / np.arange(1, modes + 1) ** 2
    k = np.arange(1, modes + 1)

    def series(coefficients, x, y, wave):
        x = np.asarray(x, dtype=float)[..., None, None]
        y = np.asarray(y, dtype=float)[..., None, None]
        values = (coefficients * wave(k[:, None] * np.pi * x / grid.lx)
                  * wave(k[None, :] * np.pi * y / grid.ly))
        return amplitude * values.sum(axis=(-2, -1))

    velocity = mesh.VectorField.from_stream_function(
        grid, lambda x, y: series(stream, x, y, np.sin))
    velocity = velocity.with_normal_values(np.zeros(grid.n_normal))
    temperature = mesh.ScalarField.from_function(grid, lambda x, y: series(heat, x, y, np.cos))
    return velocity, temperature

@dataclasses.dataclass
class CheckContext:
    """Everything a check may need from a scenario.

    Args:
        grid (mesh.Grid): Grid.
        params (mesh.PhysicalParams): Parameters, shift resolved.
        boundary (mesh.BoundaryData): Boundary data.
        initial (tuple(mesh.VectorField, mesh.ScalarField)): Initial state.
        dt (float): Time step.
        steps (int): Number of steps.
        trials (:obj:`int`, optional): Random samples per check.
        seed (:obj:`int`, optional): Seed of every random stream.
        advection (:obj:`bool`, optional): Include advection in time integrations.
        pressure_scheme (:obj:`str`, optional): Scheme of fallback monolithic runs.
        amplitude (:obj:`float`, optional): Scale of random states.
        trajectory (:obj:`evolve.Trajectory`, optional): Run of the scenario; a coupled
            monolithic run is made on demand when omitted.
    """
    grid: mesh.Grid
    params: mesh.PhysicalParams
    boundary: mesh.BoundaryData
    initial: Tuple[mesh.VectorField, mesh.ScalarField]
    dt: float
    steps: int
    trials: int = 20
    seed: int = 0
    advection: bool = True
    pressure_scheme: str = 'coupled'
    amplitude: float = 1.0
    trajectory: Optional[evolve.Trajectory] = None

    def generator(self, *keys):
        return utils.random_generator(self.seed, *keys, self.grid.nx, self.grid.ny)

    def run(self):
        """Returns:
            evolve.Trajectory: The scenario run, integrated on first use.
        """
        if self.trajectory is None:
            logging.info('No scenario run supplied, integrating the monolithic scheme.')
            self.trajectory = evolve.solve_full_monolithic(
                self.grid, self.params, self.boundary, self.initial, self.dt,
                max(self.steps, 3), advection=self.advection,
                pressure_scheme=self.pressure_scheme)
        return self.trajectory

    def smooth_data(self):
        """Boundary data at t = 0, or trigonometric manufactured data when they vanish.

        Returns:
            tuple(mesh.BoundaryTrace, mesh.BoundaryFlux): Data.
        """
        trace, flux = self.boundary.at(0.0)
        if trace.vector.any() or flux.values.any():
            return trace, flux
        solution = mms.mms_generate('trig', self.grid, self.params)
        return solution.trace(), solution.flux()

    def dense_grid(self):
        """Returns:
            mesh.Grid: Grid of the dense operator checks, at most 8 cells per direction.
        """
        grid = self.grid
        return mesh.Grid(min(grid.nx, DENSE_CELLS), min(grid.ny, DENSE_CELLS), grid.lx, grid.ly,
                         grid.closure)

class Check(utils.RegistryEnabledObject, kind=utils.RegistryKind.CHECK):
    """Check base class. Subclasses define :meth:`measure` and the class attribute
    ``default_tolerance``; a value passes when it does not exceed the tolerance.

    Args:
        tolerance (:obj:`float`, optional): Override of the default tolerance.
    """
    _check_registry = {}
    default_tolerance = 0.0

    def __init__(self, tolerance=None, **kwargs):
        super().__init__(**kwargs)
        self.tolerance = self.default_tolerance if tolerance is None else float(tolerance)

    def __init_subclass__(cls, check_name, **kwargs):
        super().__init_subclass__(kind=cls._flag, **kwargs)
        cls.check_name = check_name
        logging.info(f'Check {cls} found with name {check_name}!')
        cls.retrieve_registry()[check_name] = cls
        logging.debug(f'Found Checks: {cls.retrieve_registry()}.')

    def __repr__(self):
        return (f'{type(self).__name__}(check_name=\'{self.check_name}\', '
                f'tolerance={self.tolerance})')

    @classmethod
    def __subclasshook__(cls, subclass):
        if subclass in cls.retrieve_registry().values():
            return True
        return NotImplemented

    @classmethod
    def retrieve_registry(cls):
        return cls._check_registry

    @classmethod
    def help(cls):
        return cls.__doc__

    @abc.abstractmethod
    def measure(self, context):
        """Measure the checked value.

        Args:
            context (CheckContext): Scenario context.

        Returns:
            tuple(float, dict): Value and supporting details.
        """

    def passes(self, value):
        return bool(np.isfinite(value) and value <= self.tolerance)

    def __call__(self, context):
        value, details = self.measure(context)
        result = CheckResult(self.check_name, self.passes(value), float(value), self.tolerance,
                             details)
        if result.passed:
            logging.info(f'Check {self.check_name} passed: {value:.4e} against '
                         f'{self.tolerance:.1e}.')
        else:
            logging.warning(f'Check {self.check_name} failed: {value:.4e} against '
                            f'{self.tolerance:.1e}.')
        return result

def _relative(difference, reference):
    return float(np.linalg.norm(difference) / max(np.linalg.norm(reference), 1e-300))

class LerayCheck(Check, check_name='leray'):
    """Idempotence, orthogonality and Pythagoras identities of the projection, relative to the
    squared norm of random fields."""
    default_tolerance = 1e-9

    def measure(self, context):
        grid = context.grid
        generator = context.generator('leray')
        worst = {'idempotence': 0.0, 'orthogonality': 0.0, 'pythagoras': 0.0}
        for _ in range(context.trials):
            w = mesh.VectorField.from_flat(grid, generator.standard_normal(grid.n_velocity))
            decomposition = leray.project(w)
            solenoidal = decomposition.solenoidal
            size = mesh.inner_product(w, w)
            again = leray.project(solenoidal).solenoidal
            gradient = decomposition.gradient_part
            measured = {
                'idempotence': mesh.norms(again - solenoidal).l2 / np.sqrt(size),
                'orthogonality': abs(mesh.inner_product(solenoidal, gradient)) / size,
                'pythagoras': abs(size - mesh.inner_product(solenoidal, solenoidal)
                                  - mesh.inner_product(gradient, gradient)) / size}
            worst = {key: max(worst[key], measured[key]) for key in worst}
        return max(worst.values()), worst

class SkewCheck(Check, check_name='skew'):
    """``<S(z, u), u>`` and ``<S(z, tau), tau>`` vanish for solenoidal carriers with zero trace."""
    default_tolerance = 1e-12

    def measure(self, context):
        grid = context.grid
        generator = context.generator('skew')
        inner = grid.interior_edges
        worst = {'momentum': 0.0, 'temperature': 0.0}
        for _ in range(context.trials):
            z = leray.project(mesh.VectorField.from_flat(
                grid, generator.standard_normal(grid.n_velocity))).solenoidal
            flat = np.zeros(grid.n_velocity)
            flat[inner] = generator.standard_normal(inner.size)
            u = mesh.VectorField.from_flat(grid, flat)
            tau = mesh.ScalarField(grid, generator.standard_normal((grid.nx, grid.ny)))
            transport = mesh.advect(z, u)
            heat = mesh.advect(z, tau)
            carrier = mesh.norms(z).l2
            momentum = abs(mesh.inner_product(transport, u)) / max(
                carrier * mesh.norms(u).l2 ** 2, 1e-300)
            temperature = abs(mesh.inner_product(heat, tau)) / max(
                carrier * mesh.norms(tau).l2 ** 2, 1e-300)
            worst = {'momentum': max(worst['momentum'], momentum),
                     'temperature': max(worst['temperature'], temperature)}
        return max(worst.values()), worst

class CoercivityCheck(Check, check_name='coercivity'):
    """Smallest sampled coercivity ratio with the estimated shift; passes at or above the
    tolerance."""
    default_tolerance = 1.0

    def passes(self, value):
        return bool(value >= self.tolerance)

    def measure(self, context):
        point = steady.LinearizationPoint.rest(context.grid)
        report = steady.coercivity_probe(point, context.params, context.trials,
                                         seed=context.seed)
        return report.min_ratio, {'lambda0': report.lambda0,
                                  'violations': len(report.violations),
                                  'trials': report.trials}

class DualityCheck(Check, check_name='duality'):
    """Steady transposition identity with the discrete transpose adjoint."""
    default_tolerance = 1e-8

    def measure(self, context):
        point = steady.LinearizationPoint.rest(context.grid)
        report = adjoint.duality_check_steady(point, context.params, *context.smooth_data(),
                                              trials=context.trials, seed=context.seed)
        return report.rel_residual, report.as_dict()

class UnsteadyDualityCheck(Check, check_name='duality-unsteady'):
    """Space-time transposition identity of the implicit Euler primal."""
    default_tolerance = 1e-7

    def measure(self, context):
        steps = min(max(context.steps, 1), DUALITY_STEPS)
        boundary = context.boundary
        trace, flux = boundary.at(0.0)
        if not (trace.vector.any() or flux.values.any()):
            boundary = mms.mms_generate('time-modulated-trig', context.grid,
                                        context.params).boundary()
        report = adjoint.duality_check_unsteady(context.grid, context.params, boundary,
                                                context.initial, context.dt, steps,
                                                trials=context.trials, seed=context.seed)
        return report.rel_residual, report.as_dict()

class PressureDualityCheck(Check, check_name='pressure-duality'):
    """Pressure identity against the divergence adjoint."""
    default_tolerance = 1e-8

    def measure(self, context):
        point = steady.LinearizationPoint.rest(context.grid)
        report = adjoint.duality_check_pressure(point, context.params, *context.smooth_data(),
                                                trials=context.trials, seed=context.seed)
        return report.rel_residual, report.as_dict()

class SemigroupCheck(Check, check_name='semigroup'):
    """Semigroup law on the dense generator. Half-power composition and the commutation of
    fractional powers with the semigroup are held to ten times the tolerance."""
    default_tolerance = 1e-9

    def measure(self, context):
        operator = semigroup.assemble_coupled_operator(context.dense_grid(), context.params)
        generator = context.generator('semigroup')
        s, t = 0.03, 0.05
        worst = {'law': 0.0, 'half_power': 0.0, 'commutation': 0.0}
        for _ in range(max(1, min(context.trials, 20))):
            x = generator.standard_normal(operator.dimension)
            combined = semigroup.semigroup_apply(operator, s + t, x)
            composed = semigroup.semigroup_apply(operator, s,
                                                 semigroup.semigroup_apply(operator, t, x))
            half = semigroup.fractional_power_apply(operator, 0.5, x)
            full = operator.shifted() @ x
            evolved = semigroup.semigroup_apply(operator, t, x)
            measured = {
                'law': _relative(combined - composed, combined),
                'half_power': _relative(semigroup.fractional_power_apply(operator, 0.5, half)
                                        - full, full),
                'commutation': _relative(
                    semigroup.fractional_power_apply(operator, 0.5, evolved)
                    - semigroup.semigroup_apply(operator, t, half), evolved)}
            worst = {key: max(worst[key], measured[key]) for key in worst}
        value = max(worst['law'], worst['half_power'] / 10, worst['commutation'] / 10)
        return value, dict(worst, method=operator.fractional_method,
                           condition=operator.condition)

class AnalyticityCheck(Check, check_name='analyticity'):
    """Sampled analyticity constant of the shifted generator; passes above the tolerance."""
    default_tolerance = 0.0

    def passes(self, value):
        return bool(value > self.tolerance)

    def measure(self, context):
        operator = semigroup.assemble_coupled_operator(context.dense_grid(), context.params)
        ratio = semigroup.analyticity_probe(operator, context.trials, seed=context.seed)
        return ratio, {'lambda0': operator.lambda0}

class DuhamelCheck(Check, check_name='duhamel'):
    """The L2-in-time gap between implicit Euler and the exact Duhamel evolution of the lifted
    linear problem halves with the step. The value is the largest distance of the measured
    ratios from 2."""
    default_tolerance = 0.3

    def measure(self, context):
        grid = context.dense_grid()
        params = context.params
        operator = semigroup.assemble_coupled_operator(grid, params)
        boundary = mms.mms_generate('time-modulated-trig', grid, params).boundary()
        gaps = []
        for steps in DUHAMEL_STEPS:
            dt = DUHAMEL_TIME / steps
            run = evolve.solve_linear_lifted(grid, params, boundary, dt, steps)
            projected, lifts = run.parts['projected'], run.parts['lift']
            euler = np.array([semigroup.encode(operator, *projected.state(m))
                              for m in range(steps + 1)])
            samples = np.array([semigroup.encode(operator, *lifts.state(m))
                                for m in range(steps + 1)])
            exact = semigroup.duhamel_solve(operator, samples, euler[0], dt)
            gaps.append(float(np.sqrt(dt * np.sum((euler[1:] - exact[1:]) ** 2))))
        ratios = [coarse / fine for coarse, fine in zip(gaps[:-1], gaps[1:])]
        value = max(abs(ratio - 2.0) for ratio in ratios)
        return value, {'discrepancies': gaps, 'ratios': ratios}

class EnergyCheck(Check, check_name='energy'):
    """Largest relative energy increase of an unforced run with homogeneous data."""
    default_tolerance = 1e-12

    def measure(self, context):
        grid = context.grid
        y0, tau0 = random_solenoidal(grid, context.generator('energy'), context.amplitude)
        run = evolve.solve_nonlinear_homogeneous(grid, context.params, y0, tau0, context.dt,
                                                 max(context.steps, 1))
        report = evolve.energy_report(run)
        energies = np.array(report.energies)
        increase = float(np.max(np.diff(energies), initial=0.0) / max(energies[0], 1e-300))
        if not report.bounded:
            increase = float('inf')
        return increase, {'sup_energy': report.sup_energy,
                          'final_energy': report.energies[-1],
                          'dissipation_velocity': report.dissipation_velocity,
                          'dissipation_temperature': report.dissipation_temperature}

class CompatibilityCheck(Check, check_name='compatibility'):
    """Compatibility residual of initial data built from the lift plus a solenoidal field with
    zero trace. The residual of zero data enters scaled by 1000, holding it to a thousandth of
    the tolerance."""
    default_tolerance = 1e-9

    def measure(self, context):
        grid = context.grid
        trace, flux = context.smooth_data()
        lift = steady.lift_l0(context.params, trace, flux)
        y, tau = random_solenoidal(grid, context.generator('compatibility'), context.amplitude)
        compatible = evolve.compatibility_check(lift.velocity + y, lift.temperature + tau, trace,
                                                flux, context.params)
        zero = evolve.compatibility_check(mesh.VectorField.zero(grid),
                                          mesh.ScalarField.zero(grid),
                                          mesh.BoundaryTrace.zero(grid),
                                          mesh.BoundaryFlux.zero(grid), context.params)
        return max(compatible, 1e3 * zero), {'compatible': compatible, 'zero': zero}

class PressureCheck(Check, check_name='pressure'):
    """Largest defining residual of the recovered pressure primitive, relative to the largest
    velocity norm of the run."""
    default_tolerance = 1e-8

    def measure(self, context):
        run = context.run()
        if run.steps < 3:
            return float('inf'), {'reason': f'{run.steps} steps, at least 3 needed'}
        primitive = evolve.recover_pressure(run, 'primitive')
        poisson = evolve.recover_pressure(run, 'poisson')
        scale = max(1.0, max(mesh.norms(velocity).l2 for velocity in run.velocity))
        gap = max(mesh.norms(a - b).l2 for a, b in zip(primitive.pressure[1:],
                                                      poisson.pressure[1:]))
        return primitive.max_residual / scale, {'method_gap': gap, 'scheme': run.scheme}

class DivergenceCheck(Check, check_name='divergence'):
    """Largest ratio of divergence norm to velocity norm over the run."""
    default_tolerance = 1e-9

    def measure(self, context):
        run = context.run()
        return run.divergence_ratio(), {'scheme': run.scheme, 'steps': run.steps,
                                        'violations': len(run.divergence_violations)}

class SplittingCheck(Check, check_name='splitting'):
    """Relative L2-in-time difference between the split and the coupled monolithic runs, with
    the temperature flux made mean-free."""
    default_tolerance = 1e-8

    def measure(self, context):
        grid, params, boundary = context.grid, context.params, context.boundary
        data = mesh.BoundaryData(boundary.velocity, lambda t: boundary.flux(t).mean_free())
        steps = max(context.steps, 1)
        split = evolve.solve_full_split(grid, params, data, context.initial, context.dt, steps,
                                        advection=context.advection)
        monolithic = evolve.solve_full_monolithic(grid, params, data, context.initial,
                                                  context.dt, steps, advection=context.advection)
        difference = sum(mesh.inner_product(a - b, a - b) + mesh.inner_product(c - d, c - d)
                         for a, b, c, d in zip(split.velocity, monolithic.velocity,
                                               split.temperature, monolithic.temperature))
        size = sum(mesh.inner_product(a, a) + mesh.inner_product(c, c)
                   for a, c in zip(monolithic.velocity, monolithic.temperature))
        value = float(np.sqrt(difference / size)) if size > 0 else float(np.sqrt(difference))
        return value, {'steps': steps, 'advection': context.advection}

def check_names():
    """Returns:
        list(str): Registered check names.
    """
    return list(Check.retrieve_registry())

def default_tolerances():
    """Returns:
        dict(str, float): Default tolerance per check.
    """
    return {name: check.default_tolerance for name, check in Check.retrieve_registry().items()}

def run_checks(context, names, tolerances=None):
    """Run checks by name.

    Args:
        context (CheckContext): Scenario context.
        names (sequence(str)): Check names.
        tolerances (:obj:`dict(str, float)`, optional): Tolerance overrides.

    Raises:
        ValueError: Unknown check name.

    Returns:
        list(CheckResult): One result per name, in order.
    """
    tolerances = {} if tolerances is None else tolerances
    registry = Check.retrieve_registry()
    unknown = [name for name in names if name not in registry]
    if unknown:
        raise ValueError(f'Unknown checks {unknown}, use any of {sorted(registry)}!')
    return [registry[name](tolerances.get(name))(context) for name in names]
