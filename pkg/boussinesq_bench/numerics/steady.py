"""Steady linearized Boussinesq solvers.

Contains the block operator of the linearization around a stationary state, the weak bilinear
form and its coercivity estimate, the Dirichlet operator for velocity data and the two lifting
operators for nonhomogeneous boundary data.
"""

__author__ = 'Rajarshi Mandal'
__version__ = '1.0'
__all__ = ['LinearizationPoint',
           'SteadyOperator',
           'SteadySolution',
           'LiftResult',
           'RegularitySplit',
           'EmbeddingConstants',
           'CoercivityReport',
           'bilinear_form_a',
           'estimate_embedding_constants',
           'lambda0_estimate',
           'coercivity_probe',
           'solve_steady_homogeneous',
           'dirichlet_operator_dz',
           'lift_l0',
           'lift_lz',
           'solve_steady_nonhomogeneous',
           'regularity_split',
           'linearized_blocks',
           'implicit_euler_operator',
           'mass_selector']

import dataclasses
import functools
import logging
from typing import Tuple

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from boussinesq_bench import errors
from boussinesq_bench import utils
from boussinesq_bench.numerics import leray
from boussinesq_bench.numerics import mesh

EMBEDDING_COEFFICIENT = 7 ** 7 / 1024
CONDITION_WARNING = 1e12
RESIDUAL_WARNING = 1e-10
SPLIT_TOLERANCE = 1e-9

@dataclasses.dataclass(frozen=True)
class LinearizationPoint:
    """Stationary state (z_s, theta_s) around which the equations are linearized.

    Args:
        velocity (mesh.VectorField): Discretely solenoidal stationary velocity.
        temperature (mesh.ScalarField): Stationary temperature.
        trace (:obj:`mesh.BoundaryTrace`, optional): Tangential wall values of the velocity;
            zero when omitted.
    """
    velocity: mesh.VectorField
    temperature: mesh.ScalarField
    trace: mesh.BoundaryTrace = None

    def __post_init__(self):
        grid = self.velocity.grid
        grid.check(self.temperature)
        if self.trace is None:
            object.__setattr__(self, 'trace', mesh.BoundaryTrace.from_field(self.velocity))
        residual = np.linalg.norm(mesh.divergence(self.velocity).flat) * np.sqrt(grid.cell_area)
        scale = mesh.norms(self.velocity).l2
        if residual > 1e-10 * max(scale, 1e-300) and scale > 0:
            raise errors.CompatibilityError('Linearization velocity is not solenoidal', residual)

    @classmethod
    def rest(cls, grid):
        """Returns:
            LinearizationPoint: Zero velocity and temperature.
        """
        return cls(mesh.VectorField.zero(grid), mesh.ScalarField.zero(grid))

    @property
    def grid(self):
        return self.velocity.grid

    @functools.cached_property
    def velocity_h1(self):
        return mesh.norms(self.velocity, self.trace).h1

    @functools.cached_property
    def temperature_h1(self):
        return mesh.norms(self.temperature).h1

    def is_rest(self):
        return not (self.velocity.flat.any() or self.temperature.flat.any())

@dataclasses.dataclass(frozen=True)
class SteadySolution:
    """Velocity, pressure and temperature of a steady solve.

    Args:
        velocity (mesh.VectorField): Velocity with the trace's normal values on boundary edges.
        pressure (mesh.ScalarField): Mean-zero pressure.
        temperature (mesh.ScalarField): Temperature.
        residual (float): Relative residual of the assembled system.
        warnings (tuple(str)): Conditioning and compatibility remarks.
    """
    velocity: mesh.VectorField
    pressure: mesh.ScalarField
    temperature: mesh.ScalarField
    residual: float = 0.0
    warnings: Tuple[str, ...] = ()

    def __iter__(self):
        return iter((self.velocity, self.pressure, self.temperature))

@dataclasses.dataclass(frozen=True)
class LiftResult:
    """Solution of a lifting problem for boundary data.

    Args:
        velocity (mesh.VectorField): Solenoidal velocity carrying the trace.
        pressure (mesh.ScalarField): Mean-zero pressure.
        temperature (mesh.ScalarField): Temperature part carrying the flux.
        shift (float): Shift the lifting was computed with.
        removed_flux_mean (float): Boundary mean removed from the flux.
    """
    velocity: mesh.VectorField
    pressure: mesh.ScalarField
    temperature: mesh.ScalarField
    shift: float = 0.0
    removed_flux_mean: float = 0.0

    @classmethod
    def zero(cls, grid, shift=0.0):
        return cls(mesh.VectorField.zero(grid), mesh.ScalarField.zero(grid),
                   mesh.ScalarField.zero(grid), shift)

def linearized_blocks(grid, params, point, shift, advection=True, coupling=True):
    """Blocks of the steady linearized operator on full rows and extended velocity columns.

    Args:
        grid (mesh.Grid): Grid.
        params (mesh.PhysicalParams): Parameters.
        point (LinearizationPoint): Linearization point.
        shift (float): Zeroth order coefficient.
        advection (:obj:`bool`, optional): Include advection by the linearization point.
        coupling (:obj:`bool`, optional): Include buoyancy and ``u . grad(theta_s)``.

    Returns:
        dict(str, scipy.sparse.csr_matrix): Keys 'momentum', 'pressure', 'buoyancy',
            'continuity', 'coupling', 'temperature' and 'flux'.
    """
    z = point.velocity
    extension = grid.extension.T
    momentum = (shift * sparse.diags(grid.interior_mask) @ extension
                - params.nu * grid.dirichlet_laplacian)
    temperature = shift * sparse.eye(grid.n_cells) - params.mu * grid.neumann_laplacian
    flux = -params.mu * grid.neumann_flux_source
    if advection:
        momentum = (momentum + mesh.momentum_advection_matrix(grid, z.flat)
                    + mesh.momentum_advection_carrier_matrix(grid, z.extended(point.trace))
                    @ extension)
        cells, faces = mesh.scalar_advection_matrices(grid, z.flat)
        temperature = temperature + cells
        flux = flux + faces
    beta = params.beta if coupling else (0.0, 0.0)
    if coupling:
        transport = mesh.temperature_gradient_matrix(grid, point.temperature.flat)
    else:
        transport = sparse.csr_matrix((grid.n_cells, grid.n_velocity))
    return {'momentum': sparse.csr_matrix(momentum),
            'pressure': grid.gradient_matrix,
            'buoyancy': -mesh.buoyancy_matrix(grid, beta),
            'continuity': sparse.csr_matrix(-grid.divergence_matrix @ extension),
            'coupling': sparse.csr_matrix(transport @ extension),
            'temperature': sparse.csr_matrix(temperature),
            'flux': sparse.csr_matrix(flux)}

class SteadyOperator:
    """Factorized block operator of the steady linearized system.

    Unknowns are ordered as interior velocity, pressure, temperature, a continuity multiplier and,
    without shift, a temperature multiplier; the rows are momentum, continuity, temperature, the
    pressure mean and the temperature mean. Boundary data enter through sparse maps from the
    trace vector and the flux vector to the right hand side.

    Args:
        grid (mesh.Grid): Grid.
        params (mesh.PhysicalParams): Physical parameters.
        point (:obj:`LinearizationPoint`, optional): Linearization point; rest when omitted.
        shift (:obj:`float`, optional): Zeroth order coefficient; ``params.lambda0`` when
            omitted.
        advection (:obj:`bool`, optional): Include advection by the linearization point.
        coupling (:obj:`bool`, optional): Include buoyancy and ``u . grad(theta_s)``.
        temperature (:obj:`bool`, optional): Include the temperature equation.
    """
    def __init__(self, grid, params, point=None, *, shift=None, advection=True, coupling=True,
                 temperature=True):
        self._grid = grid
        self._params = params
        self._point = LinearizationPoint.rest(grid) if point is None else point
        grid.check(self._point.velocity)
        self._shift = params.lambda0 if shift is None else float(shift)
        self._advection = advection
        self._coupling = coupling
        self._temperature = temperature
        self._pin_temperature = temperature and self._shift == 0
        self._assemble()
        logging.info(f'Factoring steady operator on {grid} ({self.size} unknowns, '
                     f'shift {self._shift}).')
        try:
            self._lu = splinalg.splu(self._matrix.tocsc())
        except RuntimeError as error:
            raise errors.SolverError(f'Steady factorization failed on {grid}: {error}') from error

    @property
    def grid(self):
        return self._grid

    @property
    def params(self):
        return self._params

    @property
    def point(self):
        return self._point

    @property
    def shift(self):
        return self._shift

    @property
    def matrix(self):
        """scipy.sparse.csr_matrix: Assembled square system matrix."""
        return self._matrix

    @property
    def data_maps(self):
        """tuple(scipy.sparse.csr_matrix, scipy.sparse.csr_matrix): Maps from the trace vector
        and from the flux vector into the right hand side, entering with a minus sign."""
        return self._trace_map, self._flux_map

    @property
    def size(self):
        return self._matrix.shape[0]

    @property
    def has_temperature(self):
        return self._temperature

    @property
    def offsets(self):
        """dict(str, slice): Position of each unknown block in the solution vector."""
        grid = self._grid
        n_i, n_c = grid.interior_edges.size, grid.n_cells
        slices = {'velocity': slice(0, n_i), 'pressure': slice(n_i, n_i + n_c)}
        position = n_i + n_c
        if self._temperature:
            slices['temperature'] = slice(position, position + n_c)
            position += n_c
        slices['continuity'] = slice(position, position + 1)
        position += 1
        if self._pin_temperature:
            slices['temperature_mean'] = slice(position, position + 1)
        return slices

    @functools.cached_property
    def blocks(self):
        """dict(str, scipy.sparse.csr_matrix): Operator blocks, see :func:`linearized_blocks`."""
        return linearized_blocks(self._grid, self._params, self._point, self._shift,
                                 self._advection, self._coupling)

    def _assemble(self):
        grid = self._grid
        b = self.blocks
        inner, data = grid.interior_edges, grid.trace_columns
        n_c = grid.n_cells
        ones = sparse.csr_matrix(np.ones((n_c, 1)))
        pin = sparse.csr_matrix(grid.cell_area * np.ones((1, n_c)))
        momentum = b['momentum'][inner]
        rows = [[momentum[:, inner], b['pressure'][inner]],
                [b['continuity'][:, inner], None]]
        trace_rows = [momentum[:, data], b['continuity'][:, data]]
        flux_rows = [sparse.csr_matrix((inner.size, grid.n_normal)),
                     sparse.csr_matrix((n_c, grid.n_normal))]
        if self._temperature:
            rows[0].append(b['buoyancy'][inner])
            rows[1].append(None)
            rows.append([b['coupling'][:, inner], None, b['temperature']])
            trace_rows.append(b['coupling'][:, data])
            flux_rows.append(b['flux'])
        multiplier = [None] * len(rows)
        multiplier[1] = ones
        for row, entry in zip(rows, multiplier):
            row.append(entry)
        rows.append([None, pin] + [None] * (len(rows[0]) - 2))
        if self._pin_temperature:
            for row in rows:
                row.append(None)
            rows[2][-1] = ones
            rows.append([None, None, pin] + [None] * (len(rows[0]) - 3))
        extra = len(rows) - len(trace_rows)
        trace_rows.append(sparse.csr_matrix((extra, grid.n_trace)))
        flux_rows.append(sparse.csr_matrix((extra, grid.n_normal)))
        self._matrix = sparse.bmat(rows, format='csr')
        self._trace_map = sparse.vstack(trace_rows, format='csr')
        self._flux_map = sparse.vstack(flux_rows, format='csr')

    def right_hand_side(self, f1=None, f2=None, trace=None, flux=None):
        """Assemble the right hand side for sources and boundary data.

        Args:
            f1 (:obj:`mesh.VectorField`, optional): Momentum source.
            f2 (:obj:`mesh.ScalarField`, optional): Temperature source.
            trace (:obj:`mesh.BoundaryTrace`, optional): Velocity data.
            flux (:obj:`mesh.BoundaryFlux`, optional): Temperature data.

        Returns:
            numpy.ndarray: Right hand side.
        """
        grid = self._grid
        rhs = np.zeros(self.size)
        offsets = self.offsets
        if f1 is not None:
            rhs[offsets['velocity']] = f1.flat[grid.interior_edges]
        if f2 is not None and self._temperature:
            rhs[offsets['temperature']] = f2.flat
        if trace is not None:
            rhs -= self._trace_map @ trace.vector
        if flux is not None and self._temperature:
            rhs -= self._flux_map @ flux.values
        return rhs

    def solve_vector(self, rhs, trans='N'):
        """Solve the assembled system or its transpose for a raw right hand side."""
        return self._lu.solve(np.asarray(rhs, dtype=float), trans=trans)

    def condition_estimate(self):
        """Returns:
            float: 1-norm condition number estimate.
        """
        inverse = splinalg.LinearOperator(self._matrix.shape, matvec=self._lu.solve,
                                          rmatvec=lambda x: self._lu.solve(x, trans='T'),
                                          dtype=float)
        return float(splinalg.onenormest(self._matrix) * splinalg.onenormest(inverse))

    def solve(self, f1=None, f2=None, trace=None, flux=None):
        """Solve the steady system.

        Args:
            f1 (:obj:`mesh.VectorField`, optional): Momentum source.
            f2 (:obj:`mesh.ScalarField`, optional): Temperature source.
            trace (:obj:`mesh.BoundaryTrace`, optional): Velocity data.
            flux (:obj:`mesh.BoundaryFlux`, optional): Temperature data.

        Raises:
            CompatibilityError: The trace has nonzero net flux.

        Returns:
            SteadySolution: Solution with residual and warnings.
        """
        grid = self._grid
        warnings = []
        if trace is not None:
            grid.check(trace)
            if abs(trace.net_flux()) > 1e-10 * max(1.0, np.abs(trace.normal).max()):
                raise errors.CompatibilityError('Velocity trace has nonzero net flux',
                                                trace.net_flux())
        rhs = self.right_hand_side(f1, f2, trace, flux)
        solution = self._lu.solve(rhs)
        residual = float(np.linalg.norm(self._matrix @ solution - rhs)
                         / max(np.linalg.norm(rhs), 1e-300))
        if not np.isfinite(solution).all():
            raise errors.SolverError(f'Steady solve on {grid} produced non-finite values!')
        if residual > RESIDUAL_WARNING and np.linalg.norm(rhs) > 0:
            condition = self.condition_estimate()
            message = f'Relative residual {residual:.2e}, condition estimate {condition:.2e}.'
            logging.warning(message)
            warnings.append(message)
        offsets = self.offsets
        if 'temperature_mean' in offsets:
            multiplier = float(solution[offsets['temperature_mean']][0])
            if abs(multiplier) > 1e-12:
                message = f'Temperature data incompatible, mean source {multiplier:.3e} removed.'
                logging.warning(message)
                warnings.append(message)
        logging.info(f'Steady solve on {grid}: relative residual {residual:.2e}.')
        return SteadySolution(*self.unpack(solution, trace), residual, tuple(warnings))

    def unpack(self, solution, trace=None):
        """Split a solution vector into fields.

        Returns:
            tuple(mesh.VectorField, mesh.ScalarField, mesh.ScalarField): Velocity with the
                trace's normal values, pressure and temperature.
        """
        grid = self._grid
        offsets = self.offsets
        velocity = np.zeros(grid.n_velocity)
        velocity[grid.interior_edges] = solution[offsets['velocity']]
        if trace is not None:
            velocity[grid.normal_edges] = trace.normal
        pressure = solution[offsets['pressure']]
        pressure = pressure - pressure.mean()
        temperature = (solution[offsets['temperature']] if self._temperature
                       else np.zeros(grid.n_cells))
        return (mesh.VectorField.from_flat(grid, velocity),
                mesh.ScalarField.from_flat(grid, pressure, mean_zero=True),
                mesh.ScalarField.from_flat(grid, temperature))

    def apply(self, velocity, pressure, temperature, trace=None, flux=None):
        """Apply the operator to fields, without multipliers.

        Args:
            velocity (mesh.VectorField): Velocity; boundary normal values are taken from it.
            pressure (mesh.ScalarField): Pressure.
            temperature (mesh.ScalarField): Temperature.
            trace (:obj:`mesh.BoundaryTrace`, optional): Tangential wall values.
            flux (:obj:`mesh.BoundaryFlux`, optional): Temperature data.

        Returns:
            tuple(mesh.VectorField, mesh.ScalarField, mesh.ScalarField): Momentum, negative
                divergence and temperature residuals.
        """
        grid = self._grid
        b = self.blocks
        extended = velocity.extended(trace)
        momentum = (b['momentum'] @ extended + b['pressure'] @ pressure.flat
                    + b['buoyancy'] @ temperature.flat)
        continuity = b['continuity'] @ extended
        heat = b['coupling'] @ extended + b['temperature'] @ temperature.flat
        if flux is not None:
            heat = heat + b['flux'] @ flux.values
        return (mesh.VectorField.from_flat(grid, momentum),
                mesh.ScalarField.from_flat(grid, continuity),
                mesh.ScalarField.from_flat(grid, heat))

@functools.lru_cache(maxsize=8)
def _rest_operator(grid, params, shift, advection, coupling, temperature):
    return SteadyOperator(grid, params, shift=shift, advection=advection, coupling=coupling,
                          temperature=temperature)

def _operator(point, params, advection=True, coupling=True, temperature=True):
    """Factored operator; operators around rest are shared per grid and parameters."""
    if point.is_rest():
        return _rest_operator(point.grid, params, None, advection, coupling, temperature)
    return SteadyOperator(point.grid, params, point, advection=advection, coupling=coupling,
                          temperature=temperature)

def bilinear_form_a(point, params, first, second):
    """The weak bilinear form of the steady linearized system.

    Sums the shifted mass, viscous, advective, buoyancy, diffusive and coupling terms, each as a
    separate quadrature.

    Args:
        point (LinearizationPoint): Linearization point.
        params (mesh.PhysicalParams): Parameters; ``lambda0`` is the shift.
        first (tuple(mesh.VectorField, mesh.ScalarField)): Zero-trace velocity and temperature.
        second (tuple(mesh.VectorField, mesh.ScalarField)): Test velocity and temperature.

    Returns:
        float: Value of the form.
    """
    (u, phi), (test_u, test_phi) = first, second
    grid = point.grid
    grid.check(u, phi, test_u, test_phi)
    z, theta = point.velocity, point.temperature
    buoyancy = mesh.VectorField.from_flat(grid, mesh.buoyancy_matrix(grid, params.beta)
                                          @ phi.flat)
    coupling = mesh.ScalarField.from_flat(grid, mesh.temperature_gradient_matrix(grid, theta.flat)
                                          @ u.flat)
    terms = (params.lambda0 * mesh.inner_product(u, test_u),
             params.nu * mesh.gradient_inner_product(u, test_u),
             mesh.inner_product(mesh.advect(u, z, point.trace), test_u),
             mesh.inner_product(mesh.advect(z, u), test_u),
             -mesh.inner_product(buoyancy, test_u),
             params.lambda0 * mesh.inner_product(phi, test_phi),
             params.mu * mesh.gradient_inner_product(phi, test_phi),
             mesh.inner_product(mesh.advect(z, phi), test_phi),
             mesh.inner_product(coupling, test_phi))
    return float(sum(terms))

@dataclasses.dataclass(frozen=True)
class EmbeddingConstants:
    """Discrete L4 embedding constants, ``|u|_L4 <= C |u|_H1`` for zero-trace velocities and
    ``|phi|_L4 <= C1 |phi|_H1`` for temperatures, safety factor included."""
    velocity: float
    temperature: float

def _velocity_gram(grid):
    inner = grid.interior_edges
    difference, weights = grid.velocity_difference
    restricted = difference[:, inner]
    return (sparse.diags(grid.velocity_weights[inner])
            + restricted.T @ sparse.diags(weights) @ restricted).tocsc()

def _temperature_gram(grid):
    gradient = grid.gradient_matrix
    return (grid.cell_area * (sparse.eye(grid.n_cells) + gradient.T @ gradient)).tocsc()

def _ascend(gram, fourth_power, samples, iterations):
    """Fixed-point ascent of the ratio ``|x|_4 / |x|_H`` from each sample.

    Args:
        gram (scipy.sparse.csc_matrix): Gram matrix of the H1 inner product.
        fourth_power (callable): x -> (|x|_4^4, gradient of |x|_4^4).
        samples (numpy.ndarray): Starting points, one per row.
        iterations (int): Ascent steps per sample.

    Returns:
        float: Best ratio found.
    """
    lu = splinalg.splu(gram)
    best = 0.0
    for sample in samples:
        x = sample / np.sqrt(sample @ (gram @ sample))
        for _ in range(iterations + 1):
            value, derivative = fourth_power(x)
            best = max(best, value ** 0.25)
            x = lu.solve(derivative)
            norm = np.sqrt(x @ (gram @ x))
            if norm == 0 or not np.isfinite(norm):
                break
            x = x / norm
    return best

@functools.lru_cache(maxsize=8)
def estimate_embedding_constants(grid, restarts=200, iterations=20, seed=0, safety=2.0):
    """Estimate the discrete embedding constants by random sampling and fixed-point ascent.

    Args:
        grid (mesh.Grid): Grid.
        restarts (:obj:`int`, optional): Random starting points per constant.
        iterations (:obj:`int`, optional): Ascent steps per start.
        seed (:obj:`int`, optional): Seed of the sampling stream.
        safety (:obj:`float`, optional): Factor applied to the best ratio.

    Returns:
        EmbeddingConstants: Constants, each at least 1.
    """
    inner = grid.interior_edges
    area = grid.cell_area
    to_u = grid.u_to_cells[:, inner]
    to_v = grid.v_to_cells[:, inner]

    def velocity_power(x):
        uc, vc = to_u @ x, to_v @ x
        speed = uc ** 2 + vc ** 2
        return (area * np.sum(speed ** 2),
                4 * area * (to_u.T @ (speed * uc) + to_v.T @ (speed * vc)))

    def temperature_power(x):
        return area * np.sum(x ** 4), 4 * area * x ** 3

    generator = utils.random_generator(seed, 'embedding', grid.nx, grid.ny)
    velocity = _ascend(_velocity_gram(grid), velocity_power,
                       generator.standard_normal((restarts, inner.size)), iterations)
    temperature = _ascend(_temperature_gram(grid), temperature_power,
                          generator.standard_normal((restarts, grid.n_cells)), iterations)
    constants = EmbeddingConstants(max(1.0, safety * velocity), max(1.0, safety * temperature))
    logging.info(f'Embedding constants on {grid}: C={constants.velocity:.4f}, '
                 f'C1={constants.temperature:.4f} (raw {velocity:.4f}, {temperature:.4f}).')
    return constants

def lambda0_estimate(point, beta, constants=None):
    """Shift that makes the bilinear form coercive.

    Args:
        point (LinearizationPoint): Linearization point.
        beta (tuple(float, float)): Buoyancy vector.
        constants (:obj:`EmbeddingConstants`, optional): Embedding constants; estimated on the
            point's grid when omitted.

    Returns:
        float: Shift estimate.
    """
    if constants is None:
        constants = estimate_embedding_constants(point.grid)
    half_beta = max(abs(b) for b in beta) / 2
    velocity = 1 + EMBEDDING_COEFFICIENT * constants.velocity ** 8 * point.velocity_h1 ** 8
    temperature = (1 + EMBEDDING_COEFFICIENT * constants.temperature ** 8
                   * point.temperature_h1 ** 16)
    return float(max(velocity, temperature) + half_beta)

@dataclasses.dataclass(frozen=True)
class CoercivityReport:
    """Sampled coercivity ratios ``a(x, x) / (|x|_H1^2 / 2)``.

    Args:
        lambda0 (float): Shift used.
        trials (int): Number of samples.
        min_ratio (float): Smallest ratio, infinite without samples.
        embedding_constants (EmbeddingConstants): Constants behind the shift.
        violations (tuple(tuple(int, float))): Sample index and ratio of every ratio below 1.
    """
    lambda0: float
    trials: int
    min_ratio: float
    embedding_constants: EmbeddingConstants
    violations: Tuple[Tuple[int, float], ...] = ()

    @property
    def passed(self):
        return not self.violations

def _form_matrix(point, params):
    """Weighted matrix of the bilinear form on interior velocity and temperature unknowns."""
    grid = point.grid
    blocks = linearized_blocks(grid, params, point, params.lambda0)
    inner = grid.interior_edges
    weights = np.concatenate([grid.velocity_weights[inner],
                              np.full(grid.n_cells, grid.cell_area)])
    system = sparse.bmat([[blocks['momentum'][inner][:, inner], blocks['buoyancy'][inner]],
                          [blocks['coupling'][:, inner], blocks['temperature']]])
    return (sparse.diags(weights) @ system).tocsr()
def coercivity_probe(point, params, trials, seed=0, lambda0=None, constants=None):
    """Sample the coercivity ratio of the bilinear form over random unit states.

    Args:
        point (LinearizationPoint): Linearization point.
        params (mesh.PhysicalParams): Parameters; ``lambda0`` is replaced by the shift used.
        trials (int): Number of random samples.
        seed (:obj:`int`, optional): Seed of the sampling stream.
        lambda0 (:obj:`float`, optional): Shift; :func:`lambda0_estimate` when omitted.
        constants (:obj:`EmbeddingConstants`, optional): Embedding constants.

    Returns:
        CoercivityReport: Ratios and violations.
    """
    grid = point.grid
    if constants is None:
        constants = estimate_embedding_constants(grid)
    if lambda0 is None:
        lambda0 = lambda0_estimate(point, params.beta, constants)
    if trials <= 0:
        return CoercivityReport(lambda0, 0, float('inf'), constants)
    form = _form_matrix(point, params.replace(lambda0=lambda0))
    gram = sparse.block_diag([_velocity_gram(grid), _temperature_gram(grid)]).tocsr()
    generator = utils.random_generator(seed, 'coercivity', grid.nx, grid.ny)
    samples = generator.standard_normal((trials, gram.shape[0]))
    ratios = np.empty(trials)
    for index, sample in enumerate(samples):
        sample = sample / np.sqrt(sample @ (gram @ sample))
        ratios[index] = (sample @ (form @ sample)) / 0.5
    violations = tuple((int(i), float(ratios[i])) for i in np.flatnonzero(ratios < 1))
    for index, ratio in violations:
        logging.warning(f'Coercivity violated by sample {index}: ratio {ratio:.4f}.')
    report = CoercivityReport(float(lambda0), int(trials), float(ratios.min()), constants,
                              violations)
    logging.info(f'Coercivity probe on {grid}: {trials} samples, min ratio '
                 f'{report.min_ratio:.4f}.')
    return report

def solve_steady_homogeneous(point, params, f1=None, f2=None):
    """Solve the steady linearized system with homogeneous boundary data.

    Args:
        point (LinearizationPoint): Linearization point.
        params (mesh.PhysicalParams): Parameters; ``lambda0`` is the shift.
        f1 (:obj:`mesh.VectorField`, optional): Momentum source.
        f2 (:obj:`mesh.ScalarField`, optional): Temperature source.

    Returns:
        SteadySolution: Velocity, mean-zero pressure and temperature.
    """
    return _operator(point, params).solve(f1, f2)

def dirichlet_operator_dz(point, params, trace):
    """Shifted linearized Stokes lifting of a velocity trace.

    Args:
        point (LinearizationPoint): Linearization point.
        params (mesh.PhysicalParams): Parameters; ``lambda0`` is the shift.
        trace (mesh.BoundaryTrace): Velocity data with zero net flux.

    Raises:
        CompatibilityError: The trace has nonzero net flux.

    Returns:
        tuple(mesh.VectorField, mesh.ScalarField): Velocity w and pressure pi.
    """
    solution = _operator(point, params, temperature=False).solve(trace=trace)
    return solution.velocity, solution.pressure

def _mean_free_flux(flux):
    mean = flux.boundary_mean()
    if abs(mean) > 1e-14:
        logging.warning(f'Removed boundary mean {mean:.3e} from temperature flux.')
    return flux.mean_free(), mean

def lift_l0(params, trace, flux):
    """Unshifted Stokes lifting with a harmonic Neumann temperature driving the buoyancy.

    Args:
        params (mesh.PhysicalParams): Parameters; the shift is ignored.
        trace (mesh.BoundaryTrace): Velocity data with zero net flux.
        flux (mesh.BoundaryFlux): Temperature data; its boundary mean is removed.

    Returns:
        LiftResult: Lifting (w, pi, psi).
    """
    grid = trace.grid
    flux, mean = _mean_free_flux(flux)
    psi = leray.solve_neumann_poisson(mesh.ScalarField.zero(grid), flux)
    source = mesh.VectorField.from_flat(grid, mesh.buoyancy_matrix(grid, params.beta) @ psi.flat)
    stokes = _rest_operator(grid, params, 0.0, False, False, False)
    solution = stokes.solve(f1=source, trace=trace)
    return LiftResult(solution.velocity, solution.pressure, psi, 0.0, mean)

def lift_lz(point, params, trace, flux):
    """Shifted coupled lifting with zero sources.

    Args:
        point (LinearizationPoint): Linearization point.
        params (mesh.PhysicalParams): Parameters; ``lambda0`` is the shift.
        trace (mesh.BoundaryTrace): Velocity data with zero net flux.
        flux (mesh.BoundaryFlux): Temperature data; its boundary mean is removed without shift.

    Returns:
        LiftResult: Lifting (w, pi, xi).
    """
    mean = 0.0
    if params.lambda0 == 0:
        flux, mean = _mean_free_flux(flux)
    solution = _operator(point, params).solve(trace=trace, flux=flux)
    return LiftResult(solution.velocity, solution.pressure, solution.temperature,
                      params.lambda0, mean)

def solve_steady_nonhomogeneous(point, params, f1, f2, trace, flux):
    """Solve the steady system with boundary data, directly and through the Dirichlet operator.

    The second path subtracts ``D_z g`` and solves the remainder with homogeneous velocity data
    and the temperature source reduced by the lifted coupling.

    Raises:
        CompatibilityError: The trace has nonzero net flux.
        ConsistencyError: The two paths disagree.

    Returns:
        SteadySolution: Direct solution.
    """
    operator = _operator(point, params)
    direct = operator.solve(f1, f2, trace, flux)
    lifted, lifted_pressure = dirichlet_operator_dz(point, params, trace)
    coupling = operator.blocks['coupling'] @ lifted.extended(trace)
    reduced = mesh.ScalarField.from_flat(point.grid, (0 if f2 is None else f2.flat) - coupling)
    remainder = operator.solve(f1, reduced, None, flux)
    velocity = lifted + remainder.velocity
    pressure = lifted_pressure + remainder.pressure
    scale = max(1.0, mesh.norms(direct.velocity).l2, mesh.norms(direct.pressure).l2,
                mesh.norms(direct.temperature).l2)
    gap = max(mesh.norms(velocity - direct.velocity).l2,
              mesh.norms(pressure - direct.pressure).l2,
              mesh.norms(remainder.temperature - direct.temperature).l2)
    if gap > SPLIT_TOLERANCE * scale:
        raise errors.ConsistencyError(f'Direct and split steady solves differ by {gap:.3e}!')
    logging.debug(f'Direct and split steady solves agree to {gap:.3e}.')
    return direct

@dataclasses.dataclass(frozen=True)
class RegularitySplit:
    """Stokes lifting of the data plus a remainder with homogeneous data."""
    lift: SteadySolution
    remainder: SteadySolution

    def total(self):
        return (self.lift.velocity + self.remainder.velocity,
                self.lift.pressure + self.remainder.pressure,
                self.lift.temperature + self.remainder.temperature)

def regularity_split(point, params, f1, f2, trace, flux):
    """Split the nonhomogeneous steady problem into a shifted Stokes lift carrying the data and a
    remainder with homogeneous data whose sources absorb the transport and coupling terms.

    Returns:
        RegularitySplit: Both parts; their sum is the direct solution.
    """
    grid = point.grid
    stokes = _rest_operator(grid, params, None, False, False, True)
    lift = stokes.solve(trace=trace, flux=flux)
    full = _operator(point, params)
    momentum, _, heat = full.apply(*lift, trace=trace, flux=flux)
    f1 = mesh.VectorField.zero(grid) if f1 is None else f1
    f2 = mesh.ScalarField.zero(grid) if f2 is None else f2
    remainder = full.solve(f1 - momentum, f2 - heat)
    return RegularitySplit(lift, remainder)

def implicit_euler_operator(grid, params, dt, shift=0.0):
    """Factored step matrix of implicit Euler for the linear coupled system around rest.

    The step reads ``Q x_next = E x / dt + b_next`` where ``Q`` is the steady operator with shift
    ``1 / dt`` and no advection, and ``E`` selects the velocity and temperature rows.

    Args:
        grid (mesh.Grid): Grid.
        params (mesh.PhysicalParams): Parameters; ``params.lambda0`` is ignored.
        dt (float): Time step.
        shift (:obj:`float`, optional): Zeroth order coefficient added to ``1 / dt``.

    Returns:
        SteadyOperator: Shared operator.
    """
    if dt <= 0:
        raise ValueError(f'Time step must be positive, got {dt}!')
    return _rest_operator(grid, params, 1.0 / dt + shift, False, True, True)

def mass_selector(operator):
    """Returns:
        numpy.ndarray: 1 on velocity and temperature unknowns, 0 elsewhere.
    """
    selector = np.zeros(operator.size)
    offsets = operator.offsets
    selector[offsets['velocity']] = 1.0
    if 'temperature' in offsets:
        selector[offsets['temperature']] = 1.0
    return selector
