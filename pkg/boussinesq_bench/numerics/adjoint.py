"""Adjoint systems and duality certification of transposition solutions.

Two backends solve the steady adjoint system. ``transpose`` applies the exact transpose of the
factored primal operator, so every duality identity holds to solver precision. ``continuous``
discretizes the displayed adjoint equations directly and agrees with the transpose up to the
truncation error.
"""

__author__ = 'Rajarshi Mandal'
__version__ = '1.0'
__all__ = ['AdjointState',
           'AdjointTrajectory',
           'DualityReport',
           'BACKENDS',
           'solve_steady_adjoint',
           'transposition_functional',
           'duality_check_steady',
           'solve_steady_adjoint_div',
           'pressure_functional_lambda1',
           'duality_check_pressure',
           'space_time_operator',
           'solve_unsteady_adjoint',
           'duality_check_unsteady',
           'smooth_sources']

import dataclasses
import logging
from typing import Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from boussinesq_bench import errors
from boussinesq_bench import utils
from boussinesq_bench.numerics import mesh
from boussinesq_bench.numerics import steady

BACKENDS = ('transpose', 'continuous')
RESIDUAL_FLOOR = 1e-14

@dataclasses.dataclass(frozen=True)
class AdjointState:
    """Solution (r, pi, s) of an adjoint system.

    Args:
        r (mesh.VectorField): Adjoint velocity with zero trace.
        pi_tilde (mesh.ScalarField): Adjoint pressure.
        s (mesh.ScalarField): Adjoint temperature.
        c_pi (float): Boundary mean of the adjoint pressure.
        backend (:obj:`str`, optional): Backend that produced the state.
        functional (:obj:`tuple(mesh.BoundaryTrace, mesh.BoundaryFlux)`, optional): Exact
            boundary functional of the transpose backend.
    """
    r: mesh.VectorField
    pi_tilde: mesh.ScalarField
    s: mesh.ScalarField
    c_pi: float
    backend: str = 'continuous'
    functional: Optional[Tuple[mesh.BoundaryTrace, mesh.BoundaryFlux]] = None

    @classmethod
    def zero(cls, grid, backend='continuous'):
        return cls(mesh.VectorField.zero(grid), mesh.ScalarField.zero(grid),
                   mesh.ScalarField.zero(grid), 0.0, backend)

@dataclasses.dataclass(frozen=True)
class AdjointTrajectory:
    """Backward adjoint trajectory; ``states[m]`` belongs to ``times[m]`` and the terminal state
    is zero.

    Args:
        states (tuple(AdjointState)): States at t_0 ... t_(M-1).
        dt (float): Time step.
    """
    states: Tuple[AdjointState, ...]
    dt: float

    @property
    def times(self):
        return np.arange(len(self.states)) * self.dt

    @property
    def initial(self):
        """AdjointState: State at t = 0."""
        return self.states[0]

@dataclasses.dataclass(frozen=True)
class DualityReport:
    """Volume pairing against boundary pairing.

    Args:
        lhs (float): Volume pairing of the primal solution with the sources.
        rhs (float): Boundary pairing of the functional with the data.
        abs_residual (float): ``|lhs - rhs|``.
        rel_residual (float): Residual relative to ``max(|lhs|, |rhs|, floor)``.
        mode (str): 'steady' or 'unsteady'.
        adjoint_kind (str): 'discrete-transpose' or 'continuous-discretized'.
        trials (int): Number of trials, the report holds the worst.
    """
    lhs: float
    rhs: float
    abs_residual: float
    rel_residual: float
    mode: str
    adjoint_kind: str
    trials: int = 1

    @classmethod
    def compare(cls, lhs, rhs, mode, backend, trials=1):
        residual = abs(lhs - rhs)
        relative = residual / max(abs(lhs), abs(rhs), RESIDUAL_FLOOR)
        kind = 'discrete-transpose' if backend == 'transpose' else 'continuous-discretized'
        return cls(float(lhs), float(rhs), float(residual), float(relative), mode, kind, trials)

    @classmethod
    def worst(cls, reports):
        reports = list(reports)
        worst = max(reports, key=lambda report: report.rel_residual)
        return dataclasses.replace(worst, trials=len(reports))

    def as_dict(self):
        return dataclasses.asdict(self)

def smooth_sources(grid, generator, modes=3):
    """Random smooth momentum and temperature sources from a few sine modes.

    Coefficients are drawn independently of the grid, so the same stream gives the same
    continuous sources on every grid.

    Args:
        grid (mesh.Grid): Grid.
        generator (numpy.random.Generator): Coefficient stream.
        modes (:obj:`int`, optional): Modes per direction.

    Returns:
        tuple(mesh.VectorField, mesh.ScalarField): Sources, velocity zero on boundary edges.
    """
    coefficients = generator.standard_normal((3, modes, modes))
    k = np.arange(1, modes + 1)

    def series(c, x, y):
        x = np.asarray(x, dtype=float)[..., None, None]
        y = np.asarray(y, dtype=float)[..., None, None]
        values = (c * np.sin(k[:, None] * np.pi * x / grid.lx)
                  * np.sin(k[None, :] * np.pi * y / grid.ly))
        return values.sum(axis=(-2, -1))

    velocity = mesh.VectorField.from_function(grid, lambda x, y: series(coefficients[0], x, y),
                                              lambda x, y: series(coefficients[1], x, y))
    velocity = velocity.with_normal_values(np.zeros(grid.n_normal))
    temperature = mesh.ScalarField.from_function(
        grid, lambda x, y: series(coefficients[2], x, y) + np.cos(np.pi * x / grid.lx))
    return velocity, temperature

def _row_weights(operator):
    """Quadrature weight of every equation row; multiplier rows carry weight one."""
    grid = operator.grid
    weights = np.ones(operator.size)
    offsets = operator.offsets
    for name in ('velocity', 'pressure', 'temperature'):
        if name in offsets:
            weights[offsets[name]] = grid.cell_area
    return weights

def _pairing_vector(operator, f3=None, f4=None, k=None):
    """Column-side vector c with ``c . x`` the volume pairing of a primal solution x."""
    grid = operator.grid
    c = np.zeros(operator.size)
    offsets = operator.offsets
    if f3 is not None:
        c[offsets['velocity']] = grid.cell_area * f3.flat[grid.interior_edges]
    if f4 is not None:
        c[offsets['temperature']] = grid.cell_area * f4.flat
    if k is not None:
        c[offsets['pressure']] = grid.cell_area * k.flat
    return c

def _boundary_pressure(pressure):
    """Pressure extrapolated to boundary segment midpoints, normal-ordered."""
    grid = pressure.grid
    values = pressure.values
    nx, ny = grid.nx, grid.ny
    first = np.concatenate([values[0, :], values[-1, :], values[:, 0], values[:, -1]])
    second = np.concatenate([values[1, :], values[nx - 2, :], values[:, 1], values[:, ny - 2]])
    return 1.5 * first - 0.5 * second

def _boundary_mean(pressure):
    grid = pressure.grid
    lengths = grid.segment_lengths
    return float(np.sum(lengths * _boundary_pressure(pressure)) / lengths.sum())

def _state_from_dual(operator, dual, backend='transpose', negate=False):
    """Adjoint fields and exact functional from a dual vector ``y = M y_hat``."""
    grid = operator.grid
    sign = -1.0 if negate else 1.0
    hat = sign * dual / _row_weights(operator)
    offsets = operator.offsets
    r = np.zeros(grid.n_velocity)
    r[grid.interior_edges] = hat[offsets['velocity']]
    pi_tilde = mesh.ScalarField.from_flat(grid, hat[offsets['pressure']])
    s = mesh.ScalarField.from_flat(grid, hat[offsets['temperature']])
    c_pi = _boundary_mean(pi_tilde)
    trace_map, flux_map = operator.data_maps
    trace_weights = np.concatenate([grid.segment_lengths, grid.tangential_weights])
    trace = -sign * (trace_map.T @ dual) / trace_weights
    trace[:grid.n_normal] -= c_pi * grid.outward_sign
    flux = -sign * (flux_map.T @ dual) / grid.segment_lengths
    functional = (mesh.BoundaryTrace.from_vector(grid, trace),
                  mesh.BoundaryFlux(grid, flux))
    return AdjointState(mesh.VectorField.from_flat(grid, r), pi_tilde, s, c_pi, backend,
                        functional)

class ContinuousAdjointOperator:
    """Direct discretization of the adjoint of the linearized steady system.

    Args:
        point (steady.LinearizationPoint): Linearization point.
        params (mesh.PhysicalParams): Parameters; ``lambda0`` is the shift.
    """
    def __init__(self, point, params):
        grid = point.grid
        self._grid = grid
        self._shift = params.lambda0
        z = point.velocity.flat
        theta = point.temperature.flat
        inner = grid.interior_edges
        n_c = grid.n_cells
        divergence = grid.divergence_matrix
        u_part = np.zeros(grid.n_velocity)
        u_part[:grid.n_u] = 1.0
        dzx_dx = grid.cells_to_edges @ (divergence @ (u_part * z))
        dzy_dy = grid.cells_to_edges @ (divergence @ ((1 - u_part) * z))
        dzy_dx = grid.u_rows @ grid.gradient_matrix @ (grid.v_to_cells @ z)
        dzx_dy = grid.v_rows @ grid.gradient_matrix @ (grid.u_to_cells @ z)
        u_mask = grid.u_rows.diagonal()
        v_mask = grid.v_rows.diagonal()
        transposed_gradient = (sparse.diags(u_mask * dzx_dx + v_mask * dzy_dy)
                               + sparse.diags(dzy_dx) @ grid.cells_to_edges @ grid.v_to_cells
                               + sparse.diags(dzx_dy) @ grid.cells_to_edges @ grid.u_to_cells)
        transport = mesh.momentum_advection_matrix(grid, z)[:, :grid.n_velocity]
        momentum = (self._shift * sparse.eye(grid.n_velocity)
                    - params.nu * grid.dirichlet_laplacian[:, :grid.n_velocity]
                    + transposed_gradient - transport)
        heat_force = sparse.diags(grid.gradient_matrix @ theta) @ grid.cells_to_edges
        scalar_transport, _ = mesh.scalar_advection_matrices(grid, z)
        temperature = (self._shift * sparse.eye(n_c) - params.mu * grid.neumann_laplacian
                       - scalar_transport)
        beta = params.beta
        buoyancy = -(beta[0] * grid.u_to_cells + beta[1] * grid.v_to_cells)
        ones = sparse.csr_matrix(np.ones((n_c, 1)))
        pin = sparse.csr_matrix(grid.cell_area * np.ones((1, n_c)))
        rows = [[momentum.tocsr()[inner][:, inner], grid.gradient_matrix[inner],
                 heat_force.tocsr()[inner], None],
                [-divergence[:, inner], None, None, ones],
                [buoyancy[:, inner], None, temperature, None],
                [None, pin, None, None]]
        self._pin_temperature = self._shift == 0
        if self._pin_temperature:
            for row in rows:
                row.append(None)
            rows[2][-1] = ones
            rows.append([None, None, pin, None, None])
        self._matrix = sparse.bmat(rows, format='csc')
        self._sizes = (inner.size, n_c)
        logging.info(f'Factoring continuous adjoint on {grid} ({self._matrix.shape[0]} '
                     f'unknowns).')
        self._lu = splinalg.splu(self._matrix)

    def solve(self, f3=None, f4=None):
        grid = self._grid
        n_i, n_c = self._sizes
        rhs = np.zeros(self._matrix.shape[0])
        if f3 is not None:
            rhs[:n_i] = f3.flat[grid.interior_edges]
        if f4 is not None:
            rhs[n_i + n_c:n_i + 2 * n_c] = f4.flat
        solution = self._lu.solve(rhs)
        r = np.zeros(grid.n_velocity)
        r[grid.interior_edges] = solution[:n_i]
        pi_tilde = mesh.ScalarField.from_flat(grid, solution[n_i:n_i + n_c])
        s = mesh.ScalarField.from_flat(grid, solution[n_i + n_c:n_i + 2 * n_c])
        return AdjointState(mesh.VectorField.from_flat(grid, r), pi_tilde, s,
                            _boundary_mean(pi_tilde), 'continuous')

def solve_steady_adjoint(point, params, f3=None, f4=None, backend='transpose'):
    """Solve the steady adjoint system.

    Args:
        point (steady.LinearizationPoint): Linearization point.
        params (mesh.PhysicalParams): Parameters; ``lambda0`` is the shift.
        f3 (:obj:`mesh.VectorField`, optional): Velocity source.
        f4 (:obj:`mesh.ScalarField`, optional): Temperature source.
        backend (:obj:`str`, optional): 'transpose' or 'continuous'.

    Returns:
        AdjointState: Adjoint solution.
    """
    if backend not in BACKENDS:
        raise ValueError(f'Unknown adjoint backend \'{backend}\'!')
    if backend == 'continuous':
        return ContinuousAdjointOperator(point, params).solve(f3, f4)
    operator = steady._operator(point, params)
    dual = operator.solve_vector(_pairing_vector(operator, f3, f4), trans='T')
    return _state_from_dual(operator, dual)

def _stencil_functional(state):
    """Boundary functional by one-sided stencils from the adjoint fields."""
    grid = state.r.grid
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    u, v = state.r.u, state.r.v

    def normal_derivative(wall, first, second, step):
        return -(4 * first - second - 3 * wall) / (2 * step)

    def tangential_derivative(first, second, third, step):
        # quadratic through the three nearest samples; the wall value is not used
        return (2 * first - 3 * second + third) / step

    normal = np.concatenate([normal_derivative(u[0], u[1], u[2], hx),
                             normal_derivative(u[nx], u[nx - 1], u[nx - 2], hx),
                             normal_derivative(v[:, 0], v[:, 1], v[:, 2], hy),
                             normal_derivative(v[:, ny], v[:, ny - 1], v[:, ny - 2], hy)])
    tangential = np.concatenate([
        tangential_derivative(v[0], v[1], v[2], hx),
        tangential_derivative(v[nx - 1], v[nx - 2], v[nx - 3], hx),
        tangential_derivative(u[:, 0], u[:, 1], u[:, 2], hy),
        tangential_derivative(u[:, ny - 1], u[:, ny - 2], u[:, ny - 3], hy)])
    pressure = (_boundary_pressure(state.pi_tilde) - state.c_pi) * grid.outward_sign
    values = state.s.values
    first = np.concatenate([values[0, :], values[-1, :], values[:, 0], values[:, -1]])
    second = np.concatenate([values[1, :], values[nx - 2, :], values[:, 1], values[:, ny - 2]])
    return (mesh.BoundaryTrace(grid, -normal + pressure, -tangential),
            mesh.BoundaryFlux(grid, (9 * first - second) / 8))

def transposition_functional(state):
    """Boundary functional ``(-dr/dn + pi n - c(pi) n, s)`` of an adjoint state.

    States of the transpose backend carry the functional exactly; otherwise one-sided second
    order stencils are applied.

    Args:
        state (AdjointState): Adjoint state with zero-trace r.

    Returns:
        tuple(mesh.BoundaryTrace, mesh.BoundaryFlux): Velocity and temperature functionals.
    """
    if state.functional is not None:
        return state.functional
    return _stencil_functional(state)

def _boundary_pairing(functional, trace, flux):
    velocity, temperature = functional
    return (mesh.boundary_inner_product(velocity, trace)
            + mesh.boundary_inner_product(temperature, flux))

def duality_check_steady(point, params, trace, flux, trials=1, backend='transpose', seed=0):
    """Verify ``<(u, phi), (f3, f4)> = <Lambda, (g, h)>`` over random smooth sources.

    Args:
        point (steady.LinearizationPoint): Linearization point.
        params (mesh.PhysicalParams): Parameters; ``lambda0`` is the shift.
        trace (mesh.BoundaryTrace): Velocity data with zero net flux.
        flux (mesh.BoundaryFlux): Temperature data.
        trials (:obj:`int`, optional): Number of random source pairs.
        backend (:obj:`str`, optional): Adjoint backend.
        seed (:obj:`int`, optional): Seed of the source stream.

    Returns:
        DualityReport: Worst trial.
    """
    grid = point.grid
    primal = steady.solve_steady_nonhomogeneous(point, params, None, None, trace, flux)
    continuous = ContinuousAdjointOperator(point, params) if backend == 'continuous' else None
    generator = utils.random_generator(seed, 'duality-steady')
    reports = []
    for _ in range(max(trials, 1)):
        f3, f4 = smooth_sources(grid, generator)
        lhs = mesh.inner_product(primal.velocity, f3) + mesh.inner_product(primal.temperature,
                                                                           f4)
        if continuous is None:
            state = solve_steady_adjoint(point, params, f3, f4, backend)
        else:
            state = continuous.solve(f3, f4)
        rhs = _boundary_pairing(transposition_functional(state), trace, flux)
        reports.append(DualityReport.compare(lhs, rhs, 'steady', backend))
    report = DualityReport.worst(reports)
    logging.info(f'Steady duality on {grid} ({backend}): worst relative residual '
                 f'{report.rel_residual:.3e} over {report.trials} trials.')
    return report

def solve_steady_adjoint_div(point, params, k):
    """Solve the adjoint system with prescribed divergence ``div r1 = k`` and zero sources.

    Args:
        point (steady.LinearizationPoint): Linearization point.
        params (mesh.PhysicalParams): Parameters; ``lambda0`` is the shift.
        k (mesh.ScalarField): Mean-zero divergence.

    Raises:
        CompatibilityError: ``k`` has nonzero mean.

    Returns:
        AdjointState: (r1, pi1, s1) with the functional of the pressure identity.
    """
    scale = max(np.abs(k.values).max(initial=0.0), 1e-300)
    if abs(k.mean()) > 1e-12 * scale and np.abs(k.values).max(initial=0.0) > 0:
        raise errors.CompatibilityError('Divergence datum has nonzero mean', k.mean())
    operator = steady._operator(point, params)
    dual = operator.solve_vector(_pairing_vector(operator, k=k), trans='T')
    return _state_from_dual(operator, dual, negate=True)

def pressure_functional_lambda1(state):
    """Boundary functional of the divergence adjoint: ``(dr1/dn - pi1 n + c(pi1) n, -s1)``.

    Args:
        state (AdjointState): Output of :func:`solve_steady_adjoint_div`.

    Returns:
        tuple(mesh.BoundaryTrace, mesh.BoundaryFlux): Functional paired with (g, h).
    """
    if state.functional is not None:
        velocity, temperature = state.functional
        return velocity * -1.0, temperature * -1.0
    velocity, temperature = _stencil_functional(state)
    return velocity * -1.0, temperature * -1.0

def duality_check_pressure(point, params, trace, flux, trials=1, seed=0):
    """Verify ``<p, k> = <Lambda1, (g, h)>`` over random mean-zero k.

    Returns:
        DualityReport: Worst trial.
    """
    grid = point.grid
    primal = steady.solve_steady_nonhomogeneous(point, params, None, None, trace, flux)
    generator = utils.random_generator(seed, 'duality-pressure', grid.nx, grid.ny)
    reports = []
    for _ in range(max(trials, 1)):
        k = mesh.ScalarField(grid, generator.standard_normal((grid.nx, grid.ny))).mean_free()
        state = solve_steady_adjoint_div(point, params, k)
        lhs = mesh.inner_product(primal.pressure, k)
        velocity, temperature = pressure_functional_lambda1(state)
        rhs = (mesh.boundary_inner_product(velocity, trace)
               + mesh.boundary_inner_product(temperature, flux))
        reports.append(DualityReport.compare(lhs, rhs, 'steady', 'transpose'))
    return DualityReport.worst(reports)

def space_time_operator(grid, params, dt, steps):
    """Block bidiagonal matrix of ``steps`` implicit Euler steps around rest.

    Row block m reads ``Q x_m - E x_(m-1) / dt``; the initial state is data.

    Returns:
        scipy.sparse.csr_matrix: Space-time matrix.
    """
    operator = steady.implicit_euler_operator(grid, params, dt)
    coupling = sparse.diags(steady.mass_selector(operator) / dt)
    blocks = [[None] * steps for _ in range(steps)]
    for m in range(steps):
        blocks[m][m] = operator.matrix
        if m > 0:
            blocks[m][m - 1] = -coupling
    return sparse.bmat(blocks, format='csr')

def solve_unsteady_adjoint(grid, params, sources, dt, primal_dt=None):
    """Backward implicit Euler, the exact transpose of the forward implicit Euler primal.

    Args:
        grid (mesh.Grid): Grid.
        params (mesh.PhysicalParams): Parameters.
        sources (list(tuple(mesh.VectorField, mesh.ScalarField))): Sources (f3, f4) at
            t_1 ... t_M.
        dt (float): Time step.
        primal_dt (:obj:`float`, optional): Step of the primal trajectory, checked if given.

    Raises:
        ConsistencyError: The steps differ.

    Returns:
        AdjointTrajectory: States at t_0 ... t_(M-1).
    """
    if primal_dt is not None and not np.isclose(primal_dt, dt, rtol=1e-12, atol=0):
        raise errors.ConsistencyError(f'Adjoint step {dt} differs from primal step {primal_dt}!')
    operator = steady.implicit_euler_operator(grid, params, dt)
    selector = steady.mass_selector(operator)
    following = np.zeros(operator.size)
    states = []
    for f3, f4 in reversed(sources):
        rhs = dt * _pairing_vector(operator, f3, f4) + selector * following / dt
        dual = operator.solve_vector(rhs, trans='T')
        states.append(_state_from_dual(operator, dual / dt))
        following = dual
    logging.debug(f'Backward adjoint sweep of {len(sources)} steps on {grid}.')
    return AdjointTrajectory(tuple(reversed(states)), dt)

def duality_check_unsteady(grid, params, boundary, initial, dt, steps, trials=1, seed=0):
    """Verify the space-time transposition identity for the implicit Euler primal.

    The primal trajectory comes from the coupled monolithic integrator without advection. The
    boundary pairing uses the left-endpoint rectangle rule on the adjoint times.

    Args:
        grid (mesh.Grid): Grid.
        params (mesh.PhysicalParams): Parameters.
        boundary (mesh.BoundaryData): Time-dependent data.
        initial (tuple(mesh.VectorField, mesh.ScalarField)): Initial velocity and temperature.
        dt (float): Time step.
        steps (int): Number of steps.
        trials (:obj:`int`, optional): Number of random source trajectories.
        seed (:obj:`int`, optional): Seed of the source stream.

    Returns:
        DualityReport: Worst trial.
    """
    from boussinesq_bench.numerics import evolve
    primal = evolve.solve_full_monolithic(grid, params, boundary, initial, dt, steps,
                                          advection=False, pressure_scheme='coupled',
                                          project_initial=False)
    u0, phi0 = primal.velocity[0], primal.temperature[0]
    generator = utils.random_generator(seed, 'duality-unsteady', steps)
    reports = []
    for _ in range(max(trials, 1)):
        sources = [smooth_sources(grid, generator) for _ in range(steps)]
        lhs = dt * sum(mesh.inner_product(primal.velocity[m + 1], f3)
                       + mesh.inner_product(primal.temperature[m + 1], f4)
                       for m, (f3, f4) in enumerate(sources))
        adjoint = solve_unsteady_adjoint(grid, params, sources, dt, primal.dt)
        rhs = dt * sum(_boundary_pairing(transposition_functional(state),
                                         *boundary.at(primal.times[m + 1]))
                       for m, state in enumerate(adjoint.states))
        rhs += (mesh.inner_product(u0, adjoint.initial.r)
                + mesh.inner_product(phi0, adjoint.initial.s))
        reports.append(DualityReport.compare(lhs, rhs, 'unsteady', 'transpose'))
    report = DualityReport.worst(reports)
    logging.info(f'Unsteady duality on {grid}: worst relative residual '
                 f'{report.rel_residual:.3e} over {report.trials} trials.')
    return report
