"""Time integration of the coupled system.

All integrators take implicit Euler steps around rest with the advection treated explicitly in
skew-symmetric form, so a single factorization serves every step of a run. A
:class:`Trajectory` keeps the states together with the boundary data, the momentum sources and
the per-step diagnostics written to the CSV files.

The lifted evolution splits the velocity into its projection, advanced in time, and a gradient
complement that follows the boundary data without a time derivative. The full splitting driver
adds a homogeneous remainder to it; with mean-free temperature flux the sum reproduces the
monolithic coupled scheme step by step.
"""

__author__ = 'Rajarshi Mandal'
__version__ = '1.0'
__all__ = ['Trajectory',
           'LiftTarget',
           'LiftedState',
           'EnergyReport',
           'PressureSeries',
           'DIAGNOSTIC_COLUMNS',
           'PRESSURE_SCHEMES',
           'check_cfl',
           'lift_target',
           'step_linear_lifted',
           'solve_linear_lifted',
           'solve_linearized_instationary',
           'solve_nonlinear_homogeneous',
           'solve_full_split',
           'solve_full_monolithic',
           'recover_pressure',
           'compatibility_check',
           'energy_report']

import dataclasses
import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from boussinesq_bench import errors
from boussinesq_bench.numerics import leray
from boussinesq_bench.numerics import mesh
from boussinesq_bench.numerics import steady

CFL_LIMIT = 0.5
BLOWUP_FACTOR = 1e6
DIVERGENCE_TOLERANCE = 1e-9
ENERGY_TOLERANCE = 1e-10
COMPATIBILITY_TOLERANCE = 1e-9
DIAGNOSTIC_COLUMNS = ('step', 't', 'E', 'div_norm', 'grad_y_sq', 'grad_tau_sq', 'residual')
PRESSURE_SCHEMES = ('coupled', 'incremental')
TIME_SCHEMES = ('euler', 'bdf2')
QUADRATURES = ('rectangle', 'trapezoid')

@dataclasses.dataclass
class Trajectory:
    """States of a run on the uniform time grid ``t_m = m dt``.

    Args:
        grid (mesh.Grid): Grid.
        dt (float): Time step.
        scheme (str): Integrator that produced the run.
        params (:obj:`mesh.PhysicalParams`, optional): Parameters of the run.
        times (list(float)): Times.
        velocity (list(mesh.VectorField)): Velocity per time, boundary normal values included.
        temperature (list(mesh.ScalarField)): Temperature per time.
        pressure (list(mesh.ScalarField)): Mean-zero pressure per time, zero at t = 0.
        traces (list(mesh.BoundaryTrace)): Velocity data per time.
        fluxes (list(mesh.BoundaryFlux)): Temperature data per time.
        sources (list(numpy.ndarray)): Explicit momentum source of each step on velocity edges,
            buoyancy included; zero at t = 0.
        diagnostics (list(dict)): One row per time with the keys of ``DIAGNOSTIC_COLUMNS``.
        energy_residuals (list(float)): Per-step energy inequality residuals, where computed.
        divergence_violations (list(tuple(int, float))): Step and divergence ratio of every state
            whose divergence exceeds ``DIVERGENCE_TOLERANCE`` relative to its velocity norm.
        parts (dict(str, Trajectory)): Component runs of a split.
    """
    grid: mesh.Grid
    dt: float
    scheme: str
    params: Optional[mesh.PhysicalParams] = None
    times: List[float] = dataclasses.field(default_factory=list)
    velocity: List[mesh.VectorField] = dataclasses.field(default_factory=list)
    temperature: List[mesh.ScalarField] = dataclasses.field(default_factory=list)
    pressure: List[mesh.ScalarField] = dataclasses.field(default_factory=list)
    traces: List[mesh.BoundaryTrace] = dataclasses.field(default_factory=list)
    fluxes: List[mesh.BoundaryFlux] = dataclasses.field(default_factory=list)
    sources: List[np.ndarray] = dataclasses.field(default_factory=list)
    diagnostics: List[dict] = dataclasses.field(default_factory=list)
    energy_residuals: List[float] = dataclasses.field(default_factory=list)
    divergence_violations: List[Tuple[int, float]] = dataclasses.field(default_factory=list)
    parts: Dict[str, 'Trajectory'] = dataclasses.field(default_factory=dict)

    @property
    def steps(self):
        return len(self.times) - 1

    @property
    def final_time(self):
        return self.times[-1]

    def state(self, m):
        """Returns:
            tuple(mesh.VectorField, mesh.ScalarField): Velocity and temperature at step ``m``.
        """
        return self.velocity[m], self.temperature[m]

    def append(self, velocity, temperature, pressure, trace, flux, source, energy_state,
               residual=0.0):
        """Store the next state and its diagnostics row.

        Args:
            velocity (mesh.VectorField): Velocity.
            temperature (mesh.ScalarField): Temperature.
            pressure (mesh.ScalarField): Pressure.
            trace (mesh.BoundaryTrace): Velocity data.
            flux (mesh.BoundaryFlux): Temperature data.
            source (numpy.ndarray): Explicit momentum source of the step.
            energy_state (tuple): ``(y, tau, y_trace)`` whose energy the row reports.
            residual (:obj:`float`, optional): Relative solver residual.

        Returns:
            dict: Diagnostics row.
        """
        grid = self.grid
        step = len(self.times)
        y, tau, y_trace = energy_state
        divergence = float(np.sqrt(grid.cell_area)
                           * np.linalg.norm(grid.divergence_matrix @ velocity.flat))
        row = {'step': step,
               't': step * self.dt,
               'E': 0.5 * (mesh.inner_product(y, y) + mesh.inner_product(tau, tau)),
               'div_norm': divergence,
               'grad_y_sq': mesh.gradient_inner_product(y, y, y_trace, y_trace),
               'grad_tau_sq': mesh.gradient_inner_product(tau, tau),
               'residual': float(residual)}
        scale = mesh.norms(velocity).l2
        if divergence > DIVERGENCE_TOLERANCE * scale:
            self.divergence_violations.append((step, divergence / scale if scale else np.inf))
            logging.warning(f'{self.scheme} step {step}: divergence {divergence:.3e} against '
                            f'velocity norm {scale:.3e}.')
        self.times.append(row['t'])
        self.velocity.append(velocity)
        self.temperature.append(temperature)
        self.pressure.append(pressure)
        self.traces.append(trace)
        self.fluxes.append(flux)
        self.sources.append(source)
        self.diagnostics.append(row)
        logging.debug(f'{self.scheme} step {step}: E={row["E"]:.6e}, div={divergence:.3e}, '
                      f'residual={row["residual"]:.2e}.')
        return row

    def divergence_ratio(self):
        """float: Largest ratio of divergence norm to velocity norm over the run."""
        ratios = [row['div_norm'] / mesh.norms(velocity).l2
                  for row, velocity in zip(self.diagnostics, self.velocity)
                  if row['div_norm'] > 0]
        return max(ratios, default=0.0)

def check_cfl(velocity, dt, limit=CFL_LIMIT):
    """Guard the explicit advection step.

    Args:
        velocity (mesh.VectorField): Carrier.
        dt (float): Time step.
        limit (:obj:`float`, optional): Largest admissible ``max|u| dt / h``.

    Raises:
        StepSizeError: The step is too large; carries the largest admissible step.

    Returns:
        float: CFL number.
    """
    grid = velocity.grid
    speed = velocity.max_speed()
    spacing = min(grid.hx, grid.hy)
    number = speed * dt / spacing
    if number > limit:
        raise errors.StepSizeError(f'CFL number {number:.3f} exceeds {limit} at dt={dt}',
                                   limit * spacing / speed)
    return number

def _guard_energy(energy, initial, step):
    if not np.isfinite(energy) or energy > BLOWUP_FACTOR * max(initial, 1.0):
        raise errors.DivergenceError(f'Energy {energy:.3e} at step {step} exceeds '
                                     f'{BLOWUP_FACTOR:.0e} times its initial value!')

def _forcing(forcing, grid, t):
    f1, f2 = (None, None) if forcing is None else forcing(t)
    return (mesh.VectorField.zero(grid) if f1 is None else f1,
            mesh.ScalarField.zero(grid) if f2 is None else f2)

def _buoyancy(grid, params, temperature):
    return mesh.buoyancy_matrix(grid, params.beta) @ temperature.flat

def _solve(operator, f1, f2, trace=None, flux=None):
    solution = operator.solve(f1, f2, trace, flux)
    if solution.warnings:
        logging.debug(f'Step solve warnings: {"; ".join(solution.warnings)}')
    return solution

@dataclasses.dataclass(frozen=True)
class LiftTarget:
    """Quasi-stationary data of one instant.

    Args:
        lift (steady.LiftResult): Unshifted lifting (w, pi, psi) of the data.
        potential (mesh.ScalarField): Harmonic potential q with ``dq/dn = g.n``.
        complement (mesh.VectorField): Gradient of q, the part of w outside the projection.
        projected (mesh.VectorField): ``P w = w - grad q``.
        trace (mesh.BoundaryTrace): Velocity data.
        flux (mesh.BoundaryFlux): Temperature data.
    """
    lift: steady.LiftResult
    potential: mesh.ScalarField
    complement: mesh.VectorField
    projected: mesh.VectorField
    trace: mesh.BoundaryTrace
    flux: mesh.BoundaryFlux

def lift_target(params, trace, flux):
    """Lift boundary data and split the lift into projection and gradient complement.

    Args:
        params (mesh.PhysicalParams): Parameters.
        trace (mesh.BoundaryTrace): Velocity data with zero net flux.
        flux (mesh.BoundaryFlux): Temperature data; its boundary mean is removed.

    Returns:
        LiftTarget: Lift and its parts.
    """
    lift = steady.lift_l0(params, trace, flux)
    potential = leray.harmonic_potential(trace)
    complement = leray.potential_gradient(potential, trace)
    projected = (lift.velocity - complement).with_normal_values(np.zeros(trace.grid.n_normal))
    return LiftTarget(lift, potential, complement, projected, trace, flux)

@dataclasses.dataclass(frozen=True)
class LiftedState:
    """State of the lifted evolution.

    Args:
        projected (mesh.VectorField): Solenoidal part X with zero normal trace.
        temperature (mesh.ScalarField): Temperature.
        pressure (mesh.ScalarField): Pressure of the full velocity.
        target (LiftTarget): Data of the current instant.
        time (float): Time.
    """
    projected: mesh.VectorField
    temperature: mesh.ScalarField
    pressure: mesh.ScalarField
    target: LiftTarget
    time: float = 0.0

    @property
    def velocity(self):
        """mesh.VectorField: ``X + grad q``, carrying the normal data."""
        return self.projected + self.target.complement

    @classmethod
    def at_rest(cls, target, time=0.0):
        """State sitting on the lift of its data."""
        grid = target.trace.grid
        return cls(target.projected, target.lift.temperature, mesh.ScalarField.zero(grid),
                   target, time)

def step_linear_lifted(params, state, trace, flux, dt):
    """One implicit Euler step of the lifted linear evolution.

    The projected part solves ``X' = A (X - P w)`` for the velocity and ``phi' = A (phi - psi)``
    for the temperature, coupled through buoyancy. The complement is replaced by the harmonic
    gradient of the new data.

    Args:
        params (mesh.PhysicalParams): Parameters.
        state (LiftedState): Current state.
        trace (mesh.BoundaryTrace): Velocity data at the new time.
        flux (mesh.BoundaryFlux): Temperature data at the new time.
        dt (float): Time step.

    Raises:
        CompatibilityError: The projected part is not solenoidal or the trace has net flux.

    Returns:
        LiftedState: State at ``state.time + dt``.
    """
    grid = state.projected.grid
    projected = state.projected
    defect = float(np.linalg.norm(grid.divergence_matrix @ projected.flat)
                   + np.abs(projected.normal_values).max())
    if defect > 1e-9 * max(1.0, mesh.norms(projected).l2 / min(grid.hx, grid.hy)):
        raise errors.CompatibilityError('Projected state is not invariant under the projection',
                                        defect)
    target = lift_target(params, trace, flux)
    operator = steady.implicit_euler_operator(grid, params, dt)
    psi = target.lift.temperature
    f1 = (projected * (1.0 / dt)
          - mesh.VectorField.from_flat(grid, params.nu * grid.dirichlet_laplacian
                                       @ target.projected.extended()
                                       + _buoyancy(grid, params, psi)))
    f2 = mesh.ScalarField.from_flat(grid, state.temperature.flat / dt
                                    - params.mu * grid.neumann_laplacian @ psi.flat)
    solution = _solve(operator, f1, f2)
    potential_rate = (target.potential - state.target.potential) * (1.0 / dt)
    pressure = solution.pressure + target.lift.pressure - potential_rate
    return LiftedState(solution.velocity, solution.temperature, pressure, target,
                       state.time + dt)

def _lifted_source(grid, params, state):
    return _buoyancy(grid, params, state.temperature)

def solve_linear_lifted(grid, params, boundary, dt, steps, initial=None):
    """Integrate the lifted linear evolution.

    Args:
        grid (mesh.Grid): Grid.
        params (mesh.PhysicalParams): Parameters.
        boundary (mesh.BoundaryData): Time-dependent data.
        dt (float): Time step.
        steps (int): Number of steps.
        initial (:obj:`tuple(mesh.VectorField, mesh.ScalarField)`, optional): Initial velocity,
            projected on entry, and temperature; the lift of the initial data when omitted.

    Returns:
        Trajectory: Full velocity ``X + grad q`` per step. The parts 'projected' and 'lift' hold
            X with the temperature and the projected lift ``P w`` with psi; the energy column
            measures the projected state.
    """
    target = lift_target(params, *boundary.at(0.0))
    if initial is None:
        state = LiftedState.at_rest(target)
    else:
        velocity, temperature = initial
        state = LiftedState(leray.project(velocity).solenoidal, temperature,
                            mesh.ScalarField.zero(grid), target)
    trajectory = Trajectory(grid, dt, 'lifted', params)
    projected = Trajectory(grid, dt, 'lifted-projected', params)
    lifts = Trajectory(grid, dt, 'lifted-lift', params)
    zero = np.zeros(grid.n_velocity)

    def record(state, source, residual):
        target = state.target
        trajectory.append(state.velocity, state.temperature, state.pressure, target.trace,
                          target.flux, source, (state.projected, state.temperature, None),
                          residual)
        projected.append(state.projected, state.temperature, state.pressure,
                         mesh.BoundaryTrace.zero(grid), mesh.BoundaryFlux.zero(grid), zero,
                         (state.projected, state.temperature, None))
        lifts.append(target.projected, target.lift.temperature, target.lift.pressure,
                     mesh.BoundaryTrace.zero(grid), target.flux, zero,
                     (target.projected, target.lift.temperature, None))

    record(state, zero, 0.0)
    logging.info(f'Lifted linear run on {grid}: {steps} steps of {dt}.')
    for m in range(steps):
        state = step_linear_lifted(params, state, *boundary.at((m + 1) * dt), dt)
        record(state, _lifted_source(grid, params, state), 0.0)
    trajectory.parts = {'projected': projected, 'lift': lifts}
    return trajectory

def solve_linearized_instationary(base, params, y0, tau0, dt=None, forcing=None, lambda0=None):
    """Integrate the equations linearized around a time-dependent state, with zero data.

    Diffusion and the shift are implicit; advection by the base state, transport of the base
    state by the perturbation and the temperature coupling are explicit with the base state frozen
    at the beginning of each step. Every step is checked against the discrete energy identity,
    whose residual equals half the squared increment and so must be nonnegative.

    Args:
        base (Trajectory): Linearization trajectory (z, theta), discretely solenoidal.
        params (mesh.PhysicalParams): Parameters.
        y0 (mesh.VectorField): Initial velocity perturbation with zero trace.
        tau0 (mesh.ScalarField): Initial temperature perturbation.
        dt (:obj:`float`, optional): Time step; must equal the base step.
        forcing (:obj:`callable`, optional): t -> (f1, f2), either may be None.
        lambda0 (:obj:`float`, optional): Shift; ``params.lambda0`` when omitted.

    Raises:
        StepSizeError: The base state violates the CFL limit.
        DivergenceError: The energy blows up.

    Returns:
        Trajectory: Perturbation (y, tau); ``energy_residuals`` holds the per-step residuals.
    """
    grid = base.grid
    if dt is not None and abs(dt - base.dt) > 1e-14 * base.dt:
        raise ValueError(f'Step {dt} does not match the base trajectory step {base.dt}!')
    dt = base.dt
    shift = params.lambda0 if lambda0 is None else float(lambda0)
    operator = steady.implicit_euler_operator(grid, params, dt, shift=shift)
    zero_trace, zero_flux = mesh.BoundaryTrace.zero(grid), mesh.BoundaryFlux.zero(grid)
    trajectory = Trajectory(grid, dt, 'linearized', params)
    y, tau = y0, tau0
    trajectory.append(y, tau, mesh.ScalarField.zero(grid), zero_trace, zero_flux,
                      np.zeros(grid.n_velocity), (y, tau, None))
    initial = trajectory.diagnostics[0]['E']
    logging.info(f'Linearized run on {grid}: {base.steps} steps of {dt}, shift {shift}.')
    for m in range(base.steps):
        z, theta = base.state(m)
        check_cfl(z, dt)
        transport = (mesh.advect(z, y) + mesh.advect(y, z, base.traces[m])).flat
        heat = (mesh.advect(z, tau).flat
                + mesh.temperature_gradient_matrix(grid, theta.flat) @ y.flat)
        f1, f2 = _forcing(forcing, grid, (m + 1) * dt)
        solution = _solve(operator,
                          mesh.VectorField.from_flat(grid, y.flat / dt + f1.flat - transport),
                          mesh.ScalarField.from_flat(grid, tau.flat / dt + f2.flat - heat))
        y1, tau1 = solution.velocity, solution.temperature
        source = f1.flat + _buoyancy(grid, params, tau1) - transport
        pairing = (mesh.inner_product(mesh.VectorField.from_flat(grid, source), y1)
                   + mesh.inner_product(mesh.ScalarField.from_flat(grid, f2.flat - heat), tau1))
        energy = trajectory.diagnostics[-1]['E']
        row = trajectory.append(y1, tau1, solution.pressure, zero_trace, zero_flux,
                                source - shift * y1.flat, (y1, tau1, None), solution.residual)
        dissipation = (shift * 2 * row['E'] + params.nu * row['grad_y_sq']
                       + params.mu * row['grad_tau_sq'])
        residual = energy + dt * pairing - row['E'] - dt * dissipation
        trajectory.energy_residuals.append(float(residual))
        if residual < -ENERGY_TOLERANCE * max(1.0, energy):
            logging.warning(f'Energy inequality violated at step {m + 1}: residual '
                            f'{residual:.3e}.')
        _guard_energy(row['E'], initial, m + 1)
        y, tau = y1, tau1
    return trajectory

def _check_homogeneous(y0):
    grid = y0.grid
    defect = float(np.abs(y0.normal_values).max()
                   + np.sqrt(grid.cell_area)
                   * np.linalg.norm(grid.divergence_matrix @ y0.flat))
    if defect > 1e-9 * max(1.0, mesh.norms(y0).l2 / min(grid.hx, grid.hy)):
        raise errors.CompatibilityError('Initial velocity must be solenoidal with zero trace',
                                        defect)

def solve_nonlinear_homogeneous(grid, params, y0, tau0, dt, steps, forcing=None,
                                time_scheme='euler'):
    """Integrate the nonlinear system with homogeneous boundary data.

    Diffusion, pressure and buoyancy are implicit, the skew-symmetric advection explicit. The
    second order option uses BDF2 with extrapolated advection after an implicit Euler start; it is
    not used by the certification checks.

    Args:
        grid (mesh.Grid): Grid.
        params (mesh.PhysicalParams): Parameters.
        y0 (mesh.VectorField): Solenoidal initial velocity with zero trace.
        tau0 (mesh.ScalarField): Initial temperature.
        dt (float): Time step.
        steps (int): Number of steps.
        forcing (:obj:`callable`, optional): t -> (f1, f2), either may be None.
        time_scheme (:obj:`str`, optional): 'euler' or 'bdf2'.

    Raises:
        CompatibilityError: The initial velocity is not admissible.
        StepSizeError: The CFL limit is violated.
        DivergenceError: The energy blows up.

    Returns:
        Trajectory: The run.
    """
    if time_scheme not in TIME_SCHEMES:
        raise ValueError(f'Unknown time scheme {time_scheme}, use one of {TIME_SCHEMES}!')
    _check_homogeneous(y0)
    euler = steady.implicit_euler_operator(grid, params, dt)
    bdf2 = steady.implicit_euler_operator(grid, params, 2 * dt / 3) if time_scheme == 'bdf2' \
        else None
    zero_trace, zero_flux = mesh.BoundaryTrace.zero(grid), mesh.BoundaryFlux.zero(grid)
    name = 'homogeneous' if time_scheme == 'euler' else 'homogeneous-bdf2'
    trajectory = Trajectory(grid, dt, name, params)
    trajectory.append(y0, tau0, mesh.ScalarField.zero(grid), zero_trace, zero_flux,
                      np.zeros(grid.n_velocity), (y0, tau0, None))
    initial = trajectory.diagnostics[0]['E']
    logging.info(f'Homogeneous nonlinear run on {grid}: {steps} steps of {dt} ({time_scheme}).')
    for m in range(steps):
        y, tau = trajectory.state(m)
        f1, f2 = _forcing(forcing, grid, (m + 1) * dt)
        if bdf2 is None or m == 0:
            carrier, scalar, operator = y, tau, euler
            history_y, history_tau = y.flat / dt, tau.flat / dt
        else:
            y_old, tau_old = trajectory.state(m - 1)
            carrier, scalar, operator = 2 * y - y_old, 2 * tau - tau_old, bdf2
            history_y = (4 * y.flat - y_old.flat) / (2 * dt)
            history_tau = (4 * tau.flat - tau_old.flat) / (2 * dt)
        check_cfl(carrier, dt)
        transport = mesh.advect(carrier, carrier).flat
        heat = mesh.advect(carrier, scalar).flat
        solution = _solve(operator,
                          mesh.VectorField.from_flat(grid, history_y + f1.flat - transport),
                          mesh.ScalarField.from_flat(grid, history_tau + f2.flat - heat))
        source = f1.flat + _buoyancy(grid, params, solution.temperature) - transport
        row = trajectory.append(solution.velocity, solution.temperature, solution.pressure,
                                zero_trace, zero_flux, source,
                                (solution.velocity, solution.temperature, None),
                                solution.residual)
        _guard_energy(row['E'], initial, m + 1)
    return trajectory

def _advance_split_remainder(operator, params, lifted, y, tau, trace, flux, f1, f2, dt):
    """One step of the homogeneous remainder driven by the lifted part.

    Returns:
        tuple: Remainder solution, explicit momentum advection and the two forcing norms of the
            lifted part advecting itself.
    """
    grid = y.grid
    u, phi = lifted.velocity, lifted.temperature
    self_transport = mesh.advect(u, u, trace)
    self_heat = mesh.advect(u, phi, flux)
    transport = (self_transport + mesh.advect(u, y) + mesh.advect(y, u, trace)
                 + mesh.advect(y, y)).flat
    heat = (self_heat + mesh.advect(u, tau) + mesh.advect(y, phi, flux)
            + mesh.advect(y, tau)).flat
    forcing_norms = (mesh.norms(self_transport).l2, mesh.norms(self_heat).l2)
    if not np.isfinite(forcing_norms).all():
        raise errors.DivergenceError('Lifted part produced non-finite advection forcing!')
    solution = _solve(operator,
                      mesh.VectorField.from_flat(grid, y.flat / dt + f1.flat - transport),
                      mesh.ScalarField.from_flat(grid, tau.flat / dt + f2.flat - heat))
    return solution, transport, forcing_norms

def solve_full_split(grid, params, boundary, initial, dt, steps, forcing=None, advection=True):
    """Integrate the full system as lifted linear part plus homogeneous remainder.

    The lifted part (u, phi) follows :func:`step_linear_lifted`. The remainder (y, tau) starts
    from the projected initial velocity minus the projected lift and solves the homogeneous
    system with every advection cross term of ``z = u + y`` and ``theta = phi + tau``. Initial
    data violating the compatibility condition are used as given and reported.

    Args:
        grid (mesh.Grid): Grid.
        params (mesh.PhysicalParams): Parameters.
        boundary (mesh.BoundaryData): Time-dependent data; the temperature flux should be
            mean-free for the split to match the monolithic scheme.
        initial (tuple(mesh.VectorField, mesh.ScalarField)): Initial velocity and temperature.
        dt (float): Time step.
        steps (int): Number of steps.
        forcing (:obj:`callable`, optional): t -> (f1, f2), either may be None.
        advection (:obj:`bool`, optional): Include advection.

    Returns:
        Trajectory: Totals (z, theta) with parts 'lifted' and 'homogeneous'; the energy column
            measures the remainder.
    """
    z0, theta0 = initial
    trace0, flux0 = boundary.at(0.0)
    residual = compatibility_check(z0, theta0, trace0, flux0, params)
    if residual > COMPATIBILITY_TOLERANCE:
        logging.warning(f'Initial data violate the compatibility condition, boundary residual '
                        f'{residual:.3e}; continuing with the data as given.')
    target = lift_target(params, trace0, flux0)
    lifted = LiftedState.at_rest(target)
    y = leray.project(z0).solenoidal - target.projected
    tau = theta0 - target.lift.temperature
    operator = steady.implicit_euler_operator(grid, params, dt)
    zero_trace, zero_flux = mesh.BoundaryTrace.zero(grid), mesh.BoundaryFlux.zero(grid)
    zero = np.zeros(grid.n_velocity)
    total = Trajectory(grid, dt, 'split', params)
    lifted_part = Trajectory(grid, dt, 'split-lifted', params)
    remainder = Trajectory(grid, dt, 'split-homogeneous', params)
    total.append(lifted.velocity + y, lifted.temperature + tau, mesh.ScalarField.zero(grid),
                 trace0, flux0, zero, (y, tau, None))
    lifted_part.append(lifted.velocity, lifted.temperature, lifted.pressure, trace0, flux0, zero,
                       (lifted.projected, lifted.temperature, None))
    remainder.append(y, tau, mesh.ScalarField.zero(grid), zero_trace, zero_flux, zero,
                     (y, tau, None))
    initial_energy = remainder.diagnostics[0]['E']
    largest = (0.0, 0.0)
    logging.info(f'Split run on {grid}: {steps} steps of {dt}, advection {advection}.')
    for m in range(steps):
        t = (m + 1) * dt
        trace, flux = boundary.at(t)
        f1, f2 = _forcing(forcing, grid, t)
        if advection:
            check_cfl(lifted.velocity + y, dt)
            solution, transport, norms = _advance_split_remainder(
                operator, params, lifted, y, tau, total.traces[m], total.fluxes[m], f1, f2, dt)
            largest = tuple(max(a, b) for a, b in zip(largest, norms))
            logging.debug(f'Split step {m + 1}: lifted self-advection {norms[0]:.3e}, lifted '
                          f'heat transport {norms[1]:.3e}.')
        else:
            transport = np.zeros(grid.n_velocity)
            solution = _solve(operator, y * (1.0 / dt) + f1, tau * (1.0 / dt) + f2)
        lifted = step_linear_lifted(params, lifted, trace, flux, dt)
        y, tau = solution.velocity, solution.temperature
        velocity, temperature = lifted.velocity + y, lifted.temperature + tau
        source = f1.flat + _buoyancy(grid, params, temperature) - transport
        row = total.append(velocity, temperature, lifted.pressure + solution.pressure, trace,
                           flux, source, (y, tau, None), solution.residual)
        lifted_part.append(lifted.velocity, lifted.temperature, lifted.pressure, trace, flux,
                           _lifted_source(grid, params, lifted),
                           (lifted.projected, lifted.temperature, None))
        remainder.append(y, tau, solution.pressure, zero_trace, zero_flux,
                         source - _lifted_source(grid, params, lifted), (y, tau, None),
                         solution.residual)
        _guard_energy(row['E'], initial_energy, m + 1)
    if advection:
        logging.info(f'Split run: largest lifted self-advection {largest[0]:.3e}, lifted heat '
                     f'transport {largest[1]:.3e}.')
    total.parts = {'lifted': lifted_part, 'homogeneous': remainder}
    return total

class _ProjectionStepper:
    """Factored predictor and heat matrices of the incremental pressure-correction scheme.

    Args:
        grid (mesh.Grid): Grid.
        params (mesh.PhysicalParams): Parameters.
        dt (float): Time step.
    """
    def __init__(self, grid, params, dt):
        self._grid = grid
        self._params = params
        self._dt = dt
        inner = grid.interior_edges
        laplacian = grid.dirichlet_laplacian[inner]
        self._data = params.nu * laplacian[:, grid.trace_columns]
        predictor = sparse.identity(inner.size) / dt - params.nu * laplacian[:, inner]
        heat = sparse.identity(grid.n_cells) / dt - params.mu * grid.neumann_laplacian
        logging.info(f'Factoring projection step matrices on {grid}.')
        try:
            self._predictor = splinalg.splu(predictor.tocsc())
            self._heat = splinalg.splu(heat.tocsc())
        except RuntimeError as error:
            raise errors.SolverError(f'Projection factorization failed on {grid}: '
                                     f'{error}') from error

    def temperature(self, rhs, flux):
        grid = self._grid
        source = rhs + self._params.mu * grid.neumann_flux_source @ flux.values
        return mesh.ScalarField.from_flat(grid, self._heat.solve(source))

    def velocity(self, rhs, pressure, trace):
        """Predict with the old pressure, then project.

        Returns:
            tuple(mesh.VectorField, mesh.ScalarField): Velocity and pressure.
        """
        grid, dt = self._grid, self._dt
        inner = grid.interior_edges
        if abs(trace.net_flux()) > 1e-10 * max(1.0, np.abs(trace.normal).max()):
            raise errors.CompatibilityError('Velocity trace has nonzero net flux',
                                            trace.net_flux())
        known = rhs - grid.gradient_matrix @ pressure.flat
        predicted = np.zeros(grid.n_velocity)
        predicted[inner] = self._predictor.solve(known[inner] + self._data @ trace.vector)
        predicted[grid.normal_edges] = trace.normal
        correction = leray.neumann_solver(grid).solve(grid.divergence_matrix @ predicted / dt)
        velocity = predicted - dt * grid.gradient_matrix @ correction
        pressure = pressure + mesh.ScalarField.from_flat(grid, correction)
        return mesh.VectorField.from_flat(grid, velocity), pressure

def solve_full_monolithic(grid, params, boundary, initial, dt, steps, forcing=None,
                          advection=True, pressure_scheme='coupled', project_initial=True):
    """Integrate the full system directly on the primitive variables.

    ``coupled`` solves the implicit Euler saddle point system with the trace of the new time,
    explicit skew-symmetric advection with the data of the old time and implicit buoyancy.
    ``incremental`` advances the temperature first, predicts the velocity with the old pressure
    and projects with a Neumann potential.

    Args:
        grid (mesh.Grid): Grid.
        params (mesh.PhysicalParams): Parameters.
        boundary (mesh.BoundaryData): Time-dependent data.
        initial (tuple(mesh.VectorField, mesh.ScalarField)): Initial velocity and temperature.
        dt (float): Time step.
        steps (int): Number of steps.
        forcing (:obj:`callable`, optional): t -> (f1, f2), either may be None.
        advection (:obj:`bool`, optional): Include advection.
        pressure_scheme (:obj:`str`, optional): 'coupled' or 'incremental'.
        project_initial (:obj:`bool`, optional): Replace the initial velocity by its projection
            plus the harmonic extension of the initial trace.

    Raises:
        CompatibilityError: A trace has nonzero net flux.
        StepSizeError: The CFL limit is violated.
        DivergenceError: The energy blows up.

    Returns:
        Trajectory: The run; the energy column measures the full state.
    """
    if pressure_scheme not in PRESSURE_SCHEMES:
        raise ValueError(f'Unknown pressure scheme {pressure_scheme}, use one of '
                         f'{PRESSURE_SCHEMES}!')
    z0, theta0 = initial
    trace0, flux0 = boundary.at(0.0)
    if project_initial:
        z0 = leray.project(z0).solenoidal + leray.harmonic_extension(trace0)
    if pressure_scheme == 'coupled':
        operator, stepper = steady.implicit_euler_operator(grid, params, dt), None
    else:
        operator, stepper = None, _ProjectionStepper(grid, params, dt)
    trajectory = Trajectory(grid, dt, f'monolithic-{pressure_scheme}', params)
    trajectory.append(z0, theta0, mesh.ScalarField.zero(grid), trace0, flux0,
                      np.zeros(grid.n_velocity), (z0, theta0, trace0))
    initial_energy = trajectory.diagnostics[0]['E']
    logging.info(f'Monolithic {pressure_scheme} run on {grid}: {steps} steps of {dt}, '
                 f'advection {advection}.')
    for m in range(steps):
        z, theta = trajectory.state(m)
        t = (m + 1) * dt
        trace, flux = boundary.at(t)
        f1, f2 = _forcing(forcing, grid, t)
        transport = np.zeros(grid.n_velocity)
        heat = np.zeros(grid.n_cells)
        if advection:
            check_cfl(z, dt)
            transport = mesh.advect(z, z, trajectory.traces[m]).flat
            heat = mesh.advect(z, theta, trajectory.fluxes[m]).flat
        momentum = z.flat / dt + f1.flat - transport
        energy_rhs = theta.flat / dt + f2.flat - heat
        if stepper is None:
            solution = _solve(operator, mesh.VectorField.from_flat(grid, momentum),
                              mesh.ScalarField.from_flat(grid, energy_rhs), trace, flux)
            velocity, pressure, temperature = solution
            residual = solution.residual
        else:
            temperature = stepper.temperature(energy_rhs, flux)
            velocity, pressure = stepper.velocity(
                momentum + _buoyancy(grid, params, temperature), trajectory.pressure[m], trace)
            residual = 0.0
        source = f1.flat + _buoyancy(grid, params, temperature) - transport
        row = trajectory.append(velocity, temperature, pressure, trace, flux, source,
                                (velocity, temperature, trace), residual)
        _guard_energy(row['E'], initial_energy, m + 1)
    return trajectory

@dataclasses.dataclass(frozen=True)
class PressureSeries:
    """Pressure recovered from a trajectory.

    Args:
        pressure (tuple(mesh.ScalarField)): Mean-zero pressure per time.
        primitive (tuple(mesh.ScalarField)): Time primitive P per time, empty for 'poisson'.
        method (str): 'primitive' or 'poisson'.
        residuals (tuple(float)): L2 residual of the defining gradient equation of P per time.
        quadrature (str): Time quadrature of the accumulated velocity.
    """
    pressure: Tuple[mesh.ScalarField, ...]
    primitive: Tuple[mesh.ScalarField, ...]
    method: str
    residuals: Tuple[float, ...] = ()
    quadrature: str = 'rectangle'

    @property
    def max_residual(self):
        return max(self.residuals, default=0.0)

def _accumulate(trajectory, quadrature):
    """Time integrals of the extended velocity and of the sources at every step."""
    dt = trajectory.dt
    extended = [u.extended(trace) for u, trace in zip(trajectory.velocity, trajectory.traces)]
    velocity_integral = [np.zeros_like(extended[0])]
    source_integral = [np.zeros(trajectory.grid.n_velocity)]
    for m in range(1, len(extended)):
        if quadrature == 'rectangle':
            increment = dt * extended[m]
            source = dt * trajectory.sources[m]
        else:
            increment = dt / 2 * (extended[m - 1] + extended[m])
            source = dt / 2 * (trajectory.sources[m - 1] + trajectory.sources[m])
        velocity_integral.append(velocity_integral[-1] + increment)
        source_integral.append(source_integral[-1] + source)
    return velocity_integral, source_integral

def recover_pressure(trajectory, method='primitive', quadrature='rectangle'):
    """Recover the pressure of a run.

    ``poisson`` returns the pressure of each step solve. ``primitive`` integrates the momentum
    equation in time: the accumulated velocity U and sources S define
    ``R = -(u - u0) + nu laplacian(U) + S``, the primitive P solves the Neumann problem for the
    divergence of R, and p follows by central differences in time. The rectangle quadrature
    matches implicit Euler, so ``grad P = R`` holds to solver precision.

    Args:
        trajectory (Trajectory): Run with stored sources.
        method (:obj:`str`, optional): 'primitive' or 'poisson'.
        quadrature (:obj:`str`, optional): 'rectangle' or 'trapezoid'.

    Raises:
        ValueError: Unknown method or quadrature, or fewer than 3 steps for 'primitive'.

    Returns:
        PressureSeries: Recovered pressure.
    """
    if method == 'poisson':
        return PressureSeries(tuple(trajectory.pressure), (), method, (), quadrature)
    if method != 'primitive':
        raise ValueError(f'Unknown pressure recovery method {method}!')
    if quadrature not in QUADRATURES:
        raise ValueError(f'Unknown quadrature {quadrature}, use one of {QUADRATURES}!')
    if trajectory.steps < 3:
        raise ValueError(f'Primitive pressure recovery needs at least 3 steps, got '
                         f'{trajectory.steps}!')
    grid, dt = trajectory.grid, trajectory.dt
    if trajectory.params is None:
        raise ValueError('Trajectory does not record its parameters!')
    nu = trajectory.params.nu
    velocity_integral, source_integral = _accumulate(trajectory, quadrature)
    solver = leray.neumann_solver(grid)
    u0 = trajectory.velocity[0].flat
    primitive, residuals = [], []
    for m, (velocity, integral, sources) in enumerate(zip(trajectory.velocity, velocity_integral,
                                                          source_integral)):
        defining = grid.interior_mask * (-(velocity.flat - u0)
                                         + nu * grid.dirichlet_laplacian @ integral + sources)
        potential = solver.solve(grid.divergence_matrix @ defining)
        gap = mesh.VectorField.from_flat(grid, grid.gradient_matrix @ potential - defining)
        primitive.append(mesh.ScalarField.from_flat(grid, potential))
        residuals.append(np.sqrt(mesh.inner_product(gap, gap)))
        if m:
            logging.debug(f'Pressure primitive at step {m}: residual {residuals[-1]:.3e}.')
    values = np.array([p.flat for p in primitive])
    rates = np.gradient(values, dt, axis=0, edge_order=1)
    pressure = tuple(mesh.ScalarField.from_flat(grid, rate - rate.mean()) for rate in rates)
    logging.info(f'Recovered pressure of {trajectory.scheme} run: largest defining residual '
                 f'{max(residuals):.3e}.')
    return PressureSeries(pressure, tuple(primitive), method, tuple(residuals), quadrature)

def _wall_tangential_gradient(potential):
    """Tangential derivative of a cell potential at the boundary vertices, per wall; the corner
    vertices repeat their neighbours."""
    grid = potential.grid
    q = potential.values

    def along(cells, step):
        inner = np.diff(cells) / step
        return np.concatenate([inner[:1], inner, inner[-1:]])

    return np.concatenate([along(q[0, :], grid.hy), along(q[-1, :], grid.hy),
                           along(q[:, 0], grid.hx), along(q[:, -1], grid.hx)])

def compatibility_check(z0, theta0, g0, h0, params, z0_trace=None):
    """Boundary residual of the projected difference between initial data and initial lift.

    The projection removes the normal trace of the difference, so the residual is the tangential
    trace of ``P(z0 - w)`` where w is the velocity of the unshifted lift of (g0, h0). The
    temperature carries no trace condition under Neumann data and only takes part through the
    lift.

    Args:
        z0 (mesh.VectorField): Initial velocity.
        theta0 (mesh.ScalarField): Initial temperature.
        g0 (mesh.BoundaryTrace): Initial velocity data.
        h0 (mesh.BoundaryFlux): Initial temperature data.
        params (mesh.PhysicalParams): Parameters.
        z0_trace (:obj:`mesh.BoundaryTrace`, optional): Tangential wall values of z0; those of
            g0 when omitted.

    Returns:
        float: Boundary L2 norm of the residual; zero within tolerance for compatible data.
    """
    grid = z0.grid
    grid.check(theta0, g0, h0)
    lift = steady.lift_l0(params, g0, h0)
    difference = leray.project(z0 - lift.velocity)
    tangential = (g0 if z0_trace is None else z0_trace).tangential
    residual = (tangential - g0.tangential
                - _wall_tangential_gradient(difference.potential))
    norm = float(np.sqrt(np.sum(grid.tangential_weights * residual ** 2)))
    logging.info(f'Compatibility residual on {grid}: {norm:.3e}.')
    return norm

@dataclasses.dataclass(frozen=True)
class EnergyReport:
    """Energy series of a run and the bounds derived from it.

    Args:
        times (tuple(float)): Times.
        energies (tuple(float)): ``E = (|y|^2 + |tau|^2) / 2`` per time.
        dissipation_velocity (float): Rectangle-rule integral of ``|grad y|^2``.
        dissipation_temperature (float): Rectangle-rule integral of ``|grad tau|^2``.
        sup_energy (float): Largest energy.
        sup_l2 (float): Largest L2 norm of (y, tau).
        nonincreasing (bool): Energy never grows beyond rounding.
        bounded (bool): All entries finite and the energy below the blow-up threshold.
    """
    times: Tuple[float, ...]
    energies: Tuple[float, ...]
    dissipation_velocity: float
    dissipation_temperature: float
    sup_energy: float
    sup_l2: float
    nonincreasing: bool
    bounded: bool

    @classmethod
    def from_rows(cls, rows):
        """Build the report from diagnostics rows, as stored or as read back from CSV.

        Args:
            rows (list(dict)): Rows with the keys of ``DIAGNOSTIC_COLUMNS``.

        Returns:
            EnergyReport: Report.
        """
        times = np.array([float(row['t']) for row in rows])
        energies = np.array([float(row['E']) for row in rows])
        grad_y = np.array([float(row['grad_y_sq']) for row in rows])
        grad_tau = np.array([float(row['grad_tau_sq']) for row in rows])
        steps = np.diff(times)
        finite = bool(np.isfinite(energies).all() and np.isfinite(grad_y).all()
                      and np.isfinite(grad_tau).all())
        sup_energy = float(energies.max(initial=0.0))
        reference = max(energies[0], np.finfo(float).tiny) if energies.size else 1.0
        nonincreasing = bool((np.diff(energies) <= 1e-12 * reference).all())
        bounded = finite and sup_energy <= BLOWUP_FACTOR * max(reference, 1.0)
        return cls(tuple(times.tolist()), tuple(energies.tolist()),
                   float(np.sum(steps * grad_y[1:])), float(np.sum(steps * grad_tau[1:])),
                   sup_energy, float(np.sqrt(2 * sup_energy)), nonincreasing, bounded)

    def as_dict(self):
        return dataclasses.asdict(self)

def energy_report(trajectory):
    """Returns:
        EnergyReport: Report of the trajectory's diagnostics.
    """
    report = EnergyReport.from_rows(trajectory.diagnostics)
    logging.info(f'Energy of {trajectory.scheme} run: sup {report.sup_energy:.4e}, '
                 f'nonincreasing {report.nonincreasing}.')
    return report
