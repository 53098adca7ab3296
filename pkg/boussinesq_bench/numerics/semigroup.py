"""Dense coupled generators on the discretely solenoidal subspace.

States are coefficient vectors over an L2-orthonormal basis: discretely divergence-free interior
velocities (an orthonormal kernel basis of the divergence, scaled by the cell area) followed by
cell temperatures. Euclidean norms of coefficients are therefore L2 norms of fields, and operator
2-norms are L2 operator norms.
"""

__author__ = 'Rajarshi Mandal'
__version__ = '1.0'
__all__ = ['CoupledOperator',
           'SmoothingTable',
           'SpectrumReport',
           'MAX_DENSE_CELLS',
           'assemble_coupled_operator',
           'encode',
           'decode',
           'semigroup_apply',
           'fractional_power_apply',
           'duhamel_solve',
           'smoothing_probe',
           'analyticity_probe',
           'spectrum_report']

import dataclasses
import functools
import logging
from typing import Tuple

import numpy as np
from scipy import linalg
from scipy import special

from boussinesq_bench import errors
from boussinesq_bench import utils
from boussinesq_bench.numerics import mesh
from boussinesq_bench.numerics import steady

MAX_DENSE_CELLS = 12
CONDITION_LIMIT = 1e8
QUADRATURE_NODES = 64

@functools.lru_cache(maxsize=8)
def solenoidal_basis(grid):
    """Orthonormal kernel basis of the divergence restricted to interior edges.

    Args:
        grid (mesh.Grid): Grid within the dense size cap.

    Raises:
        AssemblyError: The grid exceeds the cap or the kernel has the wrong dimension.

    Returns:
        numpy.ndarray: Basis, one column per solenoidal mode.
    """
    if grid.nx > MAX_DENSE_CELLS or grid.ny > MAX_DENSE_CELLS:
        raise errors.AssemblyError(f'Dense assembly is capped at {MAX_DENSE_CELLS}x'
                                   f'{MAX_DENSE_CELLS} cells, got {grid}!')
    divergence = grid.divergence_matrix[:, grid.interior_edges].toarray()
    basis = linalg.null_space(divergence)
    expected = grid.interior_edges.size - (grid.n_cells - 1)
    if basis.shape[1] != expected:
        raise errors.AssemblyError(f'Solenoidal basis has {basis.shape[1]} modes, expected '
                                   f'{expected}!')
    logging.info(f'Solenoidal basis on {grid}: {expected} modes.')
    return basis

class CoupledOperator:
    """Dense block generator with a cached eigendecomposition.

    Args:
        grid (mesh.Grid): Grid.
        matrix (numpy.ndarray): Square generator over (velocity, temperature) coefficients.
        lambda0 (float): Shift; ``A - lambda0 I`` must be stable.
        n_velocity (int): Number of velocity coefficients.
        gram (numpy.ndarray): H1 Gram matrix of the coefficients.

    Raises:
        AssemblyError: The shifted spectrum reaches the closed right half-plane.
    """
    def __init__(self, grid, matrix, lambda0, n_velocity, gram):
        self._grid = grid
        self._matrix = np.array(matrix, dtype=float)
        self._matrix.setflags(write=False)
        self._lambda0 = float(lambda0)
        self._n_velocity = n_velocity
        self._gram = gram
        values, vectors = linalg.eig(self._matrix)
        self._eigenvalues = values
        self._eigenvectors = vectors
        self._condition = float(np.linalg.cond(vectors))
        self._inverse = np.linalg.inv(vectors) if np.isfinite(self._condition) else None
        margin = self._lambda0 - values.real.max()
        if margin <= 0:
            raise errors.AssemblyError(f'Shift {self._lambda0} does not stabilize the generator, '
                                       f'spectral abscissa {values.real.max():.4e}!')
        logging.info(f'Coupled operator on {grid}: dimension {self.dimension}, eigenbasis '
                     f'condition {self._condition:.2e}, stability margin {margin:.4e}.')

    @property
    def grid(self):
        return self._grid

    @property
    def matrix(self):
        return self._matrix

    @property
    def lambda0(self):
        return self._lambda0

    @property
    def dimension(self):
        return self._matrix.shape[0]

    @property
    def blocks(self):
        """dict(str, slice): Coefficient ranges of velocity and temperature."""
        return {'velocity': slice(0, self._n_velocity),
                'temperature': slice(self._n_velocity, self.dimension)}

    @property
    def gram(self):
        return self._gram

    @property
    def eigenvalues(self):
        return self._eigenvalues

    @property
    def condition(self):
        """float: Condition number of the eigenvector matrix."""
        return self._condition

    @property
    def diagonalizable(self):
        return self._inverse is not None and self._condition <= CONDITION_LIMIT

    @property
    def fractional_method(self):
        """str: 'eigen' or 'balakrishnan', the method fractional powers use."""
        return 'eigen' if self.diagonalizable else 'balakrishnan'

    def spectral(self, function, x):
        """Apply ``function`` of the generator through the eigenbasis."""
        coefficients = self._inverse @ x
        result = self._eigenvectors @ (function(self._eigenvalues)[:, None] * coefficients
                                       if coefficients.ndim == 2
                                       else function(self._eigenvalues) * coefficients)
        return result.real

    def shifted(self):
        """Returns:
            numpy.ndarray: ``lambda0 I - A``.
        """
        return self._lambda0 * np.eye(self.dimension) - self._matrix

def encode(operator, velocity, temperature):
    """Coefficients of a (velocity, temperature) state; the velocity is projected.

    Returns:
        numpy.ndarray: State vector.
    """
    grid = operator.grid
    scale = np.sqrt(grid.cell_area)
    basis = solenoidal_basis(grid)
    return np.concatenate([scale * basis.T @ velocity.flat[grid.interior_edges],
                           scale * temperature.flat])

def decode(operator, state):
    """Fields of a state vector.

    Returns:
        tuple(mesh.VectorField, mesh.ScalarField): Velocity with zero trace and temperature.
    """
    grid = operator.grid
    scale = np.sqrt(grid.cell_area)
    blocks = operator.blocks
    velocity = np.zeros(grid.n_velocity)
    velocity[grid.interior_edges] = solenoidal_basis(grid) @ state[blocks['velocity']] / scale
    return (mesh.VectorField.from_flat(grid, velocity),
            mesh.ScalarField.from_flat(grid, state[blocks['temperature']] / scale))

def assemble_coupled_operator(point, params, lambda0=None):
    """Assemble the coupled generator around a linearization point.

    Around rest the generator is block upper triangular: diffusion on both blocks and buoyancy
    forcing the velocity. Around a nontrivial point the velocity block gains the linearized
    advection, the temperature block the advection by the point's velocity and the lower-left
    block the transport of the point's temperature.

    Args:
        point (:obj:`steady.LinearizationPoint` or :obj:`mesh.Grid`): Linearization point; a
            grid selects rest on that grid.
        params (mesh.PhysicalParams): Parameters.
        lambda0 (:obj:`float`, optional): Shift; :func:`steady.lambda0_estimate` when omitted.

    Returns:
        CoupledOperator: Dense generator.
    """
    if point is None:
        raise ValueError('A linearization point or its grid is required!')
    if isinstance(point, mesh.Grid):
        point = steady.LinearizationPoint.rest(point)
    grid = point.grid
    basis = solenoidal_basis(grid)
    inner = grid.interior_edges
    rest = point.is_rest()
    blocks = steady.linearized_blocks(grid, params, point, 0.0, advection=not rest,
                                      coupling=True)
    velocity = -blocks['momentum'][inner][:, inner].toarray()
    temperature = -blocks['temperature'].toarray()
    upper = basis.T @ (-blocks['buoyancy'][inner].toarray())
    if rest:
        lower = np.zeros((grid.n_cells, basis.shape[1]))
    else:
        lower = -blocks['coupling'][:, inner].toarray() @ basis
    matrix = np.block([[basis.T @ velocity @ basis, upper], [lower, temperature]])
    laplacian = grid.dirichlet_laplacian[inner][:, inner].toarray()
    gram = np.eye(matrix.shape[0]) + linalg.block_diag(-basis.T @ laplacian @ basis,
                                                       -grid.neumann_laplacian.toarray())
    if lambda0 is None:
        lambda0 = steady.lambda0_estimate(point, params.beta)
    return CoupledOperator(grid, matrix, lambda0, basis.shape[1], gram)

def semigroup_apply(operator, t, x, method='auto'):
    """Apply ``exp(t A)``.

    Args:
        operator (CoupledOperator): Generator.
        t (float): Nonnegative time.
        x (numpy.ndarray): State vector.
        method (:obj:`str`, optional): 'eigen', 'expm' or 'auto' (eigen when diagonalizable).

    Raises:
        ValueError: ``t`` is negative.

    Returns:
        numpy.ndarray: Evolved state.
    """
    if t < 0:
        raise ValueError(f'Semigroup time must be nonnegative, got {t}!')
    if method == 'auto':
        method = 'eigen' if operator.diagonalizable else 'expm'
    if method == 'eigen':
        return operator.spectral(lambda values: np.exp(t * values), x)
    return linalg.expm(t * operator.matrix) @ x

def _balakrishnan(shifted, alpha, x, reference):
    """``B^alpha x`` for 0 < alpha < 1 by Gauss-Jacobi quadrature of the Balakrishnan integral."""
    nodes, weights = special.roots_jacobi(QUADRATURE_NODES, -alpha, alpha - 1)
    identity = np.eye(shifted.shape[0])
    bx = shifted @ x
    total = np.zeros_like(bx)
    for node, weight in zip(nodes, weights):
        s = reference * (1 + node) / (1 - node)
        total = total + weight / (1 - node) * linalg.solve(s * identity + shifted, bx)
    return np.sin(np.pi * alpha) / np.pi * 2 * reference ** alpha * total

def fractional_power_apply(operator, alpha, x, method='auto'):
    """Apply ``(lambda0 I - A)^alpha`` for alpha in [0, 2].

    Args:
        operator (CoupledOperator): Generator.
        alpha (float): Power.
        x (numpy.ndarray): State vector.
        method (:obj:`str`, optional): 'eigen', 'balakrishnan' or 'auto'
            (:attr:`CoupledOperator.fractional_method`).

    Returns:
        numpy.ndarray: Result.
    """
    if not 0 <= alpha <= 2:
        raise ValueError(f'Fractional power must lie in [0, 2], got {alpha}!')
    if method == 'auto':
        method = operator.fractional_method
    if method == 'eigen':
        return operator.spectral(lambda values: (operator.lambda0 - values) ** alpha, x)
    shifted = operator.shifted()
    if alpha == 0:
        return np.array(x, dtype=float)
    if float(alpha).is_integer():
        return np.linalg.matrix_power(shifted, int(alpha)) @ x
    if alpha > 1:
        return _balakrishnan(shifted, alpha - 1, shifted @ x, operator.lambda0)
    return _balakrishnan(shifted, alpha, x, operator.lambda0)

def _step_functions(operator, dt):
    """Returns ``exp(dt A)`` and ``phi1(dt A)`` as dense matrices."""
    dimension = operator.dimension
    if operator.diagonalizable:
        identity = np.eye(dimension)
        propagator = operator.spectral(lambda values: np.exp(dt * values), identity)

        def phi1(values):
            z = dt * values
            small = np.abs(z) < 1e-12
            safe = np.where(small, 1.0, z)
            return np.where(small, 1.0 + z / 2, np.expm1(safe) / safe)

        return propagator, operator.spectral(phi1, identity)
    augmented = np.zeros((2 * dimension, 2 * dimension))
    augmented[:dimension, :dimension] = dt * operator.matrix
    augmented[:dimension, dimension:] = np.eye(dimension)
    exponential = linalg.expm(augmented)
    return exponential[:dimension, :dimension], exponential[:dimension, dimension:]

def duhamel_solve(operator, lifts, x0, dt):
    """Mild solution of ``x' = A (x - b)`` with ``b`` linear between samples.

    Each step applies ``x_next = E x + (I - E) b + (I - Phi)(b_next - b)`` with ``E = exp(dt A)``
    and ``Phi = phi1(dt A)``, exact for piecewise linear lifts.

    Args:
        operator (CoupledOperator): Generator.
        lifts (numpy.ndarray): Projected lift samples b_0 ... b_M, one per row.
        x0 (numpy.ndarray): Initial projected state.
        dt (float): Sample spacing.

    Returns:
        numpy.ndarray: States x_0 ... x_M, one per row.
    """
    lifts = np.atleast_2d(lifts)
    propagator, phi1 = _step_functions(operator, dt)
    identity = np.eye(operator.dimension)
    states = [np.array(x0, dtype=float)]
    for current, following in zip(lifts[:-1], lifts[1:]):
        x = states[-1]
        states.append(propagator @ x + (identity - propagator) @ current
                      + (identity - phi1) @ (following - current))
    return np.array(states)

@dataclasses.dataclass(frozen=True)
class SmoothingTable:
    """Measured ``t^alpha |(lambda0 I - A)^alpha exp(t (A - lambda0 I))|`` per time."""
    alpha: float
    times: Tuple[float, ...]
    values: Tuple[float, ...]

    @property
    def constant(self):
        """float: Supremum over the time grid."""
        return max(self.values)

    def rows(self):
        return [{'t': t, 'alpha': self.alpha, 'value': value}
                for t, value in zip(self.times, self.values)]

def smoothing_probe(operator, alpha, times):
    """Measure the analytic smoothing constant on a time grid.

    Args:
        operator (CoupledOperator): Generator.
        alpha (float): Power in [0, 2].
        times (sequence(float)): Positive sorted times.

    Returns:
        SmoothingTable: Values per time.
    """
    times = np.asarray(times, dtype=float)
    if (times <= 0).any() or (np.diff(times) < 0).any():
        raise ValueError('Smoothing times must be positive and sorted!')
    identity = np.eye(operator.dimension)
    power = fractional_power_apply(operator, alpha, identity)
    values = []
    for t in times:
        decay = semigroup_apply(operator, t, identity) * np.exp(-operator.lambda0 * t)
        values.append(float(t ** alpha * np.linalg.norm(power @ decay, 2)))
    table = SmoothingTable(float(alpha), tuple(times.tolist()), tuple(values))
    logging.info(f'Smoothing constant for alpha={alpha}: {table.constant:.4e}.')
    return table

def analyticity_probe(operator, trials, seed=0):
    """Smallest sampled ratio ``<(lambda0 I - A) x, x> / |x|_H1^2``.

    Args:
        operator (CoupledOperator): Generator.
        trials (int): Number of random states.
        seed (:obj:`int`, optional): Seed of the sampling stream.

    Returns:
        float: Minimum ratio, infinite without samples.
    """
    if trials <= 0:
        return float('inf')
    generator = utils.random_generator(seed, 'analyticity', operator.grid.nx, operator.grid.ny)
    shifted = operator.shifted()
    gram = operator.gram
    samples = generator.standard_normal((trials, operator.dimension))
    numerators = np.einsum('ij,jk,ik->i', samples, shifted.T, samples)
    denominators = np.einsum('ij,jk,ik->i', samples, gram, samples)
    ratio = float((numerators / denominators).min())
    logging.info(f'Analyticity probe over {trials} samples: minimum ratio {ratio:.4e}.')
    return ratio

@dataclasses.dataclass(frozen=True)
class SpectrumReport:
    """Spectral summary of a generator.

    Args:
        eigenvalues (numpy.ndarray): Eigenvalues of A.
        condition (float): Eigenbasis condition number.
        stability_margin (float): ``lambda0 - max Re(eigenvalues)``.
        mapping_error (float): Distance between the spectrum of ``exp(t A)`` and the
            exponentials of the eigenvalues.
    """
    eigenvalues: np.ndarray
    condition: float
    stability_margin: float
    mapping_error: float

def spectrum_report(operator, t=0.5):
    """Summarize the spectrum and check spectral mapping at time ``t``.

    Returns:
        SpectrumReport: Summary.
    """
    values = operator.eigenvalues
    mapped = np.exp(t * values)
    direct = linalg.eigvals(linalg.expm(t * operator.matrix))
    distance = np.abs(direct[:, None] - mapped[None, :])
    error = float(max(distance.min(axis=1).max(), distance.min(axis=0).max()))
    return SpectrumReport(values, operator.condition, float(operator.lambda0 - values.real.max()),
                          error)
