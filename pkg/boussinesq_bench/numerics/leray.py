"""Discrete Leray projection, its gradient complement and the harmonic extension of boundary
data.

The potential of every decomposition solves a pure Neumann problem whose constant nullspace is
removed by a mean-zero constraint row, factored once per grid.
"""

__author__ = 'Rajarshi Mandal'
__version__ = '1.0'
__all__ = ['NeumannPoisson',
           'LerayDecomposition',
           'neumann_solver',
           'solve_neumann_poisson',
           'project',
           'harmonic_potential',
           'potential_gradient',
           'harmonic_extension',
           'project_coupled']

import dataclasses
import functools
import logging

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from boussinesq_bench import errors
from boussinesq_bench.numerics import mesh

COMPATIBILITY_TOLERANCE = 1e-10
RESIDUAL_TOLERANCE = 1e-11

class NeumannPoisson:
    """Factorized pure Neumann Laplacian with a mean-zero constraint.

    The augmented system is ``[[L, 1], [1^T, 0]] [q, c] = [rhs, 0]``; the multiplier ``c``
    vanishes for compatible data.

    Args:
        grid (mesh.Grid): Grid to factor on.
    """
    def __init__(self, grid):
        self._grid = grid
        n = grid.n_cells
        ones = sparse.csr_matrix(np.ones((n, 1)))
        self._matrix = sparse.bmat([[grid.neumann_laplacian, ones], [ones.T, None]],
                                   format='csc')
        logging.info(f'Factoring Neumann Laplacian on {grid} ({n + 1} unknowns).')
        try:
            self._lu = splinalg.splu(self._matrix)
        except RuntimeError as error:
            raise errors.SolverError(f'Neumann factorization failed on {grid}: {error}') from error

    @property
    def grid(self):
        return self._grid

    def defect(self, rhs, flux):
        """Compatibility defect ``integral(rhs) - boundary integral(flux)``.

        Args:
            rhs (numpy.ndarray): Flat cell values.
            flux (numpy.ndarray): Outward normal derivative per boundary face.

        Returns:
            tuple(float, float): Defect and the scale it is measured against.
        """
        grid = self._grid
        volume = grid.cell_area * rhs.sum()
        boundary = np.sum(grid.segment_lengths * flux)
        scale = max(1.0, grid.cell_area * np.abs(rhs).sum(),
                    np.sum(grid.segment_lengths * np.abs(flux)))
        return float(volume - boundary), float(scale)

    def solve(self, rhs, flux=None):
        """Mean-zero solution of ``laplacian_neumann(q, flux) = rhs``.

        Args:
            rhs (numpy.ndarray): Flat cell values.
            flux (:obj:`numpy.ndarray`, optional): Outward normal derivative per boundary face.

        Raises:
            CompatibilityError: Data violate the discrete divergence theorem.
            SolverError: Residual above tolerance.

        Returns:
            numpy.ndarray: Flat potential.
        """
        grid = self._grid
        flux = np.zeros(grid.n_normal) if flux is None else np.asarray(flux, dtype=float)
        defect, scale = self.defect(rhs, flux)
        if abs(defect) > COMPATIBILITY_TOLERANCE * scale:
            raise errors.CompatibilityError('Neumann data are incompatible', defect)
        source = rhs - grid.neumann_flux_source @ flux
        solution = self._lu.solve(np.append(source, 0.0))
        potential = solution[:-1]
        residual = np.linalg.norm(grid.neumann_laplacian @ potential - source)
        reference = max(1.0, np.linalg.norm(source))
        if residual > RESIDUAL_TOLERANCE * reference * grid.n_cells:
            raise errors.SolverError(f'Neumann residual {residual:.3e} above tolerance!')
        logging.debug(f'Neumann solve on {grid}: residual {residual:.3e}.')
        return potential - potential.mean()

@functools.lru_cache(maxsize=16)
def neumann_solver(grid):
    """Shared factorization per grid.

    Args:
        grid (mesh.Grid): Grid.

    Returns:
        NeumannPoisson: Cached solver.
    """
    return NeumannPoisson(grid)

def _flux_values(flux):
    if flux is None:
        return None
    if isinstance(flux, mesh.BoundaryTrace):
        return flux.outward_normal()
    return flux.values

def solve_neumann_poisson(rhs, flux=None):
    """Solve the Neumann problem with cell source and boundary flux.

    Args:
        rhs (mesh.ScalarField): Source.
        flux (:obj:`mesh.BoundaryFlux` or :obj:`mesh.BoundaryTrace`, optional): Outward normal
            derivative, or a velocity trace whose outward normal component is used.

    Returns:
        mesh.ScalarField: Mean-zero solution.
    """
    grid = rhs.grid
    if flux is not None:
        grid.check(flux)
    potential = neumann_solver(grid).solve(rhs.flat, _flux_values(flux))
    return mesh.ScalarField.from_flat(grid, potential, mean_zero=True)

@dataclasses.dataclass(frozen=True)
class LerayDecomposition:
    """Helmholtz splitting ``w = solenoidal + gradient_part``.

    Args:
        solenoidal (mesh.VectorField): Divergence-free part with zero normal trace.
        potential (mesh.ScalarField): Mean-zero potential q.
        gradient_part (mesh.VectorField): Gradient of q with the normal trace of the input.
    """
    solenoidal: mesh.VectorField
    potential: mesh.ScalarField
    gradient_part: mesh.VectorField

def _gradient_with_flux(potential, outward):
    grid = potential.grid
    flat = grid.gradient_matrix @ potential.flat + grid.flux_matrix @ outward
    return mesh.VectorField.from_flat(grid, flat)

def project(w):
    """Leray projection of a velocity field.

    Args:
        w (mesh.VectorField): Field with boundary values.

    Returns:
        LerayDecomposition: Decomposition of ``w``.
    """
    grid = w.grid
    outward = w.normal_values * grid.outward_sign
    rhs = grid.divergence_matrix @ w.flat
    potential = neumann_solver(grid).solve(rhs, outward)
    gradient_part = _gradient_with_flux(mesh.ScalarField.from_flat(grid, potential), outward)
    solenoidal = (w - gradient_part).with_normal_values(np.zeros(grid.n_normal))
    return LerayDecomposition(solenoidal,
                              mesh.ScalarField.from_flat(grid, potential, mean_zero=True),
                              gradient_part)

def harmonic_potential(trace):
    """Mean-zero discrete harmonic function whose normal derivative is ``g.n``.

    Args:
        trace (mesh.BoundaryTrace): Velocity trace with zero net flux.

    Raises:
        CompatibilityError: The trace has nonzero net flux.

    Returns:
        mesh.ScalarField: Potential q.
    """
    grid = trace.grid
    potential = neumann_solver(grid).solve(np.zeros(grid.n_cells), trace.outward_normal())
    return mesh.ScalarField.from_flat(grid, potential, mean_zero=True)

def potential_gradient(potential, trace):
    """Gradient of a potential with the normal values of ``trace`` on boundary edges.

    Returns:
        mesh.VectorField: Gradient field.
    """
    return _gradient_with_flux(potential, trace.outward_normal())

def harmonic_extension(trace):
    """Gradient of the discrete harmonic function whose normal derivative is ``g.n``.

    Args:
        trace (mesh.BoundaryTrace): Velocity trace with zero net flux.

    Raises:
        CompatibilityError: The trace has nonzero net flux.

    Returns:
        mesh.VectorField: Harmonic gradient field.
    """
    return potential_gradient(harmonic_potential(trace), trace)

def project_coupled(state):
    """Apply the projection to the velocity of a (velocity, temperature) pair; the temperature
    passes through.

    Args:
        state (tuple(mesh.VectorField, mesh.ScalarField)): Coupled state.

    Returns:
        tuple(mesh.VectorField, mesh.ScalarField): Projected state.
    """
    velocity, temperature = state
    return project(velocity).solenoidal, temperature
