"""Staggered (MAC) grid geometry, discrete differential operators, inner products and norms.

Velocity x-components live on vertical edges, y-components on horizontal edges, scalars at cell
centers. Every operator is a :mod:`scipy.sparse` matrix cached on the :class:`Grid`, so that
solvers assemble block systems from the same stencils the field-level functions apply.

Velocity operators act on the *extended* velocity vector: the edge values (boundary normal edges
included) followed by the tangential wall samples of a :class:`BoundaryTrace`. The boundary
normal edges together with the tangential samples are exactly the trace vector ``g``, so any
operator splits into an interior block and a data block by column selection.
"""

__author__ = 'Rajarshi Mandal'
__version__ = '1.0'
__all__ = ['WALLS',
           'CLOSURES',
           'Grid',
           'ScalarField',
           'VectorField',
           'BoundaryTrace',
           'BoundaryFlux',
           'BoundaryData',
           'PhysicalParams',
           'Norms',
           'divergence',
           'gradient',
           'laplacian_dirichlet',
           'laplacian_neumann',
           'advect',
           'inner_product',
           'gradient_inner_product',
           'boundary_inner_product',
           'norms',
           'l4_norm',
           'scalar_advection_matrices',
           'scalar_advection_carrier_matrix',
           'momentum_advection_matrix',
           'momentum_advection_carrier_matrix',
           'buoyancy_matrix',
           'temperature_gradient_matrix']

import dataclasses
import functools
import logging
from typing import Callable, Tuple

import numpy as np
from scipy import sparse

from boussinesq_bench import errors

WALLS = ('left', 'right', 'bottom', 'top')
CLOSURES = ('linear', 'first-order')


def _assemble(entries, shape):
    """Build a CSR matrix from a list of (rows, cols, values) triples."""
    if not entries:
        return sparse.csr_matrix(shape)
    rows = np.concatenate([np.ravel(r) for r, _, _ in entries])
    cols = np.concatenate([np.ravel(c) for _, c, _ in entries])
    vals = np.concatenate([np.broadcast_to(v, np.shape(r)).ravel() for r, _, v in entries])
    return sparse.coo_matrix((vals.astype(float), (rows, cols)), shape=shape).tocsr()

@dataclasses.dataclass(frozen=True)
class Grid:
    """Uniform MAC grid on an axis-aligned rectangle anchored at the origin.

    Args:
        nx (int): Cells along x, at least 4.
        ny (int): Cells along y, at least 4.
        lx (:obj:`float`, optional): Domain width. Defaults to 1.
        ly (:obj:`float`, optional): Domain height. Defaults to 1.
        closure (:obj:`str`, optional): Dirichlet wall closure of the velocity Laplacian,
            'linear' (ghost value reflected through the wall, second order) or 'first-order'
            (wall value imposed one full cell away). Defaults to 'linear'.
    """
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0
    closure: str = 'linear'

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise errors.GridError(f'Grid needs at least 4x4 cells, got {self.nx}x{self.ny}!')
        if self.lx <= 0 or self.ly <= 0:
            raise errors.GridError(f'Domain extents must be positive, got {self.lx}x{self.ly}!')
        if self.closure not in CLOSURES:
            raise errors.GridError(f'Unknown wall closure \'{self.closure}\'!')

    def __repr__(self):
        return f'Grid({self.nx}x{self.ny}, [0,{self.lx}]x[0,{self.ly}])'

    @property
    def hx(self):
        """float: Cell width."""
        return self.lx / self.nx

    @property
    def hy(self):
        """float: Cell height."""
        return self.ly / self.ny

    @property
    def cell_area(self):
        return self.hx * self.hy

    @property
    def n_u(self):
        return (self.nx + 1) * self.ny

    @property
    def n_v(self):
        return self.nx * (self.ny + 1)

    @property
    def n_velocity(self):
        return self.n_u + self.n_v

    @property
    def n_cells(self):
        return self.nx * self.ny

    @property
    def n_normal(self):
        """int: Boundary segments, i.e. boundary normal edges and boundary faces."""
        return 2 * (self.nx + self.ny)

    @property
    def n_tangential(self):
        return 2 * (self.ny + 1) + 2 * (self.nx + 1)

    @property
    def n_trace(self):
        return self.n_normal + self.n_tangential

    @property
    def n_extended(self):
        return self.n_velocity + self.n_tangential

    @property
    def n_vertices(self):
        return (self.nx + 1) * (self.ny + 1)

    def check(self, *fields):
        """Raise if any field lives on another grid.

        Args:
            *fields: Objects with a ``grid`` attribute.
        """
        for field in fields:
            if field.grid != self:
                raise errors.GridError(f'Field on {field.grid} used with {self}!')

    @functools.cached_property
    def u_ids(self):
        """numpy.ndarray: Velocity-vector indices of x-components, shape (nx+1, ny)."""
        return np.arange(self.n_u).reshape(self.nx + 1, self.ny)

    @functools.cached_property
    def v_ids(self):
        """numpy.ndarray: Velocity-vector indices of y-components, shape (nx, ny+1)."""
        return self.n_u + np.arange(self.n_v).reshape(self.nx, self.ny + 1)

    @functools.cached_property
    def c_ids(self):
        """numpy.ndarray: Scalar indices of cells, shape (nx, ny)."""
        return np.arange(self.n_cells).reshape(self.nx, self.ny)

    @functools.cached_property
    def vertex_ids(self):
        return np.arange(self.n_vertices).reshape(self.nx + 1, self.ny + 1)

    @functools.cached_property
    def tangential_ids(self):
        """dict(str, numpy.ndarray): Extended-vector indices of tangential wall samples."""
        base = self.n_velocity
        left = base + np.arange(self.ny + 1)
        right = left + self.ny + 1
        bottom = base + 2 * (self.ny + 1) + np.arange(self.nx + 1)
        top = bottom + self.nx + 1
        return {'left': left, 'right': right, 'bottom': bottom, 'top': top}

    @functools.cached_property
    def normal_edges(self):
        """numpy.ndarray: Velocity indices of boundary normal edges, ordered left, right, bottom,
        top."""
        return np.concatenate([self.u_ids[0, :], self.u_ids[self.nx, :],
                               self.v_ids[:, 0], self.v_ids[:, self.ny]])

    @functools.cached_property
    def wall_slices(self):
        """dict(str, slice): Position of each wall inside normal-ordered arrays."""
        nx, ny = self.nx, self.ny
        return {'left': slice(0, ny), 'right': slice(ny, 2 * ny),
                'bottom': slice(2 * ny, 2 * ny + nx), 'top': slice(2 * ny + nx, 2 * ny + 2 * nx)}

    @functools.cached_property
    def tangential_slices(self):
        nx, ny = self.nx, self.ny
        return {'left': slice(0, ny + 1), 'right': slice(ny + 1, 2 * ny + 2),
                'bottom': slice(2 * ny + 2, 2 * ny + nx + 3),
                'top': slice(2 * ny + nx + 3, 2 * ny + 2 * nx + 4)}

    @functools.cached_property
    def interior_edges(self):
        mask = np.ones(self.n_velocity, dtype=bool)
        mask[self.normal_edges] = False
        return np.flatnonzero(mask)

    @functools.cached_property
    def interior_mask(self):
        mask = np.zeros(self.n_velocity)
        mask[self.interior_edges] = 1.0
        return mask

    @functools.cached_property
    def trace_columns(self):
        """numpy.ndarray: Extended-vector indices holding the trace vector g."""
        return np.concatenate([self.normal_edges,
                               self.n_velocity + np.arange(self.n_tangential)])

    @functools.cached_property
    def outward_sign(self):
        """numpy.ndarray: Sign of the outward normal along the Cartesian axis of each boundary
        segment."""
        nx, ny = self.nx, self.ny
        return np.concatenate([-np.ones(ny), np.ones(ny), -np.ones(nx), np.ones(nx)])

    @functools.cached_property
    def segment_lengths(self):
        nx, ny = self.nx, self.ny
        return np.concatenate([np.full(2 * ny, self.hy), np.full(2 * nx, self.hx)])

    @functools.cached_property
    def tangential_weights(self):
        """numpy.ndarray: Trapezoid weights of the tangential wall samples."""
        def trapezoid(count, step):
            weights = np.full(count, step)
            weights[[0, -1]] = step / 2
            return weights
        ny_w = trapezoid(self.ny + 1, self.hy)
        nx_w = trapezoid(self.nx + 1, self.hx)
        return np.concatenate([ny_w, ny_w, nx_w, nx_w])

    @functools.cached_property
    def velocity_weights(self):
        """numpy.ndarray: Quadrature weights of velocity edges; boundary edges carry half a
        cell."""
        weights = np.full(self.n_velocity, self.cell_area)
        weights[self.normal_edges] /= 2
        return weights

    @functools.cached_property
    def boundary_cells(self):
        """numpy.ndarray: Cell adjacent to each boundary segment, normal-ordered."""
        nx, ny = self.nx, self.ny
        return np.concatenate([self.c_ids[0, :], self.c_ids[nx - 1, :],
                               self.c_ids[:, 0], self.c_ids[:, ny - 1]])

    @functools.cached_property
    def face_offsets(self):
        """numpy.ndarray: Distance from each boundary face to the adjacent cell center."""
        return np.concatenate([np.full(2 * self.ny, self.hx / 2),
                               np.full(2 * self.nx, self.hy / 2)])

    @functools.cached_property
    def xc(self):
        return (np.arange(self.nx) + 0.5) * self.hx

    @functools.cached_property
    def yc(self):
        return (np.arange(self.ny) + 0.5) * self.hy

    @functools.cached_property
    def xn(self):
        """numpy.ndarray: x-coordinates of vertical edges."""
        return np.arange(self.nx + 1) * self.hx

    @functools.cached_property
    def yn(self):
        return np.arange(self.ny + 1) * self.hy

    def normal_positions(self):
        """Boundary segment midpoints, normal-ordered.

        Returns:
            tuple(numpy.ndarray, numpy.ndarray): x and y coordinates.
        """
        x = np.concatenate([np.zeros(self.ny), np.full(self.ny, self.lx), self.xc, self.xc])
        y = np.concatenate([self.yc, self.yc, np.zeros(self.nx), np.full(self.nx, self.ly)])
        return x, y

    def tangential_positions(self):
        """Boundary vertices at which tangential samples live, tangential-ordered.

        Returns:
            tuple(numpy.ndarray, numpy.ndarray): x and y coordinates.
        """
        x = np.concatenate([np.zeros(self.ny + 1), np.full(self.ny + 1, self.lx),
                            self.xn, self.xn])
        y = np.concatenate([self.yn, self.yn, np.zeros(self.nx + 1),
                            np.full(self.nx + 1, self.ly)])
        return x, y

    @functools.cached_property
    def divergence_matrix(self):
        """scipy.sparse.csr_matrix: Cells x velocity flux differences."""
        nx, ny, hx, hy = self.nx, self.ny, self.hx, self.hy
        c = self.c_ids
        return _assemble([(c, self.u_ids[1:, :], 1 / hx), (c, self.u_ids[:-1, :], -1 / hx),
                          (c, self.v_ids[:, 1:], 1 / hy), (c, self.v_ids[:, :-1], -1 / hy)],
                         (self.n_cells, self.n_velocity))

    @functools.cached_property
    def gradient_matrix(self):
        """scipy.sparse.csr_matrix: Velocity x cells differences on interior edges; the negative
        transpose of the divergence there."""
        return sparse.diags(self.interior_mask) @ (-self.divergence_matrix.T).tocsr()

    @functools.cached_property
    def flux_matrix(self):
        """scipy.sparse.csr_matrix: Places outward normal fluxes on boundary normal edges."""
        return _assemble([(self.normal_edges, np.arange(self.n_normal), self.outward_sign)],
                         (self.n_velocity, self.n_normal))

    @functools.cached_property
    def neumann_laplacian(self):
        return (self.divergence_matrix @ self.gradient_matrix).tocsr()

    @functools.cached_property
    def neumann_flux_source(self):
        """scipy.sparse.csr_matrix: Cells x flux contribution of Neumann data to the Laplacian."""
        return (self.divergence_matrix @ self.flux_matrix).tocsr()

    @functools.cached_property
    def wall_distance(self):
        """tuple(float, float): Distance from the last interior unknown to the wall used by the
        Dirichlet closure, along x and along y."""
        if self.closure == 'linear':
            return self.hx / 2, self.hy / 2
        return self.hx, self.hy

    @functools.cached_property
    def velocity_difference(self):
        """tuple(scipy.sparse.csr_matrix, numpy.ndarray): Difference matrix on the extended
        velocity vector and the quadrature weight of each difference. The velocity gradient
        energy is ``sum(weights * (matrix @ w_ext) ** 2)``."""
        nx, ny, hx, hy = self.nx, self.ny, self.hx, self.hy
        dx, dy = self.wall_distance
        u, v, t = self.u_ids, self.v_ids, self.tangential_ids
        entries = []
        weights = []
        row = 0

        def block(cols_plus, cols_minus, scale, weight):
            nonlocal row
            count = np.size(cols_plus)
            rows = row + np.arange(count)
            entries.append((rows, np.ravel(cols_plus), scale))
            entries.append((rows, np.ravel(cols_minus), -scale))
            weights.append(np.full(count, weight))
            row += count

        block(u[1:, :], u[:-1, :], 1 / hx, hx * hy)
        block(u[1:nx, 1:], u[1:nx, :-1], 1 / hy, hx * hy)
        block(u[1:nx, 0], t['bottom'][1:nx], 1 / dy, hx * dy)
        block(t['top'][1:nx], u[1:nx, ny - 1], 1 / dy, hx * dy)
        block(v[:, 1:], v[:, :-1], 1 / hy, hx * hy)
        block(v[1:, 1:ny], v[:-1, 1:ny], 1 / hx, hx * hy)
        block(v[0, 1:ny], t['left'][1:ny], 1 / dx, hy * dx)
        block(t['right'][1:ny], v[nx - 1, 1:ny], 1 / dx, hy * dx)
        return _assemble(entries, (row, self.n_extended)), np.concatenate(weights)

    @functools.cached_property
    def dirichlet_laplacian(self):
        """scipy.sparse.csr_matrix: Velocity x extended Laplacian; rows of boundary normal edges
        are zero."""
        difference, weights = self.velocity_difference
        scale = self.interior_mask / self.cell_area
        return (-sparse.diags(scale) @ self.extension.T @ difference.T @ sparse.diags(weights)
                @ difference).tocsr()

    @functools.cached_property
    def extension(self):
        """scipy.sparse.csr_matrix: Embeds velocity vectors into extended vectors."""
        return sparse.eye(self.n_extended, self.n_velocity, format='csr')

    @functools.cached_property
    def face_values(self):
        """tuple(scipy.sparse.csr_matrix, scipy.sparse.csr_matrix): Scalar values on velocity
        edges from cells, and the contribution of Neumann flux at boundary faces."""
        nx, ny = self.nx, self.ny
        u, v, c = self.u_ids, self.v_ids, self.c_ids
        cells = _assemble([(u[1:nx, :], c[:-1, :], 0.5), (u[1:nx, :], c[1:, :], 0.5),
                           (v[:, 1:ny], c[:, :-1], 0.5), (v[:, 1:ny], c[:, 1:], 0.5),
                           (self.normal_edges, self.boundary_cells, 1.0)],
                          (self.n_velocity, self.n_cells))
        flux = _assemble([(self.normal_edges, np.arange(self.n_normal), self.face_offsets)],
                         (self.n_velocity, self.n_normal))
        return cells, flux

    @functools.cached_property
    def cells_to_edges(self):
        """scipy.sparse.csr_matrix: Average of the two cells adjacent to each interior edge."""
        return (sparse.diags(self.interior_mask) @ self.face_values[0]).tocsr()

    @functools.cached_property
    def u_to_cells(self):
        u, c = self.u_ids, self.c_ids
        return _assemble([(c, u[:-1, :], 0.5), (c, u[1:, :], 0.5)],
                         (self.n_cells, self.n_velocity))

    @functools.cached_property
    def v_to_cells(self):
        v, c = self.v_ids, self.c_ids
        return _assemble([(c, v[:, :-1], 0.5), (c, v[:, 1:], 0.5)],
                         (self.n_cells, self.n_velocity))

    @functools.cached_property
    def u_rows(self):
        """scipy.sparse.dia_matrix: Selects interior x-component rows."""
        mask = np.zeros(self.n_velocity)
        mask[:self.n_u] = 1.0
        return sparse.diags(mask * self.interior_mask)

    @functools.cached_property
    def v_rows(self):
        mask = np.zeros(self.n_velocity)
        mask[self.n_u:] = 1.0
        return sparse.diags(mask * self.interior_mask)

    @functools.cached_property
    def cell_derivatives(self):
        """tuple(scipy.sparse.csr_matrix, scipy.sparse.csr_matrix): Cell-centered x and y
        derivatives, central inside and one-sided second order in boundary cells."""
        def derivative(ids, step):
            n = ids.shape[0]
            return [(ids[1:-1], ids[2:], 0.5 / step), (ids[1:-1], ids[:-2], -0.5 / step),
                    (ids[0], ids[0], -1.5 / step), (ids[0], ids[1], 2 / step),
                    (ids[0], ids[2], -0.5 / step),
                    (ids[n - 1], ids[n - 1], 1.5 / step), (ids[n - 1], ids[n - 2], -2 / step),
                    (ids[n - 1], ids[n - 3], 0.5 / step)]
        shape = (self.n_cells, self.n_cells)
        return (_assemble(derivative(self.c_ids, self.hx), shape),
                _assemble(derivative(self.c_ids.T, self.hy), shape))

    @functools.cached_property
    def momentum_faces(self):
        """dict(str, scipy.sparse.csr_matrix): Interpolation and differencing operators of the
        momentum control volumes.

        x-momentum volumes exchange through cell centers (carrier and transported value are
        averages of x-components) and through vertices (carrier from y-components, transported
        value from x-components or the tangential wall sample). y-momentum volumes mirror this.
        """
        nx, ny, hx, hy = self.nx, self.ny, self.hx, self.hy
        u, v, t, p = self.u_ids, self.v_ids, self.tangential_ids, self.vertex_ids
        shape_ve = (self.n_vertices, self.n_velocity)
        shape_vx = (self.n_vertices, self.n_extended)
        carrier_v = _assemble([(p[1:nx, :], v[:-1, :], 0.5), (p[1:nx, :], v[1:, :], 0.5)],
                              shape_ve)
        transported_u = _assemble([(p[1:nx, 1:ny], u[1:nx, :-1], 0.5),
                                   (p[1:nx, 1:ny], u[1:nx, 1:], 0.5),
                                   (p[1:nx, 0], t['bottom'][1:nx], 1.0),
                                   (p[1:nx, ny], t['top'][1:nx], 1.0)], shape_vx)
        difference_y = _assemble([(u[1:nx, :], p[1:nx, 1:], 1 / hy),
                                  (u[1:nx, :], p[1:nx, :-1], -1 / hy)],
                                 (self.n_velocity, self.n_vertices))
        carrier_u = _assemble([(p[:, 1:ny], u[:, :-1], 0.5), (p[:, 1:ny], u[:, 1:], 0.5)],
                              shape_ve)
        transported_v = _assemble([(p[1:nx, 1:ny], v[:-1, 1:ny], 0.5),
                                   (p[1:nx, 1:ny], v[1:, 1:ny], 0.5),
                                   (p[0, 1:ny], t['left'][1:ny], 1.0),
                                   (p[nx, 1:ny], t['right'][1:ny], 1.0)], shape_vx)
        difference_x = _assemble([(v[:, 1:ny], p[1:, 1:ny], 1 / hx),
                                  (v[:, 1:ny], p[:-1, 1:ny], -1 / hx)],
                                 (self.n_velocity, self.n_vertices))
        gradient = self.gradient_matrix
        return {'cell_u': self.u_to_cells, 'cell_v': self.v_to_cells,
                'diff_cell_u': (self.u_rows @ gradient).tocsr(),
                'diff_cell_v': (self.v_rows @ gradient).tocsr(),
                'carrier_v': carrier_v, 'transported_u': transported_u,
                'diff_vertex_u': difference_y,
                'carrier_u': carrier_u, 'transported_v': transported_v,
                'diff_vertex_v': difference_x}

    @functools.cached_property
    def momentum_volume_divergence(self):
        """scipy.sparse.csr_matrix: Divergence of a carrier over the momentum control volumes."""
        f = self.momentum_faces
        return (f['diff_cell_u'] @ f['cell_u'] + f['diff_vertex_u'] @ f['carrier_v']
                + f['diff_cell_v'] @ f['cell_v'] + f['diff_vertex_v'] @ f['carrier_u']).tocsr()

@dataclasses.dataclass(frozen=True, eq=False)
class ScalarField:
    """Cell-centered scalar.

    Args:
        grid (Grid): Grid of the field.
        values (numpy.ndarray): Values, shape (nx, ny).
        mean_zero (:obj:`bool`, optional): Marks the field as mean-free; checked on
            construction.
    """
    grid: Grid
    values: np.ndarray
    mean_zero: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.nx, self.grid.ny):
            raise errors.GridError(f'Scalar of shape {values.shape} does not fit {self.grid}!')
        object.__setattr__(self, 'values', values)
        if self.mean_zero:
            scale = np.abs(values).max(initial=0.0)
            if abs(values.mean()) > 1e-12 * max(scale, 1e-300) and scale > 0:
                raise errors.GridError(f'Scalar flagged mean-zero has mean {values.mean()}!')

    @classmethod
    def zero(cls, grid):
        return cls(grid, np.zeros((grid.nx, grid.ny)))

    @classmethod
    def from_flat(cls, grid, flat, mean_zero=False):
        return cls(grid, np.reshape(flat, (grid.nx, grid.ny)), mean_zero)

    @classmethod
    def from_function(cls, grid, function):
        """Sample ``function(x, y)`` at cell centers."""
        x, y = np.meshgrid(grid.xc, grid.yc, indexing='ij')
        return cls(grid, np.broadcast_to(function(x, y), x.shape))

    @property
    def flat(self):
        return self.values.ravel()

    def mean(self):
        return float(self.values.mean())

    def mean_free(self):
        """Returns:
            ScalarField: Copy with the mean removed and the mean-zero flag set.
        """
        return ScalarField(self.grid, self.values - self.values.mean(), mean_zero=True)

    def __add__(self, other):
        self.grid.check(other)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other):
        self.grid.check(other)
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, factor):
        return ScalarField(self.grid, self.values * factor, self.mean_zero)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

@dataclasses.dataclass(frozen=True, eq=False)
class VectorField:
    """Staggered vector field; boundary normal values are stored on the boundary edges.

    Args:
        grid (Grid): Grid of the field.
        u (numpy.ndarray): x-components on vertical edges, shape (nx+1, ny).
        v (numpy.ndarray): y-components on horizontal edges, shape (nx, ny+1).
    """
    grid: Grid
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if u.shape != (self.grid.nx + 1, self.grid.ny) or v.shape != (self.grid.nx,
                                                                       self.grid.ny + 1):
            raise errors.GridError(f'Vector of shapes {u.shape}, {v.shape} does not fit '
                                   f'{self.grid}!')
        object.__setattr__(self, 'u', u)
        object.__setattr__(self, 'v', v)

    @classmethod
    def zero(cls, grid):
        return cls(grid, np.zeros((grid.nx + 1, grid.ny)), np.zeros((grid.nx, grid.ny + 1)))

    @classmethod
    def from_flat(cls, grid, flat):
        flat = np.asarray(flat, dtype=float)
        return cls(grid, flat[:grid.n_u].reshape(grid.nx + 1, grid.ny),
                   flat[grid.n_u:grid.n_velocity].reshape(grid.nx, grid.ny + 1))

    @classmethod
    def from_function(cls, grid, function_u, function_v):
        """Sample point values of each component at its edge midpoints."""
        xu, yu = np.meshgrid(grid.xn, grid.yc, indexing='ij')
        xv, yv = np.meshgrid(grid.xc, grid.yn, indexing='ij')
        return cls(grid, np.broadcast_to(function_u(xu, yu), xu.shape),
                   np.broadcast_to(function_v(xv, yv), xv.shape))

    @classmethod
    def from_stream_function(cls, grid, stream_function):
        """Edge-averaged velocity (d/dy psi, -d/dx psi) from vertex differences of psi.

        The result is discretely divergence-free to rounding, boundary edges included.
        """
        x, y = np.meshgrid(grid.xn, grid.yn, indexing='ij')
        psi = np.broadcast_to(stream_function(x, y), x.shape)
        return cls(grid, np.diff(psi, axis=1) / grid.hy, -np.diff(psi, axis=0) / grid.hx)

    @property
    def flat(self):
        return np.concatenate([self.u.ravel(), self.v.ravel()])

    @property
    def interior(self):
        """numpy.ndarray: Values on interior edges."""
        return self.flat[self.grid.interior_edges]

    @property
    def normal_values(self):
        """numpy.ndarray: Cartesian values on boundary normal edges, normal-ordered."""
        return self.flat[self.grid.normal_edges]

    def with_normal_values(self, normal):
        flat = self.flat
        flat[self.grid.normal_edges] = normal
        return VectorField.from_flat(self.grid, flat)

    def extended(self, trace=None):
        """Extended vector: edge values followed by the tangential samples of ``trace`` (zero
        when omitted)."""
        tangential = (np.zeros(self.grid.n_tangential) if trace is None else trace.tangential)
        return np.concatenate([self.flat, tangential])

    def max_speed(self):
        return float(max(np.abs(self.u).max(), np.abs(self.v).max()))

    def __add__(self, other):
        self.grid.check(other)
        return VectorField(self.grid, self.u + other.u, self.v + other.v)

    def __sub__(self, other):
        self.grid.check(other)
        return VectorField(self.grid, self.u - other.u, self.v - other.v)

    def __mul__(self, factor):
        return VectorField(self.grid, self.u * factor, self.v * factor)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

@dataclasses.dataclass(frozen=True, eq=False)
class BoundaryTrace:
    """Velocity Dirichlet trace g.

    Args:
        grid (Grid): Grid of the trace.
        normal (numpy.ndarray): Cartesian normal component at boundary segment midpoints,
            normal-ordered (left, right, bottom, top).
        tangential (numpy.ndarray): Tangential component at boundary vertices, per wall.
        time (:obj:`float`, optional): Time stamp.
        normal_flux_compatible (:obj:`bool`, optional): Marks zero net flux; checked on
            construction.
    """
    grid: Grid
    normal: np.ndarray
    tangential: np.ndarray
    time: float = 0.0
    normal_flux_compatible: bool = False

    def __post_init__(self):
        normal = np.asarray(self.normal, dtype=float)
        tangential = np.asarray(self.tangential, dtype=float)
        if normal.shape != (self.grid.n_normal,) or tangential.shape != (self.grid.n_tangential,):
            raise errors.GridError(f'Trace segments {normal.shape}, {tangential.shape} do not '
                                   f'match the perimeter of {self.grid}!')
        object.__setattr__(self, 'normal', normal)
        object.__setattr__(self, 'tangential', tangential)
        if self.normal_flux_compatible and abs(self.net_flux()) > 1e-12:
            raise errors.CompatibilityError('Trace flagged compatible has net flux',
                                            self.net_flux())

    @classmethod
    def zero(cls, grid, time=0.0):
        return cls(grid, np.zeros(grid.n_normal), np.zeros(grid.n_tangential), time, True)

    @classmethod
    def from_vector(cls, grid, vector, time=0.0):
        return cls(grid, vector[:grid.n_normal], vector[grid.n_normal:], time)

    @classmethod
    def from_function(cls, grid, function, time=0.0):
        """Sample a velocity ``function(x, y) -> (gx, gy)`` at the trace positions."""
        xn, yn = grid.normal_positions()
        gx, gy = function(xn, yn)
        normal = np.concatenate([np.broadcast_to(gx, xn.shape)[:2 * grid.ny],
                                 np.broadcast_to(gy, xn.shape)[2 * grid.ny:]])
        xt, yt = grid.tangential_positions()
        gx, gy = function(xt, yt)
        split = 2 * (grid.ny + 1)
        tangential = np.concatenate([np.broadcast_to(gy, xt.shape)[:split],
                                     np.broadcast_to(gx, xt.shape)[split:]])
        return cls(grid, normal, tangential, time)

    @classmethod
    def from_stream_function(cls, grid, stream_function, function, time=0.0):
        """Normal components as segment averages from differences of a stream function (zero
        net flux to rounding), tangential components sampled from ``function``."""
        trace = cls.from_function(grid, function, time)
        nx, ny = grid.nx, grid.ny
        walls = {'left': (np.zeros(ny + 1), grid.yn), 'right': (np.full(ny + 1, grid.lx), grid.yn),
                 'bottom': (grid.xn, np.zeros(nx + 1)), 'top': (grid.xn, np.full(nx + 1, grid.ly))}
        normal = []
        for wall in WALLS:
            x, y = walls[wall]
            psi = np.broadcast_to(stream_function(x, y), x.shape)
            if wall in ('left', 'right'):
                normal.append(np.diff(psi) / grid.hy)
            else:
                normal.append(-np.diff(psi) / grid.hx)
        return cls(grid, np.concatenate(normal), trace.tangential, time)

    @classmethod
    def from_field(cls, field, tangential=None, time=0.0):
        """Trace holding the stored boundary normal values of a field."""
        grid = field.grid
        tangential = np.zeros(grid.n_tangential) if tangential is None else tangential
        return cls(grid, field.normal_values, tangential, time)

    @property
    def vector(self):
        """numpy.ndarray: Trace vector g, matching :attr:`Grid.trace_columns`."""
        return np.concatenate([self.normal, self.tangential])

    def wall(self, name):
        """Returns:
            tuple(numpy.ndarray, numpy.ndarray): Normal and tangential samples of one wall.
        """
        return (self.normal[self.grid.wall_slices[name]],
                self.tangential[self.grid.tangential_slices[name]])

    def outward_normal(self):
        """numpy.ndarray: g.n at boundary segment midpoints."""
        return self.normal * self.grid.outward_sign

    def net_flux(self):
        return float(np.sum(self.outward_normal() * self.grid.segment_lengths))

    def __add__(self, other):
        return BoundaryTrace(self.grid, self.normal + other.normal,
                             self.tangential + other.tangential, self.time)

    def __mul__(self, factor):
        return BoundaryTrace(self.grid, self.normal * factor, self.tangential * factor,
                             self.time)

    __rmul__ = __mul__

@dataclasses.dataclass(frozen=True, eq=False)
class BoundaryFlux:
    """Temperature Neumann data h: outward normal derivative at boundary face midpoints.

    Args:
        grid (Grid): Grid of the flux.
        values (numpy.ndarray): Flux per boundary face, normal-ordered.
        time (:obj:`float`, optional): Time stamp.
    """
    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_normal,):
            raise errors.GridError(f'Flux of {values.shape} does not match {self.grid}!')
        object.__setattr__(self, 'values', values)

    @classmethod
    def zero(cls, grid, time=0.0):
        return cls(grid, np.zeros(grid.n_normal), time)

    @classmethod
    def from_walls(cls, grid, time=0.0, **walls):
        """Flux from per-wall arrays or constants; missing walls are zero."""
        values = np.zeros(grid.n_normal)
        for name, wall_values in walls.items():
            values[grid.wall_slices[name]] = wall_values
        return cls(grid, values, time)

    @classmethod
    def from_gradient(cls, grid, gradient_function, time=0.0):
        """Outward derivative from ``gradient_function(x, y) -> (dx, dy)``."""
        x, y = grid.normal_positions()
        gx, gy = gradient_function(x, y)
        gx = np.broadcast_to(gx, x.shape)
        gy = np.broadcast_to(gy, x.shape)
        cartesian = np.concatenate([gx[:2 * grid.ny], gy[2 * grid.ny:]])
        return cls(grid, cartesian * grid.outward_sign, time)

    def net_flux(self):
        return float(np.sum(self.values * self.grid.segment_lengths))

    def boundary_mean(self):
        return self.net_flux() / float(np.sum(self.grid.segment_lengths))

    def mean_free(self):
        return BoundaryFlux(self.grid, self.values - self.boundary_mean(), self.time)

    def __add__(self, other):
        return BoundaryFlux(self.grid, self.values + other.values, self.time)

    def __mul__(self, factor):
        return BoundaryFlux(self.grid, self.values * factor, self.time)

    __rmul__ = __mul__

@dataclasses.dataclass(frozen=True)
class BoundaryData:
    """Time-parameterized boundary data.

    Args:
        velocity (callable): t -> :class:`BoundaryTrace`.
        flux (callable): t -> :class:`BoundaryFlux`.
    """
    velocity: Callable[[float], BoundaryTrace]
    flux: Callable[[float], BoundaryFlux]

    @classmethod
    def zero(cls, grid):
        return cls(lambda t: BoundaryTrace.zero(grid, t), lambda t: BoundaryFlux.zero(grid, t))

    @classmethod
    def constant(cls, trace, flux):
        return cls(lambda t: trace, lambda t: flux)

    def at(self, time):
        return self.velocity(time), self.flux(time)

@dataclasses.dataclass(frozen=True)
class PhysicalParams:
    """Physical parameters.

    Args:
        nu (:obj:`float`, optional): Kinematic viscosity. Defaults to 1.
        mu (:obj:`float`, optional): Thermal diffusivity. Defaults to 1.
        beta (:obj:`tuple(float, float)`, optional): Buoyancy vector. Defaults to (0, 1).
        lambda0 (:obj:`float`, optional): Shift constant. Defaults to 0.
    """
    nu: float = 1.0
    mu: float = 1.0
    beta: Tuple[float, float] = (0.0, 1.0)
    lambda0: float = 0.0

    def __post_init__(self):
        if self.nu <= 0 or self.mu <= 0:
            raise ValueError(f'Viscosities must be positive, got nu={self.nu}, mu={self.mu}!')
        if self.lambda0 < 0:
            raise ValueError(f'Shift must be nonnegative, got {self.lambda0}!')
        object.__setattr__(self, 'beta', tuple(float(b) for b in self.beta))

    @property
    def beta_sup(self):
        return max(abs(b) for b in self.beta)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

@dataclasses.dataclass(frozen=True)
class Norms:
    l2: float
    h1: float
    boundary_l2: float

def divergence(w):
    """Discrete divergence at cell centers.

    Args:
        w (VectorField): Vector field.

    Returns:
        ScalarField: Flux-difference divergence.
    """
    return ScalarField.from_flat(w.grid, w.grid.divergence_matrix @ w.flat)

def gradient(q, flux=None):
    """Discrete gradient on edges.

    Args:
        q (ScalarField): Cell-centered scalar.
        flux (:obj:`BoundaryFlux`, optional): Normal derivative placed on boundary edges;
            boundary edges are zero when omitted.

    Returns:
        VectorField: Edge-centered differences.
    """
    grid = q.grid
    flat = grid.gradient_matrix @ q.flat
    if flux is not None:
        grid.check(flux)
        flat = flat + grid.flux_matrix @ flux.values
    return VectorField.from_flat(grid, flat)

def laplacian_dirichlet(w, trace):
    """Five-point Laplacian of a velocity field with Dirichlet data.

    The trace replaces the stored boundary normal values and supplies the tangential wall
    values used by the ghost closure.

    Args:
        w (VectorField): Velocity field.
        trace (BoundaryTrace): Dirichlet data.

    Returns:
        VectorField: Laplacian on interior edges, zero on boundary edges.
    """
    grid = w.grid
    grid.check(trace)
    extended = w.with_normal_values(trace.normal).extended(trace)
    return VectorField.from_flat(grid, grid.dirichlet_laplacian @ extended)

def laplacian_neumann(q, flux=None):
    """Conservative Laplacian of a scalar with prescribed outward normal derivative.

    Args:
        q (ScalarField): Scalar.
        flux (:obj:`BoundaryFlux`, optional): Neumann data, zero when omitted.

    Returns:
        ScalarField: Laplacian at cell centers.
    """
    grid = q.grid
    flat = grid.neumann_laplacian @ q.flat
    if flux is not None:
        grid.check(flux)
        flat = flat + grid.neumann_flux_source @ flux.values
    return ScalarField.from_flat(grid, flat)

def scalar_advection_matrices(grid, carrier):
    """Skew-symmetric scalar advection as matrices in the transported scalar.

    Args:
        grid (Grid): Grid.
        carrier (numpy.ndarray): Flat carrier velocity, boundary normal edges included.

    Returns:
        tuple(scipy.sparse.csr_matrix, scipy.sparse.csr_matrix): Cells x cells matrix, and
            cells x flux matrix of the boundary face extrapolation.
    """
    cells, flux = grid.face_values
    divergence_matrix = grid.divergence_matrix
    carried = divergence_matrix @ sparse.diags(carrier)
    source = sparse.diags(divergence_matrix @ carrier)
    return (carried @ cells - 0.5 * source).tocsr(), (carried @ flux).tocsr()

def scalar_advection_carrier_matrix(grid, scalar, flux=None):
    """Skew-symmetric scalar advection as a matrix in the carrier.

    Args:
        grid (Grid): Grid.
        scalar (numpy.ndarray): Flat transported scalar.
        flux (:obj:`numpy.ndarray`, optional): Neumann data of the scalar.

    Returns:
        scipy.sparse.csr_matrix: Cells x velocity matrix.
    """
    cells, flux_matrix = grid.face_values
    faces = cells @ scalar
    if flux is not None:
        faces = faces + flux_matrix @ flux
    divergence_matrix = grid.divergence_matrix
    return (divergence_matrix @ sparse.diags(faces)
            - 0.5 * sparse.diags(scalar) @ divergence_matrix).tocsr()

def momentum_advection_matrix(grid, carrier):
    """Skew-symmetric momentum advection as a matrix in the transported velocity.

    Args:
        grid (Grid): Grid.
        carrier (numpy.ndarray): Flat carrier velocity, boundary normal edges included.

    Returns:
        scipy.sparse.csr_matrix: Velocity x extended matrix; boundary rows are zero.
    """
    f = grid.momentum_faces
    extension = grid.extension.T
    conservative = (f['diff_cell_u'] @ sparse.diags(f['cell_u'] @ carrier) @ f['cell_u']
                    @ extension
                    + f['diff_vertex_u'] @ sparse.diags(f['carrier_v'] @ carrier)
                    @ f['transported_u']
                    + f['diff_cell_v'] @ sparse.diags(f['cell_v'] @ carrier) @ f['cell_v']
                    @ extension
                    + f['diff_vertex_v'] @ sparse.diags(f['carrier_u'] @ carrier)
                    @ f['transported_v'])
    source = sparse.diags(grid.momentum_volume_divergence @ carrier) @ extension
    return (conservative - 0.5 * source).tocsr()

def momentum_advection_carrier_matrix(grid, transported):
    """Skew-symmetric momentum advection as a matrix in the carrier.

    Args:
        grid (Grid): Grid.
        transported (numpy.ndarray): Extended transported velocity.

    Returns:
        scipy.sparse.csr_matrix: Velocity x velocity matrix; boundary rows are zero.
    """
    f = grid.momentum_faces
    edges = transported[:grid.n_velocity]
    conservative = (f['diff_cell_u'] @ sparse.diags(f['cell_u'] @ edges) @ f['cell_u']
                    + f['diff_vertex_u'] @ sparse.diags(f['transported_u'] @ transported)
                    @ f['carrier_v']
                    + f['diff_cell_v'] @ sparse.diags(f['cell_v'] @ edges) @ f['cell_v']
                    + f['diff_vertex_v'] @ sparse.diags(f['transported_v'] @ transported)
                    @ f['carrier_u'])
    source = sparse.diags(edges * grid.interior_mask) @ grid.momentum_volume_divergence
    return (conservative - 0.5 * source).tocsr()

def advect(carrier, field, boundary=None):
    """Skew-symmetric advection, half the sum of advective and divergence forms.

    Args:
        carrier (VectorField): Carrier velocity.
        field (:obj:`ScalarField` or :obj:`VectorField`): Transported field.
        boundary (:obj:`BoundaryFlux` or :obj:`BoundaryTrace`, optional): Neumann data of a
            scalar (boundary face extrapolation) or the trace supplying tangential wall values
            of a vector. Zero when omitted.

    Returns:
        ScalarField or VectorField: Advection of ``field`` by ``carrier``.
    """
    grid = carrier.grid
    grid.check(field)
    if isinstance(field, ScalarField):
        cells, flux = scalar_advection_matrices(grid, carrier.flat)
        flat = cells @ field.flat
        if boundary is not None:
            flat = flat + flux @ boundary.values
        return ScalarField.from_flat(grid, flat)
    matrix = momentum_advection_matrix(grid, carrier.flat)
    return VectorField.from_flat(grid, matrix @ field.extended(boundary))

def inner_product(a, b):
    """Quadrature inner product of two scalars or two vector fields.

    Args:
        a (:obj:`ScalarField` or :obj:`VectorField`): First field.
        b (:obj:`ScalarField` or :obj:`VectorField`): Second field.

    Returns:
        float: Mass-weighted sum.
    """
    grid = a.grid
    grid.check(b)
    if isinstance(a, ScalarField):
        return float(grid.cell_area * np.dot(a.flat, b.flat))
    return float(np.dot(grid.velocity_weights * a.flat, b.flat))

def gradient_inner_product(a, b, trace_a=None, trace_b=None):
    """Inner product of discrete gradients, consistent with the Laplacians.

    For vector fields the wall differences use the tangential samples of the traces (zero when
    omitted), so that ``-<laplacian_dirichlet(w, 0), w> = gradient_inner_product(w, w)`` for
    zero-trace fields.

    Returns:
        float: Gradient inner product.
    """
    grid = a.grid
    grid.check(b)
    if isinstance(a, ScalarField):
        gradient_matrix = grid.gradient_matrix
        return float(grid.cell_area * np.dot(gradient_matrix @ a.flat, gradient_matrix @ b.flat))
    difference, weights = grid.velocity_difference
    return float(np.dot(weights * (difference @ a.extended(trace_a)),
                        difference @ b.extended(trace_b)))

def boundary_inner_product(a, b):
    """Perimeter quadrature pairing of two traces or two fluxes."""
    grid = a.grid
    if isinstance(a, BoundaryFlux):
        return float(np.sum(grid.segment_lengths * a.values * b.values))
    return float(np.sum(grid.segment_lengths * a.normal * b.normal)
                 + np.sum(grid.tangential_weights * a.tangential * b.tangential))

def norms(field, trace=None):
    """L2, H1 and boundary L2 norms.

    Args:
        field (:obj:`ScalarField` or :obj:`VectorField`): Field.
        trace (:obj:`BoundaryTrace`, optional): Tangential wall values of a vector field.

    Returns:
        Norms: Norms of the field; scalar boundary values are those of boundary cells.
    """
    grid = field.grid
    l2_sq = inner_product(field, field)
    h1_sq = l2_sq + gradient_inner_product(field, field, trace, trace)
    if isinstance(field, ScalarField):
        boundary_sq = np.sum(grid.segment_lengths * field.flat[grid.boundary_cells] ** 2)
    else:
        tangential = np.zeros(grid.n_tangential) if trace is None else trace.tangential
        boundary_sq = (np.sum(grid.segment_lengths * field.normal_values ** 2)
                       + np.sum(grid.tangential_weights * tangential ** 2))
    return Norms(float(np.sqrt(l2_sq)), float(np.sqrt(h1_sq)), float(np.sqrt(boundary_sq)))

def l4_norm(field):
    """L4 norm by cell-wise fourth-power quadrature of center-interpolated values."""
    grid = field.grid
    if isinstance(field, ScalarField):
        density = field.flat ** 4
    else:
        flat = field.flat
        density = ((grid.u_to_cells @ flat) ** 2 + (grid.v_to_cells @ flat) ** 2) ** 2
    return float((grid.cell_area * density.sum()) ** 0.25)

def buoyancy_matrix(grid, beta):
    """Velocity x cells matrix of the buoyancy force, the scalar averaged onto interior edges.

    Args:
        grid (Grid): Grid.
        beta (tuple(float, float)): Buoyancy vector.

    Returns:
        scipy.sparse.csr_matrix: Buoyancy operator.
    """
    averaged = grid.cells_to_edges
    return (beta[0] * grid.u_rows @ averaged + beta[1] * grid.v_rows @ averaged).tocsr()

def temperature_gradient_matrix(grid, scalar):
    """Cells x velocity matrix of ``w . grad(scalar)`` with cell-averaged velocity.

    Args:
        grid (Grid): Grid.
        scalar (numpy.ndarray): Flat cell values of the advected scalar.

    Returns:
        scipy.sparse.csr_matrix: Coupling operator, linear in the velocity.
    """
    derivative_x, derivative_y = grid.cell_derivatives
    return (sparse.diags(derivative_x @ scalar) @ grid.u_to_cells
            + sparse.diags(derivative_y @ scalar) @ grid.v_to_cells).tocsr()
