"""Manufactured solutions. A family prescribes a stream function, a temperature and a pressure in
closed form; sources and boundary data are derived symbolically so that the exact fields solve
the chosen regime of the equations.
"""

__author__ = 'Rajarshi Mandal'
__version__ = '1.0'
__all__ = ['REGIMES',
           'ManufacturedFamily',
           'Trig',
           'PolynomialBump',
           'TimeModulatedTrig',
           'ManufacturedSolution',
           'family_names',
           'mms_generate']

import abc
import logging

import numpy as np
import sympy as sym

from boussinesq_bench.numerics import mesh
from boussinesq_bench import utils

REGIMES = ('steady', 'stokes', 'navier-stokes')

class ManufacturedFamily(utils.RegistryEnabledObject, kind=utils.RegistryKind.FAMILY):
    """Base class of manufactured families. Subclasses define :meth:`fields` and are registered
    under their ``family_name``.

    Args:
        lx (:obj:`float`, optional): Domain width.
        ly (:obj:`float`, optional): Domain height.
    """
    _family_registry = {}

    def __init__(self, lx=1.0, ly=1.0, **kwargs):
        super().__init__(**kwargs)
        self.lx = lx
        self.ly = ly

    def __init_subclass__(cls, family_name, **kwargs):
        super().__init_subclass__(kind=cls._flag, **kwargs)
        cls.family_name = family_name
        logging.info(f'Manufactured family {cls} found with name {family_name}!')
        cls.retrieve_registry()[family_name] = cls
        logging.debug(f'Found manufactured families: {cls.retrieve_registry()}.')

    def __repr__(self):
        return f'{type(self).__name__}(lx={self.lx}, ly={self.ly})'

    @classmethod
    def __subclasshook__(cls, subclass):
        if subclass in cls.retrieve_registry().values():
            return True
        return NotImplemented

    @classmethod
    def retrieve_registry(cls):
        return cls._family_registry

    @classmethod
    def help(cls):
        return cls.__doc__

    @property
    def time_dependent(self):
        return False

    @abc.abstractmethod
    def fields(self, x, y, t):
        """Closed-form fields.

        Args:
            x (sympy.Symbol): Abscissa.
            y (sympy.Symbol): Ordinate.
            t (sympy.Symbol): Time.

        Returns:
            tuple(sympy.Expr, sympy.Expr, sympy.Expr): Stream function, temperature and a
                pressure with zero mean over the domain.
        """

class Trig(ManufacturedFamily, family_name='trig'):
    """Trigonometric fields with nonzero normal and tangential velocity on every wall."""
    def fields(self, x, y, t):
        X, Y = sym.pi * x / self.lx, sym.pi * y / self.ly
        psi = sym.sin(X) * sym.cos(Y) + sym.cos(2 * X) * sym.sin(Y) / 4
        theta = sym.cos(X) * sym.sin(Y)
        pressure = sym.cos(X) * sym.cos(Y)
        return psi, theta, pressure

class PolynomialBump(ManufacturedFamily, family_name='polynomial-bump'):
    """Polynomial bump with zero normal velocity, nonzero wall shear and a linear temperature
    ramp across the domain."""
    def fields(self, x, y, t):
        X, Y = x / self.lx, y / self.ly
        psi = 16 * X ** 2 * (1 - X) ** 2 * Y * (1 - Y) ** 2
        theta = 16 * X ** 2 * (1 - X) ** 2 * Y ** 2 * (1 - Y) ** 2 + X
        pressure = (2 * X - 1) * (2 * Y - 1)
        return psi, theta, pressure

class TimeModulatedTrig(Trig, family_name='time-modulated-trig'):
    """Trigonometric fields scaled by ``1 + sin(2 pi t) / 2``."""
    @property
    def time_dependent(self):
        return True

    def fields(self, x, y, t):
        modulation = 1 + sym.sin(2 * sym.pi * t) / 2
        return tuple(modulation * field for field in super().fields(x, y, t))

def family_names():
    """Returns:
        list(str): Registered family names.
    """
    return list(ManufacturedFamily.retrieve_registry())

class ManufacturedSolution:
    """Exact fields of a family with the sources that make them solve one regime.

    ``steady`` is the shifted steady system around rest, ``lambda0 z - nu lap z + grad p -
    beta theta = f1`` and ``lambda0 theta - mu lap theta = f2``. ``stokes`` replaces the shift by
    the time derivative, ``navier-stokes`` adds the advection terms.

    Args:
        family (ManufacturedFamily): Family.
        grid (mesh.Grid): Grid the fields are sampled on.
        params (:obj:`mesh.PhysicalParams`, optional): Parameters. Defaults to unit viscosities.
        regime (:obj:`str`, optional): One of ``REGIMES``.
        amplitude (:obj:`float`, optional): Factor applied to the closed-form fields before the
            sources are derived.
    """
    def __init__(self, family, grid, params=None, regime='steady', amplitude=1.0):
        if regime not in REGIMES:
            raise ValueError(f'Unknown regime {regime}, use one of {REGIMES}!')
        params = mesh.PhysicalParams() if params is None else params
        self._family = family
        self._grid = grid
        self._params = params
        self._regime = regime
        x, y, t = sym.symbols('x y t', real=True)
        psi, theta, pressure = (amplitude * field for field in family.fields(x, y, t))
        u, v = sym.diff(psi, y), -sym.diff(psi, x)

        def laplacian(field):
            return sym.diff(field, x, 2) + sym.diff(field, y, 2)

        beta_x, beta_y = (sym.Float(b) for b in params.beta)
        nu, mu = sym.Float(params.nu), sym.Float(params.mu)
        f1u = -nu * laplacian(u) + sym.diff(pressure, x) - beta_x * theta
        f1v = -nu * laplacian(v) + sym.diff(pressure, y) - beta_y * theta
        f2 = -mu * laplacian(theta)
        if regime == 'steady':
            shift = sym.Float(params.lambda0)
            f1u, f1v, f2 = f1u + shift * u, f1v + shift * v, f2 + shift * theta
        else:
            f1u, f1v, f2 = f1u + sym.diff(u, t), f1v + sym.diff(v, t), f2 + sym.diff(theta, t)
        if regime == 'navier-stokes':
            f1u += u * sym.diff(u, x) + v * sym.diff(u, y)
            f1v += u * sym.diff(v, x) + v * sym.diff(v, y)
            f2 += u * sym.diff(theta, x) + v * sym.diff(theta, y)
        self.expressions = {'psi': psi, 'u': u, 'v': v, 'theta': theta, 'p': pressure,
                            'theta_x': sym.diff(theta, x), 'theta_y': sym.diff(theta, y),
                            'f1u': f1u, 'f1v': f1v, 'f2': f2}
        self._divergence = sym.simplify(sym.diff(u, x) + sym.diff(v, y))
        self._functions = {name: sym.lambdify((x, y, t), expression, 'numpy')
                           for name, expression in self.expressions.items()}
        logging.info(f'Manufactured {family.family_name} solution for the {regime} regime on '
                     f'{grid}.')

    @property
    def family(self):
        return self._family

    @property
    def grid(self):
        return self._grid

    @property
    def params(self):
        return self._params

    @property
    def regime(self):
        return self._regime

    @property
    def divergence(self):
        """sympy.Expr: Simplified divergence of the exact velocity; zero by construction."""
        return self._divergence

    def _at(self, name, t):
        function = self._functions[name]
        return lambda x, y: function(x, y, t)

    def velocity(self, t=0.0):
        """Edge averages of the exact velocity, discretely divergence-free."""
        return mesh.VectorField.from_stream_function(self._grid, self._at('psi', t))

    def temperature(self, t=0.0):
        return mesh.ScalarField.from_function(self._grid, self._at('theta', t))

    def pressure(self, t=0.0):
        """Exact pressure at cell centers with the discrete mean removed."""
        return mesh.ScalarField.from_function(self._grid, self._at('p', t)).mean_free()

    def sources(self, t=0.0):
        """Returns:
            tuple(mesh.VectorField, mesh.ScalarField): Momentum and temperature sources.
        """
        return (mesh.VectorField.from_function(self._grid, self._at('f1u', t),
                                               self._at('f1v', t)),
                mesh.ScalarField.from_function(self._grid, self._at('f2', t)))

    def forcing(self, t):
        """Sources in the form time integrators take."""
        return self.sources(t)

    def trace(self, t=0.0):
        """Velocity data with normal components from the stream function, zero net flux."""
        u, v = self._at('u', t), self._at('v', t)
        return mesh.BoundaryTrace.from_stream_function(self._grid, self._at('psi', t),
                                                       lambda x, y: (u(x, y), v(x, y)), t)

    def flux(self, t=0.0):
        theta_x, theta_y = self._at('theta_x', t), self._at('theta_y', t)
        return mesh.BoundaryFlux.from_gradient(self._grid,
                                               lambda x, y: (theta_x(x, y), theta_y(x, y)), t)

    def boundary(self):
        """Returns:
            mesh.BoundaryData: Exact data as functions of time.
        """
        return mesh.BoundaryData(self.trace, self.flux)

    def initial(self):
        return self.velocity(0.0), self.temperature(0.0)

def mms_generate(family, grid, params=None, regime='steady', amplitude=1.0):
    """Manufactured solution of a registered family on a grid.

    Args:
        family (str): Family name, see :func:`family_names`.
        grid (mesh.Grid): Grid.
        params (:obj:`mesh.PhysicalParams`, optional): Parameters.
        regime (:obj:`str`, optional): One of ``REGIMES``.
        amplitude (:obj:`float`, optional): Field amplitude.

    Raises:
        ValueError: Unknown family or regime.

    Returns:
        ManufacturedSolution: Exact fields, sources and data.
    """
    registry = ManufacturedFamily.retrieve_registry()
    if family not in registry:
        raise ValueError(f'Unknown manufactured family {family}, use one of '
                         f'{sorted(registry)}!')
    return ManufacturedSolution(registry[family](grid.lx, grid.ly), grid, params, regime,
                                amplitude)
