"""Discrete calculus, projections, steady and unsteady solvers of the Boussinesq system."""

__author__ = 'Rajarshi Mandal'
__version__ = '1.0'
