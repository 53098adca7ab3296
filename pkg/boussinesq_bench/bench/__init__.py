"""Manufactured solutions, convergence studies, invariant checks and scenario execution."""

__author__ = 'Rajarshi Mandal'
__version__ = '1.0'
