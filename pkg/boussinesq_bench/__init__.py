"""Desk-scale numerical workbench for the 2D Boussinesq system with nonhomogeneous boundary
data."""

__author__ = 'Rajarshi Mandal'
__version__ = '1.0'
