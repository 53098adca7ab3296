"""Defines interfaces with scenario files and the command line."""

__author__ = 'Rajarshi Mandal'
__version__ = '1.0'
