"""Exceptions raised by the workbench. Everything derives from :class:`BenchError` so that the
command line can report library failures without a traceback."""

__author__ = 'Rajarshi Mandal'
__version__ = '1.0'
__all__ = ['BenchError',
           'GridError',
           'CompatibilityError',
           'SolverError',
           'ConsistencyError',
           'StepSizeError',
           'DivergenceError',
           'AssemblyError',
           'ConfigError',
           'CheckpointError']


class BenchError(Exception):
    """Base class for workbench errors."""

class GridError(BenchError, ValueError):
    """Invalid grid, or fields living on different grids."""

class CompatibilityError(BenchError):
    """Boundary or source data violate a solvability condition.

    Args:
        message (str): Description of the violated condition.
        defect (float): Size of the violation, e.g. the net boundary flux.
    """
    def __init__(self, message, defect):
        super().__init__(f'{message} (defect={defect:.3e})')
        self.defect = defect

class SolverError(BenchError):
    """A factorization failed or a solve missed its residual tolerance."""

class ConsistencyError(BenchError):
    """Two solution paths that must agree did not."""

class StepSizeError(BenchError):
    """The explicit part of a time step violates the CFL restriction.

    Args:
        message (str): Description of the violation.
        suggested_dt (float): Largest step that satisfies the restriction.
    """
    def __init__(self, message, suggested_dt):
        super().__init__(f'{message} (suggested dt={suggested_dt:.3e})')
        self.suggested_dt = suggested_dt

class DivergenceError(BenchError):
    """A time integration blew up."""

class AssemblyError(BenchError):
    """A dense operator could not be assembled."""

class ConfigError(BenchError):
    """A scenario file could not be parsed.

    Args:
        message (str): Description of the problem.
        key (:obj:`str`, optional): Offending key.
        line (:obj:`int`, optional): 1-based line number of the offending key.
    """
    def __init__(self, message, key=None, line=None):
        location = '' if line is None else f' (line {line})'
        super().__init__(f'{message}{location}')
        self.key = key
        self.line = line

class CheckpointError(BenchError):
    """A checkpoint file is truncated or has an unknown magic or version."""
