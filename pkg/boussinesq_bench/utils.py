"""Contains miscellaneous utilities."""

__author__ = 'Rajarshi Mandal'
__version__ = '1.0'
__all__ = ['init_log',
           'random_generator',
           'RegistryEnabledObject',
           'RegistryKind']

import abc
import enum
import importlib
import logging
import zlib

import numpy as np

def init_log(level=logging.INFO, log_file=None):
    """Ensure the log is at the requested level.

    Args:
        level (int): Log level.
        log_file (:obj:`pathlib.Path`, optional): Log to a file instead of stderr.
    """
    importlib.reload(logging)
    if log_file is None:
        logging.basicConfig(level=level)
    else:
        with open(log_file, 'w'):
            pass
        logging.basicConfig(level=level, filename=log_file)
    logging.info('Initialized log!')

def random_generator(seed, *keys):
    """Seeded generator for one named stream of random data.

    Keys are mixed into the seed sequence, so that the same (seed, keys) always reproduces the
    same samples and distinct streams never share samples.
    >>> a = random_generator(0, 'velocity', 8).standard_normal(3)
    >>> b = random_generator(0, 'velocity', 8).standard_normal(3)
    >>> bool((a == b).all())
    True

    Args:
        seed (int): Scenario seed.
        *keys: Stream identifiers, e.g. a purpose string and the grid size.

    Returns:
        numpy.random.Generator: Generator for the stream.
    """
    entropy = [int(seed)]
    for key in keys:
        if isinstance(key, str):
            entropy.append(zlib.crc32(key.encode()))
        else:
            entropy.append(int(key))
    return np.random.default_rng(np.random.SeedSequence(entropy))

class RegistryKind(enum.Enum):
    COMMAND = enum.auto()
    CHECK = enum.auto()
    FAMILY = enum.auto()

class RegistryEnabledObject(metaclass=abc.ABCMeta):
    """Base class for registry classes."""
    def __init__(self, **kwargs):
        logging.debug((f'{type(self).__name__} passed keyword arguments '
                       f'\'{", ".join(f"{name}={value}" for name, value in kwargs.items())}\'.'))

    @abc.abstractmethod
    def __init_subclass__(cls, kind, **kwargs):
        cls._flag = kind
        super().__init_subclass__(**kwargs)

    @classmethod
    @abc.abstractmethod
    def __subclasshook__(cls, subclass):
        pass

    @classmethod
    @abc.abstractmethod
    def retrieve_registry(cls):
        """Get the registry of this class.

        Returns:
            dict(str, type): Registry of subclasses
        """

    @classmethod
    @abc.abstractmethod
    def help(cls):
        """Get a help message, used by the command line.

        Returns:
            str: Help message.
        """
