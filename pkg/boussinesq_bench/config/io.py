"""Reads and writes scenario files, reports, diagnostics and checkpoints."""

__author__ = 'Rajarshi Mandal'
__version__ = '1.0'
__all__ = ['CHECKPOINT_MAGIC',
           'CHECKPOINT_VERSION',
           'grid_parameters',
           'time_parameters',
           'physics_parameters',
           'boundary_parameters',
           'initial_parameters',
           'solver_parameters',
           'checks_parameters',
           'study_parameters',
           'run_parameters',
           'parameter_type_dict',
           'parse_config',
           'emit_config',
           'read_scenario',
           'write_scenario',
           'write_report',
           'read_report',
           'write_diagnostics',
           'read_diagnostics',
           'Checkpoint',
           'write_checkpoint',
           'read_checkpoint']

import configparser
import csv
import dataclasses
import io
import json
import logging
import pathlib
import re
import struct
from typing import List, Optional, Tuple

import numpy as np

from boussinesq_bench.numerics import evolve
from boussinesq_bench.numerics import mesh
from boussinesq_bench import errors

CHECKPOINT_MAGIC = b'BSPL'
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct('<4sIIIId')

_SECTION_LINE = re.compile(r'^\s*\[(?P<section>[^\]]+)\]')
_OPTION_LINE = re.compile(r'^(?P<key>[^\s=:#;\[][^=:]*?)\s*[=:]')

def grid_parameters():
    """Returns:
        dict(str, type): Option types of the grid section.
    """
    return {'nx' : int,
            'ny' : int,
            'lx' : float,
            'ly' : float,
            'closure' : str}

def time_parameters():
    return {'dt' : float,
            't_final' : float}

def physics_parameters():
    return {'nu' : float,
            'mu' : float,
            'beta' : Tuple[float, float],
            'lambda0' : Optional[float]}

def boundary_parameters():
    return {'generator' : str,
            'amplitude' : float}

def initial_parameters():
    return {'generator' : str,
            'amplitude' : float}

def solver_parameters():
    return {'kind' : str,
            'advection' : bool,
            'pressure_scheme' : str}

def checks_parameters():
    return {'suites' : Tuple[str, ...],
            'trials' : int}

def study_parameters():
    return {'family' : str,
            'target' : str,
            'levels' : Tuple[int, ...]}

def run_parameters():
    return {'seed' : int,
            'output' : Optional[str]}

def parameter_type_dict():
    """Helper function to read scenario files.

    Returns:
        dict(str, function): Mapping between section names and functions that return
            dictionaries indicating the types of the options of that section. The tolerances
            section takes any check name with a float value and is not listed.
    """
    return {'grid' : grid_parameters,
            'time' : time_parameters,
            'physics' : physics_parameters,
            'boundary' : boundary_parameters,
            'initial' : initial_parameters,
            'solver' : solver_parameters,
            'checks' : checks_parameters,
            'study' : study_parameters,
            'run' : run_parameters}

def _names(text):
    return tuple(name.strip() for name in text.split(',') if name.strip())

def _float_pair(text):
    values = tuple(float(value) for value in _names(text))
    if len(values) != 2:
        raise ValueError(f'two comma separated numbers expected, got {len(values)}')
    return values

def _auto_float(text):
    return None if text.strip().lower() == 'auto' else float(text)

def _optional_str(text):
    return text.strip() or None

def _type_name(option_type):
    return {bool : 'boolean', int : 'integer', float : 'number', str : 'string',
            Tuple[float, float] : 'two comma separated numbers',
            Tuple[int, ...] : 'comma separated integers',
            Tuple[str, ...] : 'comma separated names',
            Optional[float] : '\'auto\' or a number',
            Optional[str] : 'string'}[option_type]

def _option_lines(text):
    """Map (section, key) and section headers to 1-based line numbers."""
    lines = {}
    section = None
    for number, line in enumerate(text.splitlines(), start=1):
        header = _SECTION_LINE.match(line)
        if header is not None:
            section = header.group('section').strip()
            lines.setdefault((section, None), number)
            continue
        option = _OPTION_LINE.match(line)
        if option is not None and section is not None:
            lines.setdefault((section, option.group('key').strip().lower()), number)
    return lines

def _parser_error(error):
    if isinstance(error, configparser.MissingSectionHeaderError):
        return errors.ConfigError('key outside of any section', line=error.lineno)
    if isinstance(error, configparser.ParsingError):
        line, content = error.errors[0]
        return errors.ConfigError(f'cannot parse {content}', line=line)
    if isinstance(error, configparser.DuplicateOptionError):
        return errors.ConfigError(f'{error.section}.{error.option}: duplicate key',
                                  key=f'{error.section}.{error.option}', line=error.lineno)
    if isinstance(error, configparser.DuplicateSectionError):
        return errors.ConfigError(f'{error.section}: duplicate section', key=error.section,
                                  line=error.lineno)
    return errors.ConfigError(str(error))

def parse_config(text):
    """Parse and validate scenario text.

    Sections are ``[name]`` headers, options are ``key = value`` lines and ``#`` starts a
    comment. Missing options take the defaults of
    :class:`boussinesq_bench.bench.scenario.ScenarioConfig`; ``[grid] nx`` is required.

    Args:
        text (str): Scenario text.

    Raises:
        ConfigError: The first problem found, naming the key and its 1-based line.

    Returns:
        bench.scenario.ScenarioConfig: Validated scenario.
    """
    from boussinesq_bench.bench import scenario # pylint:disable=import-outside-toplevel

    lines = _option_lines(text)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=('#',),
                                       default_section='\x00defaults')
    try:
        parser.read_string(text)
    except configparser.Error as error:
        raise _parser_error(error) from error

    type_getters = {bool : parser.getboolean, float : parser.getfloat, int : parser.getint,
                    Tuple[float, float] : lambda section, key: _float_pair(parser[section][key]),
                    Tuple[int, ...] : lambda section, key: tuple(
                        int(level) for level in _names(parser[section][key])),
                    Tuple[str, ...] : lambda section, key: _names(parser[section][key]),
                    Optional[float] : lambda section, key: _auto_float(parser[section][key]),
                    Optional[str] : lambda section, key: _optional_str(parser[section][key])}
    fields_by_key = {location : field for field, location in scenario.FIELD_KEYS.items()}
    fields, tolerances = {}, {}
    for section in parser.sections():
        if section != 'tolerances' and section not in parameter_type_dict():
            raise errors.ConfigError(f'{section}: unknown section', key=section,
                                     line=lines.get((section, None)))
        parameters = ({} if section == 'tolerances' else parameter_type_dict()[section]())
        for key in parser.options(section):
            line = lines.get((section, key))
            if section != 'tolerances' and key not in parameters:
                raise errors.ConfigError(f'{section}.{key}: unknown key, use one of '
                                         f'{", ".join(parameters)}', key=f'{section}.{key}',
                                         line=line)
            option_type = parameters.get(key, float)
            try:
                value = type_getters.setdefault(option_type, parser.get)(section, key)
            except ValueError as error:
                raise errors.ConfigError(f'{section}.{key}: expected {_type_name(option_type)}, '
                                         f'got {parser[section][key]!r}',
                                         key=f'{section}.{key}', line=line) from error
            if section == 'tolerances':
                tolerances[key] = value
            else:
                fields[fields_by_key[(section, key)]] = value

    if 'nx' not in fields:
        raise errors.ConfigError('grid.nx: missing required key', key='grid.nx',
                                 line=lines.get(('grid', None)))
    try:
        cfg = scenario.ScenarioConfig(**fields, tolerances=tolerances)
    except errors.ConfigError as error:
        section, _, key = error.key.partition('.')
        raise errors.ConfigError(str(error), key=error.key,
                                 line=lines.get((section, key))) from error
    logging.debug(f'Parsed scenario {cfg}.')
    return cfg

def _format(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, tuple):
        return ', '.join(_format(item) for item in value)
    if isinstance(value, float):
        return repr(float(value))
    return str(value)

def emit_config(cfg):
    """Canonical scenario text; ``parse_config(emit_config(cfg)) == cfg``.

    Args:
        cfg (bench.scenario.ScenarioConfig): Scenario.

    Returns:
        str: Scenario text with every option written out.
    """
    from boussinesq_bench.bench import scenario # pylint:disable=import-outside-toplevel

    parser = configparser.ConfigParser(interpolation=None)
    for section in parameter_type_dict():
        parser.add_section(section)
    for field, (section, key) in scenario.FIELD_KEYS.items():
        value = getattr(cfg, field)
        if value is None:
            if field == 'output':
                continue
            value = 'auto'
        parser[section][key] = _format(value)
    if cfg.tolerances:
        parser.add_section('tolerances')
        for name, value in sorted(cfg.tolerances.items()):
            parser['tolerances'][name] = _format(value)
    stream = io.StringIO()
    parser.write(stream)
    return stream.getvalue()

def read_scenario(filename):
    """Reads and validates a scenario file.

    Args:
        filename (str): Filename of the scenario file.

    Raises:
        ConfigError: Invalid scenario.

    Returns:
        bench.scenario.ScenarioConfig: Scenario.
    """
    text = pathlib.Path(filename).read_text(encoding='utf-8')
    logging.info(f'Read scenario file \'{filename}\'.')
    return parse_config(text)

def write_scenario(filename, cfg):
    pathlib.Path(filename).write_text(emit_config(cfg), encoding='utf-8')
    logging.info(f'Wrote scenario file \'{filename}\'.')

def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, pathlib.Path):
        return str(value)
    raise TypeError(f'Object of type {type(value).__name__} is not JSON serializable')

def write_report(filename, report):
    """Writes a JSON report.

    Args:
        filename (str): Report filename.
        report (dict): Report, see :meth:`bench.scenario.SolveReport.as_dict`.
    """
    with open(filename, 'w', encoding='utf-8') as report_file:
        json.dump(report, report_file, indent=2, default=_json_default)
        report_file.write('\n')
    logging.info(f'Wrote report \'{filename}\'.')

def read_report(filename):
    with open(filename, encoding='utf-8') as report_file:
        return json.load(report_file)

def write_diagnostics(filename, rows):
    """Writes diagnostics rows as CSV with the columns of ``evolve.DIAGNOSTIC_COLUMNS``.

    Floats are written with ``repr`` so equal runs give equal bytes.

    Args:
        filename (str): CSV filename.
        rows (list(dict)): Diagnostics rows.
    """
    with open(filename, 'w', newline='', encoding='utf-8') as csv_file:
        writer = csv.writer(csv_file, lineterminator='\n')
        writer.writerow(evolve.DIAGNOSTIC_COLUMNS)
        for row in rows:
            writer.writerow([int(row[column]) if column == 'step' else repr(float(row[column]))
                             for column in evolve.DIAGNOSTIC_COLUMNS])
    logging.info(f'Wrote {len(rows)} diagnostics rows to \'{filename}\'.')

def read_diagnostics(filename):
    """Returns:
        list(dict): Rows with an integer step and float columns.
    """
    with open(filename, newline='', encoding='utf-8') as csv_file:
        return [{column : int(value) if column == 'step' else float(value)
                 for column, value in row.items()} for row in csv.DictReader(csv_file)]

@dataclasses.dataclass(frozen=True)
class Checkpoint:
    """Fields of a run read back from a checkpoint.

    Args:
        grid (mesh.Grid): Grid; the file stores only the cell counts.
        dt (float): Time step.
        velocity (list(mesh.VectorField)): Velocity per step.
        temperature (list(mesh.ScalarField)): Temperature per step.
        pressure (list(mesh.ScalarField)): Pressure per step.
        version (int): Format version of the file.
    """
    grid: mesh.Grid
    dt: float
    velocity: List[mesh.VectorField]
    temperature: List[mesh.ScalarField]
    pressure: List[mesh.ScalarField]
    version: int = CHECKPOINT_VERSION

    @property
    def steps(self):
        return len(self.velocity) - 1

    @property
    def times(self):
        return [m * self.dt for m in range(self.steps + 1)]

    def state(self, m):
        return self.velocity[m], self.temperature[m]

    def divergence_ratio(self):
        """float: Largest ratio of divergence norm to velocity norm over the stored steps."""
        grid = self.grid
        ratios = []
        for velocity in self.velocity:
            scale = mesh.norms(velocity).l2
            if scale > 0:
                ratios.append(float(np.sqrt(grid.cell_area)
                                    * np.linalg.norm(grid.divergence_matrix @ velocity.flat))
                              / scale)
        return max(ratios, default=0.0)

    def energies(self):
        """list(float): ``(|u|^2 + |theta|^2) / 2`` per step."""
        return [0.5 * (mesh.inner_product(u, u) + mesh.inner_product(theta, theta))
                for u, theta in zip(self.velocity, self.temperature)]

    def pressure_means(self):
        return [abs(p.mean()) for p in self.pressure]

    def finite(self):
        return all(np.isfinite(u.flat).all() and np.isfinite(theta.values).all()
                   and np.isfinite(p.values).all()
                   for u, theta, p in zip(self.velocity, self.temperature, self.pressure))

def write_checkpoint(filename, trajectory):
    """Writes the header and one (u, v, theta, p) block per time, little-endian f64, row-major.

    Args:
        filename (str): Checkpoint filename.
        trajectory (evolve.Trajectory): Run; a missing pressure is written as zero.
    """
    grid = trajectory.grid
    with open(filename, 'wb') as checkpoint_file:
        checkpoint_file.write(_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, grid.nx, grid.ny,
                                           trajectory.steps, float(trajectory.dt)))
        for m in range(trajectory.steps + 1):
            velocity, temperature = trajectory.state(m)
            pressure = (trajectory.pressure[m] if m < len(trajectory.pressure)
                        else mesh.ScalarField.zero(grid))
            for block in velocity.u, velocity.v, temperature.values, pressure.values:
                checkpoint_file.write(np.ascontiguousarray(block, dtype='<f8').tobytes())
    logging.info(f'Wrote checkpoint \'{filename}\' with {trajectory.steps + 1} states on {grid}.')

def read_checkpoint(filename, lx=1.0, ly=1.0, closure='linear'):
    """Reads a checkpoint.

    Args:
        filename (str): Checkpoint filename.
        lx (:obj:`float`, optional): Domain width of the run.
        ly (:obj:`float`, optional): Domain height of the run.
        closure (:obj:`str`, optional): Wall closure of the run.

    Raises:
        CheckpointError: Bad magic, unknown version or truncated file.

    Returns:
        Checkpoint: Stored fields.
    """
    data = pathlib.Path(filename).read_bytes()
    if len(data) < _HEADER.size:
        raise errors.CheckpointError(f'\'{filename}\' is too short for a checkpoint header!')
    magic, version, nx, ny, steps, dt = _HEADER.unpack_from(data)
    if magic != CHECKPOINT_MAGIC:
        raise errors.CheckpointError(f'\'{filename}\' has magic {magic!r}, expected '
                                     f'{CHECKPOINT_MAGIC!r}!')
    if version != CHECKPOINT_VERSION:
        raise errors.CheckpointError(f'\'{filename}\' has unknown version {version}!')
    grid = mesh.Grid(nx, ny, lx, ly, closure)
    shapes = [(nx + 1, ny), (nx, ny + 1), (nx, ny), (nx, ny)]
    block_size = sum(rows * columns for rows, columns in shapes)
    expected = _HEADER.size + 8 * block_size * (steps + 1)
    if len(data) != expected:
        raise errors.CheckpointError(f'\'{filename}\' holds {len(data)} bytes, expected '
                                     f'{expected} for {steps + 1} states on {grid}!')
    values = np.frombuffer(data, dtype='<f8', offset=_HEADER.size).reshape(steps + 1, block_size)
    velocity, temperature, pressure = [], [], []
    for block in values:
        parts, start = [], 0
        for shape in shapes:
            size = shape[0] * shape[1]
            parts.append(block[start:start + size].reshape(shape).astype(float))
            start += size
        velocity.append(mesh.VectorField(grid, parts[0], parts[1]))
        temperature.append(mesh.ScalarField(grid, parts[2]))
        pressure.append(mesh.ScalarField(grid, parts[3]))
    logging.info(f'Read checkpoint \'{filename}\' with {steps + 1} states on {grid}.')
    return Checkpoint(grid, dt, velocity, temperature, pressure, version)
