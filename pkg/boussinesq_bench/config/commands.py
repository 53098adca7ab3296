"""Contains :class:`boussinesq_bench.config.commands.Command` base class to define commands, and
predefined commands. Every command returns its exit code: 0 when all of its checks pass.
"""

__author__ = 'Rajarshi Mandal'
__version__ = '1.0'
__all__ = ['DUALITY_SUITES',
           'SEMIGROUP_SUITES',
           'log_file_path',
           'parameter_attribute_dict',
           'parameter_type_dict',
           'Parameter',
           'KeywordParameter',
           'PositionalParameter',
           'ParameterArgumentNames',
           'Command',
           'Run',
           'Study',
           'Duality',
           'Semigroup',
           'Check']

import abc
import dataclasses
import logging
import pathlib
from typing import Any, Callable, Dict, List

import click
import numpy as np

from boussinesq_bench.bench import checks
from boussinesq_bench.bench import scenario
from boussinesq_bench.bench import study
from boussinesq_bench.config import io
from boussinesq_bench.numerics import semigroup
from boussinesq_bench import utils

DUALITY_SUITES = ('duality', 'duality-unsteady', 'pressure-duality')
SEMIGROUP_SUITES = ('semigroup', 'analyticity', 'duhamel')

def log_file_path():
    """Log file of the command line, creating its directory on demand.

    Returns:
        pathlib.Path: Log file, None when the directory cannot be created.
    """
    directory = pathlib.Path('~/.boussinesq_bench').expanduser()
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError:
        logging.warning(f'Unable to create {directory}!')
        return None
    return directory.joinpath('.log')

def parameter_attribute_dict():
    """Helper function to create click commands from command classes.

    Returns:
        dict(type, ParameterArgumentNames): Mapping between
            :class:`boussinesq_bench.config.commands.Parameter` subclasses and
            :class:`boussinesq_bench.config.commands.ParameterArgumentNames` instances. Indicates
            how attributes should be unpacked as arguments for click decorators, when
            constructing click commands.
    """
    k_param_arg_names = ParameterArgumentNames(positional=['name_long', 'name_short'],
                                               keyword={argument : argument for argument in
                                                        KeywordParameter.__dataclass_fields__}) # pylint:disable=no-member

    p_param_arg_names = ParameterArgumentNames(positional=['name'],
                                               keyword={argument : argument for argument in
                                                        PositionalParameter.__dataclass_fields__}) # pylint:disable=no-member

    for param_arg_names in k_param_arg_names, p_param_arg_names:
        for positional in param_arg_names.positional:
            del param_arg_names.keyword[positional]

    return {KeywordParameter : k_param_arg_names, PositionalParameter : p_param_arg_names}

def parameter_type_dict():
    """Helper function to create click commands from command classes.

    Returns:
        dict(type, function): Mapping between
            :class:`boussinesq_bench.config.commands.Parameter` subclasses and click decorators.
    """
    return {KeywordParameter : click.option, PositionalParameter : click.argument}

@dataclasses.dataclass
class Parameter(metaclass=abc.ABCMeta):
    """Parameter base dataclass. Used to create parameters for commands."""

@dataclasses.dataclass
class KeywordParameter(Parameter):
    """Parameter subclass to add a keyword argument or flag to a command.

    Args:
        name_long (str): First declaration passed to click.option, e.g. '--workers'.
        name_short (:obj:`str`, optional): Second declaration, e.g. '-w'. Left out when None.
        **kwargs: The rest of these arguments correspond directly to click.option arguments and are
            passed as keyword arguments.
    """
    name_long: str
    name_short: str = None
    type: click.ParamType = None
    callback: Callable = None
    show_default: bool = False
    is_flag: bool = False
    default: Any = None
    metavar: str = None
    required: bool = False
    help: str = None

@dataclasses.dataclass
class PositionalParameter(Parameter):
    """Parameter subclass to add a positional argument to a command.

    Args:
        name (str): Name of the click argument.
        **kwargs: The rest of these arguments correspond directly to click.argument arguments and
            are passed as keyword arguments.
    """
    name: str
    type: click.ParamType
    callback: Callable = None
    metavar: str = None
    nargs: int = 1
    required: bool = True

@dataclasses.dataclass(frozen=True)
class ParameterArgumentNames:
    """Dataclass to specify how to unpack the attributes of instances of subclasses of
    :class:`boussinesq_bench.config.commands.Parameter`, when constructing click commands.

    Args:
        star (:obj:`list(list(str))`, optional): A list of attribute names to be unpacked using
            extended call syntax, i.e. '*args'.
        double_star (:obj:`list(dict(str, str))`, optional): A list of attribute names to be
            unpacked using extended call syntax, i.e. '**kwargs'.
        keyword (:obj:`dict(str, str)`, optional): A mapping of attribute names to the
            corresponding click keyword argument name.
        positional (:obj:`list(str)`, optional): A list of attribute names to be unpacked as
            positional arguments.
    """
    star: List[str] = dataclasses.field(default_factory=list)
    double_star: List[str] = dataclasses.field(default_factory=list)
    keyword: Dict[str, str] = dataclasses.field(default_factory=dict)
    positional: List[str] = dataclasses.field(default_factory=list)

def _parse_levels(ctx, param, value): # pylint:disable=unused-argument
    if value is None:
        return None
    try:
        levels = tuple(int(level) for level in value.split(',') if level.strip())
    except ValueError as error:
        raise click.BadParameter(f'comma separated integers expected, got {value!r}') from error
    if len(levels) < 3:
        raise click.BadParameter('≥3 levels required')
    return levels

def _echo_results(results):
    for result in results:
        colour = 'green' if result.passed else 'red'
        verdict = 'passed' if result.passed else 'FAILED'
        click.secho(f'{result.name:<18} {verdict:<7} {result.value:.4e} '
                    f'(tolerance {result.tolerance:.1e})', fg=colour)

def _exit_code(results):
    return 0 if all(result.passed for result in results) else 1

class Command(utils.RegistryEnabledObject, kind=utils.RegistryKind.COMMAND):
    """Command base class for boussinesq_bench commands. Subclasses must define a __call__ method,
    and the properties help and parameters.

    Attributes:
        help (str): Help message for command.
        parameters (list(Parameter)): List of :class:`boussinesq_bench.config.commands.Parameter`
            detailing parameters of __call__ method.
    """
    _command_registry = {}

    @property
    @abc.abstractmethod
    def parameters(self):
        """list(Parameter): List of :class:`boussinesq_bench.config.commands.Parameter` detailing
        parameters of __call__ method.
        """

    @abc.abstractmethod
    def __call__(self, **kwargs):
        """Calls command.

        Args:
            **kwargs: Arguments provided to command. See
            :attr:`boussinesq_bench.config.commands.Command.parameters` for a list of arguments
            that are provided.

        Returns:
            int: Exit code.
        """

    def __init_subclass__(cls, command_name, **kwargs):
        super().__init_subclass__(kind=cls._flag, **kwargs)
        cls.command_name = command_name
        logging.info(f'Command {cls} found with name {command_name}!')
        cls.retrieve_registry()[command_name] = cls
        logging.debug(f'Found Commands: {cls.retrieve_registry()}.')

    def __repr__(self):
        return f'{type(self).__name__}(command_name=\'{self.command_name}\')'

    @classmethod
    def __subclasshook__(cls, subclass):
        if '__call__' in subclass.__dict__ and hasattr(subclass, 'command_name'):
            return True
        if subclass in cls.retrieve_registry().values():
            return True
        return NotImplemented

    @classmethod
    def retrieve_registry(cls):
        return cls._command_registry

class Run(Command, command_name='run'):
    """Runs scenarios."""
    @property
    def parameters(self):
        return [PositionalParameter(name='configs', nargs=-1, metavar='CONFIG...',
                                    type=click.Path(exists=True, dir_okay=False)),
                KeywordParameter(name_long='--workers', name_short='-w', default=None,
                                 type=click.IntRange(min=1),
                                 help='Worker processes for a batch.')]

    def __call__(self, configs, workers):
        """Runs scenarios through :func:`boussinesq_bench.bench.scenario.run_batch`.

        Args:
            configs (list(str)): Scenario files.
            workers (int): Pool size, one scenario per worker.

        Returns:
            int: 0 when every check of every scenario passes.
        """
        scenarios = [io.read_scenario(config) for config in configs]
        try:
            reports = scenario.run_batch(scenarios, workers)
        except ValueError as error:
            click.secho(f'Unable to run batch! {error}', fg='red', bold=True)
            return 2
        for config, report in zip(configs, reports):
            click.secho(f'{config}:', bold=True)
            _echo_results(report.checks)
            for kind, path in report.artifacts.items():
                click.echo(f'  wrote {kind} to {path}')
        return 0 if all(report.passed for report in reports) else 1

    @classmethod
    def help(cls):
        return """Run scenarios and their check suites.

               CONFIG: Scenario files. Several scenarios run as a batch and need distinct
               output directories.
               """

class Study(Command, command_name='study'):
    """Runs a convergence study."""
    @property
    def parameters(self):
        return [PositionalParameter(name='config', metavar='CONFIG',
                                    type=click.Path(exists=True, dir_okay=False)),
                KeywordParameter(name_long='--levels', name_short='-l', type=str, default=None,
                                 callback=_parse_levels,
                                 metavar='N1,N2,...',
                                 help='Refinement levels, at least 3.'),
                KeywordParameter(name_long='--target', name_short='-t', default=None,
                                 type=click.Choice(scenario.STUDY_TARGETS),
                                 help='Study target, overriding the scenario.')]

    def __call__(self, config, levels, target):
        """Runs :func:`boussinesq_bench.bench.study.convergence_study`.

        Args:
            config (str): Scenario file.
            levels (tuple(int)): Levels; the scenario levels when None.
            target (str): Study target; the scenario target when None.

        Returns:
            int: 0 when the final observed order meets the target order.
        """
        cfg = io.read_scenario(config)
        if target is not None:
            cfg = cfg.replace(target=target)
        table = study.convergence_study(cfg, levels)
        click.secho(f'{table.study} study, target order {table.target_order}:', bold=True)
        for row in table.rows:
            order = '-' if row.order is None else f'{row.order:.3f}'
            dt = '-' if row.dt is None else f'{row.dt:.3e}'
            click.echo(f'  {row.resolution:>5} {dt:>10} {row.error:.4e} {order:>7}')
        click.secho(f'Final order {table.final_order:.3f}: '
                    f'{"passed" if table.passed else "FAILED"}',
                    fg='green' if table.passed else 'red', bold=True)
        if cfg.output is not None:
            directory = pathlib.Path(cfg.output)
            directory.mkdir(parents=True, exist_ok=True)
            io.write_report(directory.joinpath('study.json'),
                            {'config': cfg.as_dict(), 'study': table.as_dict()})
        return 0 if table.passed else 1

    @classmethod
    def help(cls):
        return """Run a convergence study against a manufactured solution.

               CONFIG: Scenario file; its study section selects family and target.
               """

def _suite_command(cfg, suites, name, extra=None):
    results = scenario.run_suites(cfg, suites)
    _echo_results(results)
    if cfg.output is not None:
        directory = pathlib.Path(cfg.output)
        directory.mkdir(parents=True, exist_ok=True)
        report = scenario.SolveReport(cfg, results).as_dict()
        if extra:
            report.update(extra)
        io.write_report(directory.joinpath(f'{name}.json'), report)
    return _exit_code(results)

class Duality(Command, command_name='duality'):
    """Runs the duality identities."""
    @property
    def parameters(self):
        return [PositionalParameter(name='config', metavar='CONFIG',
                                    type=click.Path(exists=True, dir_okay=False))]

    def __call__(self, config):
        """Runs the steady, unsteady and pressure duality checks on a scenario.

        Args:
            config (str): Scenario file.

        Returns:
            int: Exit code.
        """
        return _suite_command(io.read_scenario(config), DUALITY_SUITES, 'duality')

    @classmethod
    def help(cls):
        return """Check the transposition identities of the steady, unsteady and pressure
               problems.

               CONFIG: Scenario file.
               """

class Semigroup(Command, command_name='semigroup'):
    """Runs the semigroup checks."""
    @property
    def parameters(self):
        return [PositionalParameter(name='config', metavar='CONFIG',
                                    type=click.Path(exists=True, dir_okay=False))]

    def __call__(self, config):
        """Prints the spectrum of the dense generator and runs the semigroup calculus,
        analyticity and Duhamel checks.

        Args:
            config (str): Scenario file.

        Returns:
            int: Exit code.
        """
        cfg = io.read_scenario(config)
        context = scenario.build_context(cfg)
        operator = semigroup.assemble_coupled_operator(context.dense_grid(), context.params)
        spectrum = semigroup.spectrum_report(operator)
        real = spectrum.eigenvalues.real
        summary = {'dimension': operator.dimension,
                   'lambda0': operator.lambda0,
                   'max_real_eigenvalue': float(real.max()),
                   'min_real_eigenvalue': float(real.min()),
                   'condition': spectrum.condition,
                   'stability_margin': spectrum.stability_margin,
                   'mapping_error': spectrum.mapping_error}
        click.secho(f'Generator of dimension {operator.dimension} on {context.dense_grid()}:',
                    bold=True)
        for key, value in summary.items():
            click.echo(f'  {key:<20} {float(value):.4e}')
        return _suite_command(cfg, SEMIGROUP_SUITES, 'semigroup', {'spectrum': summary})

    @classmethod
    def help(cls):
        return """Summarize the spectrum of the coupled generator and check the semigroup law,
               fractional powers, analyticity and the Duhamel formula.

               CONFIG: Scenario file.
               """

class Check(Command, command_name='check'):
    """Checks a checkpoint."""
    @property
    def parameters(self):
        return [PositionalParameter(name='checkpoint', metavar='CHECKPOINT',
                                    type=click.Path(exists=True, dir_okay=False)),
                KeywordParameter(name_long='--lx', default=1.0, type=float, show_default=True,
                                 help='Domain width of the run.'),
                KeywordParameter(name_long='--ly', default=1.0, type=float, show_default=True,
                                 help='Domain height of the run.'),
                KeywordParameter(name_long='--energy/--no-energy', default=False, is_flag=True,
                                 help='Require nonincreasing energy, for unforced runs with '
                                      'homogeneous data.')]

    def __call__(self, checkpoint, lx, ly, energy):
        """Checks the stored fields: finite values, divergence, mean-free pressure and optionally
        energy decay.

        Args:
            checkpoint (str): Checkpoint file.
            lx (float): Domain width.
            ly (float): Domain height.
            energy (bool): Also check energy decay.

        Returns:
            int: Exit code.
        """
        stored = io.read_checkpoint(checkpoint, lx, ly)
        click.secho(f'{stored.steps + 1} states on {stored.grid}, dt={stored.dt:.3e}:', bold=True)
        tolerance = checks.default_tolerances()['divergence']
        finite = stored.finite()
        ratio = stored.divergence_ratio()
        mean = max(stored.pressure_means(), default=0.0)
        results = [checks.CheckResult('finite', finite, 0.0 if finite else float('inf'), 0.0),
                   checks.CheckResult('divergence', bool(ratio <= tolerance), ratio, tolerance),
                   checks.CheckResult('pressure-mean', bool(mean <= tolerance), mean, tolerance)]
        if energy:
            energies = np.array(stored.energies())
            increase = float(np.max(np.diff(energies), initial=0.0) / max(energies[0], 1e-300))
            tolerance = checks.default_tolerances()['energy']
            results.append(checks.CheckResult('energy', bool(increase <= tolerance), increase,
                                              tolerance))
        _echo_results(results)
        return _exit_code(results)

    @classmethod
    def help(cls):
        return """Check a checkpoint written by a run.

               CHECKPOINT: Checkpoint file. The file stores cell counts only; pass the domain
               size of non-unit domains.
               """
