# Copyright (c) 2026 gpis-cbf-utils developers, All rights reserved.
#
# This file is part of gpis-cbf-utils. gpis-cbf-utils provides an api
# and command line utilities for Gaussian process implicit surfaces
# used as control barrier functions.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

import click
import json
import logging
import os
import sys
import tempfile
import yaml

from collections import ChainMap, namedtuple
from contextlib import contextmanager, suppress

from gpis_cbf_utils.exceptions import GPISCBFInputException

default_config = os.path.expanduser('~/.config/gpis_cbf_utils/config.yaml')
output_dir_env = 'GPIS_CBF_OUTPUT_DIR'
logger = logging.getLogger('gpis_cbf_utils')

defaults = {
    'config': default_config,
    'log_level': logging.INFO,
    'no_color': False,
    'output_dir': None,
    'seed': 0,
    'kernel': 'se',
    'iters': 15,
    'margin': 4.0,
    'offset': None,
    'resolution': 48,
    'repeats': 3,
    'queries': 200,
    'output': 'text'
}

gpis_cbf_config = namedtuple(
    'gpis_cbf_config',
    sorted(defaults)
)

input_errors = (GPISCBFInputException, FileNotFoundError, yaml.YAMLError)


def get_config(cli_context):
    """
    Process gpis-cbf-utils config.

    Use ChainMap to build config values based on
    command line args, config and defaults.
    """
    config_path = cli_context.get('config') or default_config

    config_values = {}
    try:
        with open(config_path) as config_file:
            config_values = yaml.safe_load(config_file) or {}
    except FileNotFoundError:
        pass
    except (OSError, yaml.YAMLError) as error:
        logger.warning(
            'Ignoring unreadable config file {path}: {error}'.format(
                path=config_path,
                error=error
            )
        )

    if not isinstance(config_values, dict):
        logger.warning(
            'Ignoring config file {path}, it does not hold a mapping'.format(
                path=config_path
            )
        )
        config_values = {}

    config_values = {
        key: value for key, value in config_values.items() if key in defaults
    }
    cli_values = {
        key: value for key, value in cli_context.items()
        if value is not None and key in defaults
    }
    data = dict(ChainMap(cli_values, config_values, defaults))
    data['output_dir'] = os.path.expanduser(
        data['output_dir'] or default_output_dir()
    )

    return gpis_cbf_config(**data)


def default_output_dir():
    return os.environ.get(
        output_dir_env,
        os.path.expanduser('~/gpis_cbf_utils/output')
    )


def echo_style(message, no_color, fg='green'):
    if no_color:
        click.echo(message)
    else:
        click.secho(message, fg=fg)


@contextmanager
def handle_errors(log_level, no_color):
    """
    Context manager to handle exceptions and echo error msg.

    Input errors exit with 2, numeric and runtime failures with 3.
    """
    try:
        yield
    except Exception as error:
        if log_level == logging.DEBUG:
            raise

        echo_style(
            "{}: {}".format(type(error).__name__, error),
            no_color,
            fg='red'
        )
        sys.exit(exit_code_for(error))


def exit_code_for(error):
    if isinstance(error, input_errors):
        return 2
    return getattr(error, 'exit_code', 3)


def style_string(message, no_color, fg='yellow'):
    """
    Add color style to string if no_color is False.
    """
    if no_color:
        return message
    else:
        return click.style(message, fg=fg)


def echo_summary(data, output, no_color):
    """
    Echo a flat mapping as a two column table or as json.
    """
    if output == 'json':
        text = json.dumps(data, indent=2, sort_keys=True)
    else:
        rows = [[key, format_value(value)] for key, value in data.items()]
        text = _get_text_table(rows, ['name', 'value']).rstrip('\n')

    click.echo(style_string(text, no_color, fg='green'))


def format_value(value):
    if isinstance(value, float):
        return '{:.6g}'.format(value)
    return str(value)


def _get_text_table(data, headers, no_headers=False):
    widths = _get_text_column_widths(headers, data)

    table = ''
    if no_headers is False:
        table += _get_headersline(headers, widths) + "\n"
        table += _get_separatorline(widths) + "\n"
    for item in data:
        table += _get_dataline(item, widths)
        table += "\n"
    return table


def _get_headersline(headers, widths):
    """
    Function to get the headers line for text output formatting
    """
    return " ".join(
        _padright(widths[idx], value) for idx, value in enumerate(headers)
    )


def _get_separatorline(widths):
    """
    Function to get the separator line for text output formatting
    """
    return " ".join("-" * width for width in widths)


def _get_dataline(data, widths):
    return " ".join(
        _padright(widths[idx], str(value)) for idx, value in enumerate(data)
    )


def _padright(width, s):
    fmt = "{0:<%ds}" % width
    return fmt.format(s)


def _get_text_column_widths(headers, values):
    """
    Function to get the column with required for text formatting
    """
    widths = [len(str(header)) for header in headers]

    for value in values:
        for idx, val in enumerate(value):
            if len(str(val)) > widths[idx]:
                widths[idx] = len(str(val))
    return widths


def get_logger(log_level):
    """
    Return the console logger at provided log level.

    The console handler is only attached once.
    """
    logger.setLevel(log_level)

    console_handler = None
    for handler in logger.handlers:
        if getattr(handler, 'gpis_cbf_console', False):
            console_handler = handler

    if console_handler is None:
        console_handler = logging.StreamHandler()
        console_handler.gpis_cbf_console = True
        console_handler.setFormatter(logging.Formatter('%(message)s'))
        logger.addHandler(console_handler)
    else:
        console_handler.stream = sys.stderr

    console_handler.setLevel(log_level)
    return logger


def process_shared_options(context_obj, kwargs):
    """
    Update context with values for shared options.
    """
    context_obj['config'] = kwargs['config']
    context_obj['no_color'] = kwargs['no_color']
    context_obj['log_level'] = kwargs['log_level']
    context_obj['output_dir'] = kwargs['output_dir']
    context_obj['seed'] = kwargs['seed']


def write_atomic(path, text):
    """
    Write text to path through a temporary file and a rename.
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    handle, temp_path = tempfile.mkstemp(
        dir=directory,
        prefix='.' + os.path.basename(path) + '.'
    )

    try:
        with os.fdopen(handle, 'w', newline='') as temp_file:
            temp_file.write(text)
        os.replace(temp_path, path)
    except BaseException:
        with suppress(OSError):
            os.remove(temp_path)
        raise


def write_yaml(path, data):
    write_atomic(path, yaml.safe_dump(data, default_flow_style=None))


def read_yaml(path):
    with open(path) as yaml_file:
        return yaml.safe_load(yaml_file)


def write_effective_config(output_dir, config):
    """
    Record the effective configuration next to the outputs it produced.
    """
    values = {
        key: value for key, value in config._asdict().items()
        if key != 'config'
    }
    write_yaml(os.path.join(output_dir, 'config.yaml'), values)
