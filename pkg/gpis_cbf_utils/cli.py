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
import logging
import os

import numpy as np

from gpis_cbf_utils.api import GaussianCBFUtil, load_model
from gpis_cbf_utils.cbf import CbfConfig
from gpis_cbf_utils.evaluation import (
    ScalarField,
    bench as run_bench,
    chamfer as chamfer_distance,
    chamfer_normalized,
    extract_isosurface,
    sample_field
)
from gpis_cbf_utils.kernel import families
from gpis_cbf_utils.pointcloud import load_points, save_points
from gpis_cbf_utils.sim import load_scenario, run_scenario
from gpis_cbf_utils.utils import (
    echo_summary,
    get_config,
    get_logger,
    handle_errors,
    process_shared_options,
    write_effective_config
)

shared_options = [
    click.option(
        '-C',
        '--config',
        type=click.Path(exists=True),
        help='gpis-cbf-utils config file to use. Default: '
             '~/.config/gpis_cbf_utils/config.yaml'
    ),
    click.option(
        '--no-color',
        is_flag=True,
        help='Remove ANSI color and styling from output.'
    ),
    click.option(
        '--debug',
        '--verbose',
        'log_level',
        flag_value=logging.DEBUG,
        help='Display debug level logging to console.'
    ),
    click.option(
        '--quiet',
        'log_level',
        flag_value=logging.WARNING,
        help='Only display warnings and errors.'
    ),
    click.option(
        '--output-dir',
        type=click.Path(file_okay=False),
        help='Directory for output files. Default: $GPIS_CBF_OUTPUT_DIR '
             'or ~/gpis_cbf_utils/output'
    ),
    click.option(
        '--seed',
        type=click.INT,
        help='Seed for every random draw. Default: 0'
    )
]

output_option = click.option(
    '--output',
    type=click.Choice(['text', 'json']),
    help='Summary format. Default: text'
)

cloud_options = [
    click.option(
        '--cloud',
        type=click.Path(exists=True, dir_okay=False),
        required=True,
        help='Point cloud with normals (csv, obj or ascii ply).'
    ),
    click.option(
        '--downsample',
        type=click.IntRange(min=1),
        help='Downsample the cloud to this many points first.'
    ),
    click.option(
        '--downsample-mode',
        type=click.Choice(['random', 'voxel']),
        default='random',
        help='Downsampling strategy. Default: random'
    ),
    click.option(
        '--extents',
        type=click.FLOAT,
        nargs=3,
        default=None,
        help='Rescale the cloud to a box of these extents (m).'
    ),
    click.option(
        '--n0',
        type=click.INT,
        help='On-surface samples. Default: all cloud points'
    ),
    click.option(
        '--nplus',
        'n_plus',
        type=click.INT,
        help='Exterior samples. Default: n0 / 4'
    ),
    click.option(
        '--nminus',
        'n_minus',
        type=click.INT,
        help='Interior samples. Default: nplus'
    ),
    click.option(
        '--offset',
        type=click.FLOAT,
        help='Normal offset of exterior and interior samples (m). '
             'Default: 0.05 of the cloud diagonal'
    )
]


def add_options(options):
    def _add_options(func):
        for option in reversed(options):
            func = option(func)
        return func
    return _add_options


def print_license(ctx, param, value):
    if not value or ctx.resilient_parsing:
        return
    click.echo('GPLv3+')
    ctx.exit()


def _setup(context, kwargs, **values):
    context.obj.update(values)
    process_shared_options(context.obj, kwargs)
    config_data = get_config(context.obj)
    logger = get_logger(config_data.log_level)
    return config_data, logger


def _output_path(config_data, path, name):
    return path or os.path.join(config_data.output_dir, name)


def _cbf_config(config_data):
    return CbfConfig(margin_coeff=config_data.margin)


def _cloud_util(config_data, logger, kwargs, **extra):
    return GaussianCBFUtil(
        cloud_path=kwargs['cloud'],
        downsample_to=kwargs['downsample'],
        downsample_mode=kwargs['downsample_mode'],
        extents=kwargs['extents'] or None,
        n0=kwargs['n0'],
        n_plus=kwargs['n_plus'],
        n_minus=kwargs['n_minus'],
        offset=config_data.offset,
        seed=config_data.seed,
        log_level=config_data.log_level,
        log_callback=logger,
        **extra
    )


@click.group()
@click.version_option()
@click.option(
    '--license',
    is_flag=True,
    callback=print_license,
    expose_value=False,
    is_eager=True,
    help='Show license information.'
)
@click.pass_context
def main(context):
    """
    The command line interface provides Gaussian CBF utilities.

    This includes training implicit surface models from point clouds,
    sampling and comparing their zero level sets, benchmarking queries
    and running closed loop safety filter simulations.
    """
    if context.obj is None:
        context.obj = {}


@click.command()
@add_options(cloud_options)
@click.option(
    '--kernel',
    type=click.Choice(families),
    help='Kernel family. Default: se'
)
@click.option(
    '--sparse-m',
    type=click.INT,
    help='Number of pseudo-inputs. A full GP is trained if omitted.'
)
@click.option(
    '--iters',
    type=click.INT,
    help='Optimizer iteration budget. Default: 15'
)
@click.option(
    '--model-file',
    type=click.Path(dir_okay=False),
    help='Model output file. Default: <output-dir>/model.yaml'
)
@output_option
@add_options(shared_options)
@click.pass_context
def train(context, kernel, sparse_m, iters, model_file, output, **kwargs):
    """
    Train a full or sparse Gaussian CBF model from a point cloud.
    """
    config_data, logger = _setup(
        context,
        kwargs,
        kernel=kernel,
        iters=iters,
        offset=kwargs['offset'],
        output=output
    )

    with handle_errors(config_data.log_level, config_data.no_color):
        util = _cloud_util(
            config_data,
            logger,
            kwargs,
            kernel=config_data.kernel,
            sparse_m=sparse_m,
            iters=config_data.iters,
            margin=config_data.margin
        )
        util.train()

        path = _output_path(config_data, model_file, 'model.yaml')
        util.save_model(path)
        write_effective_config(config_data.output_dir, config_data)

        summary = dict(util.summary._asdict())
        summary['model_file'] = path
        echo_summary(summary, config_data.output, config_data.no_color)


@click.command()
@add_options(cloud_options)
@click.option(
    '--samples-file',
    type=click.Path(dir_okay=False),
    help='Samples output file. Default: <output-dir>/samples.csv'
)
@add_options(shared_options)
@click.pass_context
def samples(context, samples_file, **kwargs):
    """
    Write the labeled safety samples of a point cloud as csv.
    """
    config_data, logger = _setup(context, kwargs, offset=kwargs['offset'])

    with handle_errors(config_data.log_level, config_data.no_color):
        util = _cloud_util(config_data, logger, kwargs)
        path = _output_path(config_data, samples_file, 'samples.csv')
        util.dataset.to_csv(path)
        write_effective_config(config_data.output_dir, config_data)

    logger.info('Safety samples written to {path}'.format(path=path))


@click.command()
@click.option(
    '--model',
    'model_path',
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help='Model file written by train.'
)
@click.option(
    '--lower',
    type=click.FLOAT,
    nargs=3,
    default=None,
    help='Lower grid corner. Default: data bounds padded by 10%'
)
@click.option(
    '--upper',
    type=click.FLOAT,
    nargs=3,
    default=None,
    help='Upper grid corner. Default: data bounds padded by 10%'
)
@click.option(
    '--resolution',
    type=click.IntRange(min=2),
    help='Grid nodes per axis. Default: 48'
)
@click.option(
    '--margin',
    type=click.FLOAT,
    help='Margin coefficient c of h = mu + c var. Default: 4.0'
)
@click.option(
    '--level',
    type=click.FLOAT,
    default=0.0,
    help='Isosurface level. Default: 0'
)
@add_options(shared_options)
@click.pass_context
def field(context, model_path, lower, upper, resolution, margin, level,
          **kwargs):
    """
    Sample h on a grid and extract its zero level set points.
    """
    config_data, logger = _setup(
        context,
        kwargs,
        resolution=resolution,
        margin=margin
    )

    with handle_errors(config_data.log_level, config_data.no_color):
        model = load_model(model_path)

        low, high = model.X.min(axis=0), model.X.max(axis=0)
        pad = 0.1 * (high - low)
        bounds = (
            np.array(lower) if lower else low - pad,
            np.array(upper) if upper else high + pad
        )
        dims = (config_data.resolution,) * 3

        scalar_field = sample_field(
            model,
            _cbf_config(config_data),
            bounds,
            dims
        )
        points = extract_isosurface(scalar_field, level)

        field_path = os.path.join(config_data.output_dir, 'field.txt')
        points_path = os.path.join(config_data.output_dir, 'isosurface.csv')
        scalar_field.save(field_path)
        save_points(points_path, points)
        write_effective_config(config_data.output_dir, config_data)

    logger.info(
        'Field written to {field}, {count} isosurface points written '
        'to {points}'.format(
            field=field_path,
            count=len(points),
            points=points_path
        )
    )


@click.command()
@click.argument('first', type=click.Path(exists=True, dir_okay=False))
@click.argument('second', type=click.Path(exists=True, dir_okay=False))
@output_option
@add_options(shared_options)
@click.pass_context
def chamfer(context, first, second, output, **kwargs):
    """
    Chamfer distance between two point set csv files.

    Both the raw sum and the size normalized value are printed.
    """
    config_data, logger = _setup(context, kwargs, output=output)

    with handle_errors(config_data.log_level, config_data.no_color):
        P1 = load_points(first)
        P2 = load_points(second)
        echo_summary(
            {
                'first_points': len(P1),
                'second_points': len(P2),
                'chamfer': chamfer_distance(P1, P2),
                'chamfer_normalized': chamfer_normalized(P1, P2)
            },
            config_data.output,
            config_data.no_color
        )


@click.command()
@click.option(
    '--full',
    'full_path',
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help='Full GP model file.'
)
@click.option(
    '--sparse',
    'sparse_path',
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help='Sparse GP model file trained on the same data.'
)
@click.option(
    '--queries',
    type=click.IntRange(min=1),
    help='Number of random query points. Default: 200'
)
@click.option(
    '--repeats',
    type=click.IntRange(min=1),
    help='Timing repeats per query. Default: 3'
)
@output_option
@add_options(shared_options)
@click.pass_context
def bench(context, full_path, sparse_path, queries, repeats, output,
          **kwargs):
    """
    Compare per query inference time of a full and a sparse model.
    """
    config_data, logger = _setup(
        context,
        kwargs,
        queries=queries,
        repeats=repeats,
        output=output
    )

    with handle_errors(config_data.log_level, config_data.no_color):
        full_model = load_model(full_path)
        sparse_model = load_model(sparse_path)

        low = full_model.X.min(axis=0)
        high = full_model.X.max(axis=0)
        rng = np.random.default_rng(config_data.seed)
        points = low + (high - low) * rng.random(
            (config_data.queries, full_model.X.shape[1])
        )

        report = run_bench(
            (full_model, sparse_model),
            points,
            repeats=config_data.repeats,
            cfg=_cbf_config(config_data)
        )
        path = os.path.join(config_data.output_dir, 'bench.csv')
        report.to_csv(path)
        write_effective_config(config_data.output_dir, config_data)

        summary = {}
        for row in report.rows:
            key = '{model}_{operation}'.format(
                model=row.model,
                operation=row.operation
            )
            summary[key + '_mean_ms'] = row.mean_ms
            summary[key + '_median_ms'] = row.median_ms
        summary['eval_h_speedup'] = report.speedup('eval_h')
        summary['grad_h_speedup'] = report.speedup('grad_h')
        echo_summary(summary, config_data.output, config_data.no_color)


@click.command()
@click.argument('scenario_path', type=click.Path(exists=True, dir_okay=False))
@click.option(
    '--unfiltered',
    is_flag=True,
    help='Apply the nominal control without the safety filter.'
)
@click.option(
    '--no-obstacle',
    is_flag=True,
    help='Remove the obstacle (quadrotor scenarios only).'
)
@output_option
@add_options(shared_options)
@click.pass_context
def sim(context, scenario_path, unfiltered, no_obstacle, output, **kwargs):
    """
    Run a closed loop simulation scenario and export its time series.
    """
    config_data, logger = _setup(context, kwargs, output=output)

    with handle_errors(config_data.log_level, config_data.no_color):
        scenario = load_scenario(scenario_path)
        run = run_scenario(
            scenario,
            unfiltered=unfiltered,
            with_obstacle=not no_obstacle,
            seed=kwargs['seed'],
            log_callback=logger
        )
        run.to_csv(config_data.output_dir)
        write_effective_config(config_data.output_dir, config_data)
        echo_summary(run.summary(), config_data.output, config_data.no_color)


main.add_command(train)
main.add_command(samples)
main.add_command(field)
main.add_command(chamfer)
main.add_command(bench)
main.add_command(sim)
