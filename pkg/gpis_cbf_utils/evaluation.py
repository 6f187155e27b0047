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

import csv
import logging
import time

from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np
import yaml

from scipy.spatial import cKDTree

from gpis_cbf_utils.cbf import CbfConfig, eval_h_batch, evaluate
from gpis_cbf_utils.exceptions import (
    DimensionMismatchException,
    EmptySetException,
    InvalidParameterException,
    ModelFormatException
)
from gpis_cbf_utils.utils import write_atomic

logger = logging.getLogger('gpis_cbf_utils')

field_format_version = 1

bench_row = namedtuple(
    'bench_row', [
        'model',
        'operation',
        'basis',
        'queries',
        'mean_ms',
        'median_ms'
    ]
)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """
    Values on a regular grid, flattened with x varying fastest.
    """
    origin: np.ndarray
    spacing: np.ndarray
    dims: tuple
    values: np.ndarray

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=float).ravel()
        spacing = np.asarray(self.spacing, dtype=float).ravel()
        dims = tuple(int(count) for count in self.dims)
        values = np.asarray(self.values, dtype=float).ravel()

        if origin.size != 3 or spacing.size != 3 or len(dims) != 3:
            raise DimensionMismatchException(
                'Field origin, spacing and dims need three entries'
            )

        if np.any(spacing <= 0):
            raise InvalidParameterException(
                'Field spacing must be positive: {spacing}'.format(
                    spacing=spacing.tolist()
                )
            )

        if values.size != int(np.prod(dims)):
            raise DimensionMismatchException(
                'Field has {count} values for dims {dims}'.format(
                    count=values.size,
                    dims=list(dims)
                )
            )

        object.__setattr__(self, 'origin', origin)
        object.__setattr__(self, 'spacing', spacing)
        object.__setattr__(self, 'dims', dims)
        object.__setattr__(self, 'values', values)

    def axes(self):
        return [
            self.origin[axis] + self.spacing[axis] * np.arange(count)
            for axis, count in enumerate(self.dims)
        ]

    def grid(self):
        """
        Values as an array indexed [z, y, x].
        """
        nx, ny, nz = self.dims
        return self.values.reshape(nz, ny, nx)

    def points(self):
        return grid_points(*self.axes())

    def save(self, path):
        header = {
            'format_version': field_format_version,
            'origin': self.origin.tolist(),
            'spacing': self.spacing.tolist(),
            'dims': list(self.dims)
        }
        text = yaml.safe_dump(header, default_flow_style=None)
        text += '---\n'
        text += ''.join(repr(float(value)) + '\n' for value in self.values)
        write_atomic(path, text)

    @classmethod
    def load(cls, path):
        with open(path) as field_file:
            text = field_file.read()

        try:
            header_text, body = text.split('---\n', 1)
            header = yaml.safe_load(header_text)
            values = [float(line) for line in body.split()]
            if header['format_version'] != field_format_version:
                raise ModelFormatException(
                    'Unsupported field format version: {version}'.format(
                        version=header['format_version']
                    )
                )
            return cls(
                header['origin'],
                header['spacing'],
                header['dims'],
                values
            )
        except (KeyError, TypeError, ValueError, yaml.YAMLError):
            raise ModelFormatException(
                'Malformed field file: {path}'.format(path=path)
            )


def grid_points(xs, ys, zs):
    zz, yy, xx = np.meshgrid(zs, ys, xs, indexing='ij')
    return np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])


def _as_point_set(points):
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    return points


def _nearest_distances(P1, P2):
    """
    Distance from every point of P1 to its nearest neighbour in P2.
    """
    P1 = _as_point_set(P1)
    P2 = _as_point_set(P2)

    if len(P1) == 0 or len(P2) == 0:
        raise EmptySetException('Chamfer distance needs non-empty sets')

    if P1.shape[1] != P2.shape[1]:
        raise DimensionMismatchException(
            'Point sets have dimensions {a} and {b}'.format(
                a=P1.shape[1],
                b=P2.shape[1]
            )
        )

    distances, _ = cKDTree(P2).query(P1)
    return distances


def chamfer(P1, P2):
    """
    Sum of nearest neighbour distances in both directions.
    """
    forward = float(np.sum(_nearest_distances(P1, P2)))
    backward = float(np.sum(_nearest_distances(P2, P1)))
    return forward + backward


def chamfer_normalized(P1, P2):
    """
    Mean nearest neighbour distance in both directions, summed.
    """
    forward = float(np.mean(_nearest_distances(P1, P2)))
    backward = float(np.mean(_nearest_distances(P2, P1)))
    return forward + backward


def sample_field(model, cfg, bounds, dims):
    """
    h on a regular grid spanning bounds = (lower, upper).
    """
    lower, upper = (np.asarray(bound, dtype=float) for bound in bounds)
    dims = tuple(int(count) for count in dims)

    if len(dims) != 3 or min(dims) < 2:
        raise InvalidParameterException(
            'Field needs at least 2 nodes per axis, got {dims}'.format(
                dims=list(dims)
            )
        )

    if np.any(upper <= lower):
        raise InvalidParameterException('Field bounds must be increasing')

    spacing = (upper - lower) / (np.array(dims) - 1)
    axes = [
        lower[axis] + spacing[axis] * np.arange(count)
        for axis, count in enumerate(dims)
    ]
    values = eval_h_batch(model, cfg, grid_points(*axes))

    logger.debug(
        'Sampled field on {count} nodes'.format(count=values.size)
    )
    return ScalarField(lower, spacing, dims, values)


def extract_isosurface(field, level=0.0):
    """
    Linear interpolation points on every grid edge crossing level.

    Returns a point soup, not a mesh.
    """
    grid = field.grid() - level
    xs, ys, zs = field.axes()
    nodes = np.stack(np.meshgrid(zs, ys, xs, indexing='ij'), axis=-1)[
        ..., ::-1
    ]
    crossings = []

    # Grid axis 2 is x, 1 is y, 0 is z.
    for axis in (2, 1, 0):
        head = [slice(None)] * 3
        tail = [slice(None)] * 3
        head[axis] = slice(None, -1)
        tail[axis] = slice(1, None)

        a = grid[tuple(head)]
        b = grid[tuple(tail)]
        straddle = (a < 0) != (b < 0)
        if not np.any(straddle):
            continue

        a = a[straddle]
        b = b[straddle]
        start = nodes[tuple(head)][straddle]
        end = nodes[tuple(tail)][straddle]
        fraction = (a / (a - b))[:, None]
        crossings.append(start + fraction * (end - start))

    if not crossings:
        return np.empty((0, 3))

    points = np.unique(np.vstack(crossings), axis=0)
    logger.debug(
        'Extracted {count} isosurface points'.format(count=len(points))
    )
    return points


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)

    def mean_ms(self, model, operation):
        for row in self.rows:
            if row.model == model and row.operation == operation:
                return row.mean_ms
        return None

    def speedup(self, operation):
        """
        Full over sparse mean per query time.
        """
        full = self.mean_ms('full', operation)
        sparse = self.mean_ms('sparse', operation)
        if not full or not sparse:
            return None
        return full / sparse

    def to_csv(self, path):
        lines = [','.join(bench_row._fields)]
        for row in self.rows:
            lines.append(','.join([
                row.model,
                row.operation,
                str(row.basis),
                str(row.queries),
                repr(float(row.mean_ms)),
                repr(float(row.median_ms))
            ]))
        write_atomic(path, '\n'.join(lines) + '\n')

    @classmethod
    def from_csv(cls, path):
        rows = []
        with open(path, newline='') as csv_file:
            for record in csv.DictReader(csv_file):
                rows.append(bench_row(
                    model=record['model'],
                    operation=record['operation'],
                    basis=int(record['basis']),
                    queries=int(record['queries']),
                    mean_ms=float(record['mean_ms']),
                    median_ms=float(record['median_ms'])
                ))
        return cls(rows)


def _time_queries(operation, queries, repeats):
    per_query = np.zeros(len(queries))
    for _ in range(repeats):
        for index, xq in enumerate(queries):
            start = time.perf_counter()
            operation(xq)
            per_query[index] += time.perf_counter() - start
    return 1000.0 * per_query / repeats


def bench(model_pair, queries, repeats=3, cfg=None):
    """
    Per query timing of h and its gradient for a full and a sparse model.
    """
    cfg = cfg or CbfConfig()
    queries = np.atleast_2d(np.asarray(queries, dtype=float))

    if repeats < 1 or len(queries) == 0:
        raise InvalidParameterException(
            'Benchmark needs at least one query and one repeat'
        )

    operations = {
        'eval_h': lambda model: (
            lambda xq: evaluate(model, cfg, xq, with_grad=False)
        ),
        'grad_h': lambda model: (
            lambda xq: evaluate(model, cfg, xq)
        )
    }

    report = BenchReport()
    for label, model in zip(('full', 'sparse'), model_pair):
        for name, make in operations.items():
            times = _time_queries(make(model), queries, repeats)
            report.rows.append(bench_row(
                model=label,
                operation=name,
                basis=len(model.basis),
                queries=len(queries),
                mean_ms=float(np.mean(times)),
                median_ms=float(np.median(times))
            ))

    full, sparse = model_pair
    if len(sparse.basis) < len(full.basis) / 2:
        speedup = report.speedup('eval_h')
        if speedup is not None and speedup < 1:
            logger.warning(
                'Sparse queries were not faster than full queries '
                '(speedup {speedup:.2f})'.format(speedup=speedup)
            )

    return report
