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
import os

import numpy as np

from dataclasses import dataclass

from gpis_cbf_utils.exceptions import (
    CloudParseException,
    DegenerateCloudException,
    InvalidCountsException,
    InvalidParameterException,
    MissingNormalsException
)
from gpis_cbf_utils.utils import write_atomic

logger = logging.getLogger('gpis_cbf_utils')

formats = ['csv', 'obj', 'ply']
normal_tolerance = 1e-6


@dataclass(frozen=True, eq=False)
class PointCloud:
    """
    Surface points with unit normals, both stored as (n, 3) arrays.
    """
    points: np.ndarray
    normals: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        normals = np.asarray(self.normals, dtype=float).reshape(-1, 3)

        if len(points) != len(normals):
            raise CloudParseException(
                'Cloud has {points} points but {normals} normals'.format(
                    points=len(points),
                    normals=len(normals)
                )
            )

        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'normals', normals)

    def __len__(self):
        return len(self.points)

    @property
    def bbox(self):
        return self.points.min(axis=0), self.points.max(axis=0)

    @property
    def diagonal(self):
        lower, upper = self.bbox
        return float(np.linalg.norm(upper - lower))

    def to_csv(self, path):
        lines = ['px,py,pz,nx,ny,nz']
        for point, normal in zip(self.points, self.normals):
            lines.append(
                ','.join(repr(float(value)) for value in (*point, *normal))
            )
        write_atomic(path, '\n'.join(lines) + '\n')


@dataclass(frozen=True, eq=False)
class SafetyDataset:
    """
    Labeled safety samples.

    Rows are ordered on-surface (label 0), exterior (+1), interior (-1).
    """
    X: np.ndarray
    y: np.ndarray
    n0: int
    n_plus: int
    n_minus: int

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()

        if X.ndim != 2 or len(X) != len(y):
            raise InvalidCountsException(
                'Dataset inputs and targets do not align'
            )

        if len(y) != self.n0 + self.n_plus + self.n_minus:
            raise InvalidCountsException(
                'Dataset size {size} does not match counts '
                '{n0}+{n_plus}+{n_minus}'.format(
                    size=len(y),
                    n0=self.n0,
                    n_plus=self.n_plus,
                    n_minus=self.n_minus
                )
            )

        expected = safety_labels(self.n0, self.n_plus, self.n_minus)
        if not np.array_equal(y, expected):
            raise InvalidCountsException(
                'Dataset targets are not ordered 0, +1, -1'
            )

        object.__setattr__(self, 'X', X)
        object.__setattr__(self, 'y', y)

    def __len__(self):
        return len(self.y)

    @property
    def dim(self):
        return self.X.shape[1]

    def to_csv(self, path):
        lines = ['x,y,z,label']
        for row, label in zip(self.X, self.y):
            lines.append(
                ','.join(repr(float(value)) for value in row) +
                ',{label}'.format(label=int(label))
            )
        write_atomic(path, '\n'.join(lines) + '\n')

    @classmethod
    def from_csv(cls, path):
        rows = _read_csv_rows(path, 4)
        X = np.array([row[:3] for row in rows])
        y = np.array([row[3] for row in rows])
        return cls(
            X=X,
            y=y,
            n0=int(np.sum(y == 0)),
            n_plus=int(np.sum(y == 1)),
            n_minus=int(np.sum(y == -1))
        )


def safety_labels(n0, n_plus, n_minus):
    return np.concatenate([
        np.zeros(n0),
        np.ones(n_plus),
        -np.ones(n_minus)
    ])


def _normalize(normals):
    norms = np.linalg.norm(normals, axis=1)
    if np.any(norms < 1e-12):
        raise CloudParseException('Zero length surface normal in cloud')
    return normals / norms[:, None]


def _parse_floats(fields, count, path, line_number):
    try:
        values = [float(value) for value in fields[:count]]
    except ValueError:
        raise CloudParseException(
            'Malformed record in {path} line {line}'.format(
                path=path,
                line=line_number
            )
        )

    if len(values) != count:
        raise CloudParseException(
            'Expected {count} values in {path} line {line}'.format(
                count=count,
                path=path,
                line=line_number
            )
        )

    return values


def _read_csv_rows(path, columns):
    """
    Read numeric CSV rows, skipping an optional header line.
    """
    rows = []
    with open(path, newline='') as csv_file:
        for line_number, fields in enumerate(csv.reader(csv_file), 1):
            fields = [field.strip() for field in fields if field.strip()]
            if not fields:
                continue

            if line_number == 1 and not rows:
                try:
                    float(fields[0])
                except ValueError:
                    # Header
                    continue

            rows.append(_parse_floats(fields, columns, path, line_number))

    if not rows:
        raise CloudParseException(
            'No records found in {path}'.format(path=path)
        )

    return rows


def _load_csv(path):
    rows = _read_csv_rows(path, 6)
    data = np.array(rows)
    return data[:, :3], data[:, 3:]


def _load_obj(path):
    vertices = []
    normals = []
    pairs = {}

    with open(path) as obj_file:
        for line_number, line in enumerate(obj_file, 1):
            fields = line.split()
            if not fields or fields[0].startswith('#'):
                continue

            if fields[0] == 'v':
                vertices.append(
                    _parse_floats(fields[1:], 3, path, line_number)
                )
            elif fields[0] == 'vn':
                normals.append(
                    _parse_floats(fields[1:], 3, path, line_number)
                )
            elif fields[0] == 'f':
                for corner in fields[1:]:
                    refs = corner.split('/')
                    if len(refs) == 3 and refs[2]:
                        try:
                            pairs.setdefault(
                                int(refs[0]) - 1,
                                int(refs[2]) - 1
                            )
                        except ValueError:
                            raise CloudParseException(
                                'Malformed face in {path} line {line}'.format(
                                    path=path,
                                    line=line_number
                                )
                            )

    if not vertices:
        raise CloudParseException(
            'No vertex records found in {path}'.format(path=path)
        )

    if not normals:
        raise MissingNormalsException(
            'No vertex normals (vn) found in {path}'.format(path=path)
        )

    if not pairs:
        # Without face references vertices and normals pair by index.
        pairs = {index: index for index in range(len(vertices))}

    keep = sorted(
        index for index, normal_index in pairs.items()
        if 0 <= index < len(vertices) and 0 <= normal_index < len(normals)
    )

    rejected = len(vertices) - len(keep)
    if rejected:
        logger.warning(
            'Rejected {count} vertices without normals in {path}'.format(
                count=rejected,
                path=path
            )
        )

    if not keep:
        raise MissingNormalsException(
            'No vertex in {path} has a normal'.format(path=path)
        )

    points = np.array([vertices[index] for index in keep])
    cloud_normals = np.array([normals[pairs[index]] for index in keep])
    return points, cloud_normals


def _load_ply(path):
    with open(path) as ply_file:
        lines = ply_file.read().splitlines()

    if not lines or lines[0].strip() != 'ply':
        raise CloudParseException(
            'Missing ply magic in {path}'.format(path=path)
        )

    vertex_count = None
    properties = []
    in_vertex = False
    header_end = None

    for line_number, line in enumerate(lines[1:], 1):
        fields = line.split()
        if not fields:
            continue

        if fields[0] == 'format' and fields[1] != 'ascii':
            raise CloudParseException(
                'Only ascii ply is supported, {path} is {fmt}'.format(
                    path=path,
                    fmt=fields[1]
                )
            )
        elif fields[0] == 'element':
            in_vertex = fields[1] == 'vertex'
            if in_vertex:
                vertex_count = int(fields[2])
        elif fields[0] == 'property' and in_vertex:
            properties.append(fields[-1])
        elif fields[0] == 'end_header':
            header_end = line_number
            break

    if header_end is None or vertex_count is None:
        raise CloudParseException(
            'Incomplete ply header in {path}'.format(path=path)
        )

    if not {'x', 'y', 'z'}.issubset(properties):
        raise CloudParseException(
            'Ply vertex has no x, y, z in {path}'.format(path=path)
        )

    if not {'nx', 'ny', 'nz'}.issubset(properties):
        raise MissingNormalsException(
            'Ply vertex has no nx, ny, nz in {path}'.format(path=path)
        )

    body = lines[header_end + 1:header_end + 1 + vertex_count]
    if len(body) != vertex_count or vertex_count == 0:
        raise CloudParseException(
            'Expected {count} vertices in {path}'.format(
                count=vertex_count,
                path=path
            )
        )

    columns = [
        properties.index(name) for name in ('x', 'y', 'z', 'nx', 'ny', 'nz')
    ]
    data = []
    for offset, line in enumerate(body):
        values = _parse_floats(
            line.split(),
            len(properties),
            path,
            header_end + 2 + offset
        )
        data.append([values[column] for column in columns])

    data = np.array(data)
    return data[:, :3], data[:, 3:]


def load_cloud(path, fmt=None):
    """
    Load a point cloud with surface normals from csv, obj or ply.

    The format is taken from the file extension unless given.
    """
    fmt = (fmt or os.path.splitext(path)[1].lstrip('.')).lower()

    if fmt not in formats:
        raise CloudParseException(
            'Unsupported cloud format: {fmt}'.format(fmt=fmt)
        )

    loader = {'csv': _load_csv, 'obj': _load_obj, 'ply': _load_ply}[fmt]
    points, normals = loader(path)

    logger.debug(
        'Loaded {count} points from {path}'.format(
            count=len(points),
            path=path
        )
    )
    return PointCloud(points, _normalize(normals))


def load_points(path):
    """
    Load the first three columns of a csv file as a point set.
    """
    return np.array(_read_csv_rows(path, 3))


def _voxel_indices(points, size):
    keys = np.floor((points - points.min(axis=0)) / size).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return np.sort(first)


def downsample(cloud, target_n, seed=0, mode='random'):
    """
    Reduce a cloud to min(target_n, len(cloud)) of its own points.

    Random mode draws uniformly without replacement. Voxel mode keeps the
    first point of each occupied voxel, with the voxel size chosen so at
    least target_n voxels are occupied, then thins uniformly.
    """
    if target_n < 1:
        raise InvalidParameterException(
            'Downsample target must be at least 1, got {target}'.format(
                target=target_n
            )
        )

    if target_n >= len(cloud):
        return cloud

    candidates = np.arange(len(cloud))

    if mode == 'voxel':
        upper = cloud.diagonal or 1.0
        lower = 0.0
        for _ in range(60):
            size = 0.5 * (lower + upper)
            if len(_voxel_indices(cloud.points, size)) >= target_n:
                lower = size
            else:
                upper = size

        if lower > 0:
            candidates = _voxel_indices(cloud.points, lower)
    elif mode != 'random':
        raise InvalidParameterException(
            'Unknown downsample mode: {mode}'.format(mode=mode)
        )

    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(candidates, size=target_n, replace=False))
    return PointCloud(cloud.points[keep], cloud.normals[keep])


def rescale_to_box(cloud, extents):
    """
    Scale a cloud about its bounding box center to the given extents.

    Normals transform with the inverse scale and are renormalized.
    """
    extents = np.asarray(extents, dtype=float)
    if extents.shape != (3,) or np.any(extents <= 0):
        raise InvalidParameterException(
            'Box extents must be three positive values'
        )

    lower, upper = cloud.bbox
    span = upper - lower
    if np.any(span <= 1e-12 * max(float(span.max()), 1.0)):
        raise DegenerateCloudException(
            'Cloud bounding box has zero extent: {span}'.format(
                span=span.tolist()
            )
        )

    scale = extents / span
    center = 0.5 * (lower + upper)
    points = (cloud.points - center) * scale + center
    normals = _normalize(cloud.normals / scale)
    return PointCloud(points, normals)


def make_safety_samples(
    cloud,
    n0,
    n_plus,
    n_minus,
    offset=None,
    seed=0
):
    """
    Generate labeled on-surface, exterior and interior samples.

    Exterior samples sit offset along the normal of a chosen surface point
    and interior samples are the reflection of the first n_minus of them.
    """
    if not (1 <= n0 <= len(cloud)):
        raise InvalidCountsException(
            'n0 must be in [1, {size}], got {n0}'.format(
                size=len(cloud),
                n0=n0
            )
        )

    if not (0 <= n_plus < n0):
        raise InvalidCountsException(
            'n_plus must be smaller than n0 ({n_plus} >= {n0})'.format(
                n_plus=n_plus,
                n0=n0
            )
        )

    if not (0 <= n_minus <= n_plus):
        raise InvalidCountsException(
            'n_minus must not exceed n_plus ({n_minus} > {n_plus})'.format(
                n_minus=n_minus,
                n_plus=n_plus
            )
        )

    if offset is None:
        offset = 0.05 * cloud.diagonal

    if offset <= 0:
        raise InvalidParameterException(
            'Sample offset must be positive, got {offset}'.format(
                offset=offset
            )
        )

    rng = np.random.default_rng(seed)
    surface = rng.permutation(len(cloud))[:n0]
    exterior = surface[rng.permutation(n0)[:n_plus]]
    interior = exterior[:n_minus]

    X = np.vstack([
        cloud.points[surface],
        cloud.points[exterior] + offset * cloud.normals[exterior],
        cloud.points[interior] - offset * cloud.normals[interior]
    ])

    return SafetyDataset(
        X=X,
        y=safety_labels(n0, n_plus, n_minus),
        n0=n0,
        n_plus=n_plus,
        n_minus=n_minus
    )


def sphere_cloud(radius, n, center=(0.0, 0.0, 0.0)):
    """
    Fibonacci lattice sphere with outward normals.
    """
    index = np.arange(n) + 0.5
    polar = np.arccos(1.0 - 2.0 * index / n)
    azimuth = np.pi * (1.0 + 5 ** 0.5) * index

    normals = np.column_stack([
        np.cos(azimuth) * np.sin(polar),
        np.sin(azimuth) * np.sin(polar),
        np.cos(polar)
    ])
    points = np.asarray(center, dtype=float) + radius * normals
    return PointCloud(points, normals)


def _box_faces(lower, upper, spacing):
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    points = []
    normals = []

    for axis in range(3):
        others = [other for other in range(3) if other != axis]
        grids = [
            np.linspace(
                lower[other],
                upper[other],
                max(2, int(np.ceil((upper[other] - lower[other]) / spacing))
                    + 1)
            )
            for other in others
        ]
        u, v = np.meshgrid(*grids, indexing='ij')

        for side, value in ((-1.0, lower[axis]), (1.0, upper[axis])):
            face = np.empty((u.size, 3))
            face[:, axis] = value
            face[:, others[0]] = u.ravel()
            face[:, others[1]] = v.ravel()

            normal = np.zeros((u.size, 3))
            normal[:, axis] = side
            points.append(face)
            normals.append(normal)

    return np.vstack(points), np.vstack(normals)


def box_cloud(boxes, spacing):
    """
    Sample the outer surface of a union of axis-aligned boxes.

    Each box is a (lower, upper) pair. Samples inside or on another box
    are dropped, as are duplicate samples on shared edges.
    """
    boxes = [
        (np.asarray(lower, dtype=float), np.asarray(upper, dtype=float))
        for lower, upper in boxes
    ]
    points = []
    normals = []

    for index, (lower, upper) in enumerate(boxes):
        face_points, face_normals = _box_faces(lower, upper, spacing)
        keep = np.ones(len(face_points), dtype=bool)

        for other, (o_lower, o_upper) in enumerate(boxes):
            if other == index:
                continue
            inside = np.all(
                (face_points > o_lower - 1e-9) &
                (face_points < o_upper + 1e-9),
                axis=1
            )
            keep &= ~inside

        points.append(face_points[keep])
        normals.append(face_normals[keep])

    points = np.vstack(points)
    normals = np.vstack(normals)
    _, unique = np.unique(np.round(points, 9), axis=0, return_index=True)
    unique = np.sort(unique)
    return PointCloud(points[unique], normals[unique])


chair_proxy_boxes = [
    # Legs
    ((0.00, 0.00, 0.00), (0.04, 0.04, 0.45)),
    ((0.41, 0.00, 0.00), (0.45, 0.04, 0.45)),
    ((0.00, 0.41, 0.00), (0.04, 0.45, 0.45)),
    ((0.41, 0.41, 0.00), (0.45, 0.45, 0.45)),
    # Seat
    ((0.00, 0.00, 0.45), (0.45, 0.45, 0.49)),
    # Backrest posts
    ((0.00, 0.41, 0.49), (0.04, 0.45, 0.80)),
    ((0.41, 0.41, 0.49), (0.45, 0.45, 0.80)),
    # Headrest
    ((0.00, 0.41, 0.80), (0.45, 0.45, 0.90)),
]


def chair_proxy_cloud(spacing=0.02, origin=(0.0, 0.0, 0.0)):
    """
    Box primitive stand-in for a chair: four legs, seat, backrest posts
    and a headrest, roughly 0.45 m x 0.45 m x 0.90 m.
    """
    origin = np.asarray(origin, dtype=float)
    boxes = [
        (origin + np.asarray(lower), origin + np.asarray(upper))
        for lower, upper in chair_proxy_boxes
    ]
    return box_cloud(boxes, spacing)


def save_points(path, points):
    """
    Write a point set as x,y,z csv rows.
    """
    lines = ['x,y,z']
    for point in np.asarray(points, dtype=float).reshape(-1, 3):
        lines.append(','.join(repr(float(value)) for value in point))
    write_atomic(path, '\n'.join(lines) + '\n')
