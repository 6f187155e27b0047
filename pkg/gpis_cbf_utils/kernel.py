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

import numpy as np

from dataclasses import dataclass, replace
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from gpis_cbf_utils.exceptions import (
    DimensionMismatchException,
    InvalidParameterException,
    SingularPointException
)

SE = 'se'
MATERN32 = 'matern32'
families = [SE, MATERN32]

# Matern t-derivatives divide by the distance to the data point.
singular_tolerance = 1e-8

# Log-space packing cannot represent a zero noise variance.
noise_floor = 1e-10

# Fitting bounds relative to the data, see param_bounds.
spacing_factor = 2.0
min_lengthscale = 1e-4
signal_range = (0.2, 5.0)
noise_range = (1e-6, 1e-2)

sqrt3 = np.sqrt(3.0)


@dataclass(frozen=True, eq=False)
class Hyperparams:
    """
    Kernel hyperparameters.

    lengthscales holds the diagonal of L for the squared exponential
    kernel and a single entry for the Matern kernel.
    """
    lengthscales: np.ndarray
    signal_var: float
    noise_var: float = 0.0

    def __post_init__(self):
        lengthscales = np.atleast_1d(
            np.asarray(self.lengthscales, dtype=float)
        ).ravel()

        if lengthscales.size == 0 or np.any(lengthscales <= 0):
            raise InvalidParameterException(
                'Lengthscales must be positive: {values}'.format(
                    values=lengthscales.tolist()
                )
            )

        if not self.signal_var > 0:
            raise InvalidParameterException(
                'Signal variance must be positive: {value}'.format(
                    value=self.signal_var
                )
            )

        if not self.noise_var >= 0:
            raise InvalidParameterException(
                'Noise variance must be non-negative: {value}'.format(
                    value=self.noise_var
                )
            )

        object.__setattr__(self, 'lengthscales', lengthscales)
        object.__setattr__(self, 'signal_var', float(self.signal_var))
        object.__setattr__(self, 'noise_var', float(self.noise_var))


@dataclass(frozen=True, eq=False)
class KernelSpec:
    family: str
    params: Hyperparams

    def __post_init__(self):
        if self.family not in families:
            raise InvalidParameterException(
                'Unknown kernel family: {family}'.format(family=self.family)
            )

        if self.family == MATERN32 and self.params.lengthscales.size != 1:
            raise InvalidParameterException(
                'Matern kernel takes a single scalar lengthscale'
            )

    @property
    def signal_var(self):
        return self.params.signal_var

    @property
    def noise_var(self):
        return self.params.noise_var

    @property
    def lengthscales(self):
        return self.params.lengthscales

    def with_params(self, **changes):
        return KernelSpec(self.family, replace(self.params, **changes))

    def to_dict(self):
        return {
            'family': self.family,
            'lengthscales': self.lengthscales.tolist(),
            'signal_var': self.signal_var,
            'noise_var': self.noise_var
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            data['family'],
            Hyperparams(
                lengthscales=data['lengthscales'],
                signal_var=data['signal_var'],
                noise_var=data['noise_var']
            )
        )


def make_spec(family, lengthscale, signal_var, noise_var, dim=3):
    """
    Build a kernel spec, broadcasting a scalar SE lengthscale to dim axes.
    """
    lengthscales = np.atleast_1d(np.asarray(lengthscale, dtype=float))
    if family == SE and lengthscales.size == 1:
        lengthscales = np.repeat(lengthscales, dim)

    return KernelSpec(family, Hyperparams(lengthscales, signal_var, noise_var))


def default_spec(family, X, y):
    """
    Data scaled initial hyperparameters.

    Lengthscales are 0.2 of the bounding box diagonal, the signal variance
    is the target variance and the noise is one percent of it.
    """
    X = np.asarray(X, dtype=float)
    diagonal = float(np.linalg.norm(X.max(axis=0) - X.min(axis=0)))
    lengthscale = 0.2 * diagonal if diagonal > 0 else 1.0
    signal_var = float(np.var(y)) or 1.0
    return make_spec(
        family,
        lengthscale,
        signal_var,
        0.01 * signal_var,
        dim=X.shape[1]
    )


def _check_dims(spec, *arrays):
    for array in arrays:
        if spec.family == SE and array.shape[-1] != spec.lengthscales.size:
            raise DimensionMismatchException(
                'Input dimension {dim} does not match {count} '
                'lengthscales'.format(
                    dim=array.shape[-1],
                    count=spec.lengthscales.size
                )
            )


def _as_rows(A):
    return np.atleast_2d(np.asarray(A, dtype=float))


def _scaled_distance(spec, A, B):
    """
    Squared scaled distance for SE, Matern t for Matern.
    """
    if spec.family == SE:
        return cdist(
            A / spec.lengthscales,
            B / spec.lengthscales,
            'sqeuclidean'
        )

    return sqrt3 * cdist(A, B) / spec.lengthscales[0]


def _from_distance(spec, distance):
    if spec.family == SE:
        return spec.signal_var * np.exp(-0.5 * distance)

    return spec.signal_var * (1.0 + distance) * np.exp(-distance)


def cross_matrix(spec, A, B, add_noise_on_diag=False):
    """
    Covariance between the rows of A and the rows of B.

    The noise variance is added on the diagonal only when requested, which
    requires A and B to be the same set.
    """
    A = _as_rows(A)
    B = _as_rows(B)
    _check_dims(spec, A, B)

    K = _from_distance(spec, _scaled_distance(spec, A, B))

    if add_noise_on_diag:
        if A.shape != B.shape or not np.array_equal(A, B):
            raise DimensionMismatchException(
                'Noise diagonal requires identical input sets'
            )
        K[np.diag_indices_from(K)] += spec.noise_var

    return K


def evaluate(spec, xi, xj, same_index=False):
    """
    Kernel value k(xi, xj), with the noise term iff same_index.
    """
    value = float(cross_matrix(spec, xi, xj)[0, 0])
    if same_index:
        value += spec.noise_var
    return value


def prior_var(spec):
    """
    Noise free k(x, x) of a stationary kernel.
    """
    return spec.signal_var


def grad_matrix(spec, A, xq):
    """
    Rows are the gradients of k(a_i, .) at xq, shape (n, d).
    """
    A = _as_rows(A)
    xq = np.asarray(xq, dtype=float).ravel()
    _check_dims(spec, A, xq[None, :])

    if spec.family == SE:
        inv_sq = 1.0 / spec.lengthscales ** 2
        k = cross_matrix(spec, A, xq[None, :])[:, 0]
        return k[:, None] * (A - xq) * inv_sq

    delta, distance = _matern_offsets(A, xq)
    scale = sqrt3 / spec.lengthscales[0]
    t = scale * distance
    dt = scale * delta / distance[:, None]
    return (-spec.signal_var * t * np.exp(-t))[:, None] * dt


def hess_stack(spec, A, xq):
    """
    Hessians of k(a_i, .) at xq, shape (n, d, d).
    """
    A = _as_rows(A)
    xq = np.asarray(xq, dtype=float).ravel()
    _check_dims(spec, A, xq[None, :])
    dim = xq.size
    eye = np.eye(dim)

    if spec.family == SE:
        inv_sq = 1.0 / spec.lengthscales ** 2
        k = cross_matrix(spec, A, xq[None, :])[:, 0]
        scaled = (A - xq) * inv_sq
        outer = scaled[:, :, None] * scaled[:, None, :]
        return k[:, None, None] * (outer - np.diag(inv_sq)[None, :, :])

    delta, distance = _matern_offsets(A, xq)
    scale = sqrt3 / spec.lengthscales[0]
    t = scale * distance
    decay = np.exp(-t)

    dt = scale * delta / distance[:, None]
    outer_delta = delta[:, :, None] * delta[:, None, :]
    d2t = scale * (
        eye[None, :, :] / distance[:, None, None] -
        outer_delta / distance[:, None, None] ** 3
    )
    outer_dt = dt[:, :, None] * dt[:, None, :]

    hess = (
        (-spec.signal_var * t * decay)[:, None, None] * d2t +
        (spec.signal_var * (t - 1.0) * decay)[:, None, None] * outer_dt
    )
    # Symmetric by construction up to round-off in the outer products.
    return 0.5 * (hess + np.swapaxes(hess, 1, 2))


def _matern_offsets(A, xq):
    delta = xq - A
    distance = np.linalg.norm(delta, axis=1)

    if np.any(distance < singular_tolerance):
        raise SingularPointException(
            'Matern derivative requested within {tol} m of a data '
            'point'.format(tol=singular_tolerance)
        )

    return delta, distance


def grad_x(spec, xi, xq):
    """
    Gradient of k(xi, .) at xq.
    """
    return grad_matrix(spec, xi, xq)[0]


def hess_x(spec, xi, xq):
    """
    Hessian of k(xi, .) at xq.
    """
    return hess_stack(spec, xi, xq)[0]


def grad_second_arg(spec, A, B):
    """
    Derivative of k(a_i, b_j) with respect to b_j, shape (n, m, d).

    Uses the closed form that stays finite at coincident points, which
    pseudo-input gradients need since pseudo-inputs start on data points.
    """
    A = _as_rows(A)
    B = _as_rows(B)
    _check_dims(spec, A, B)
    delta = A[:, None, :] - B[None, :, :]

    if spec.family == SE:
        K = cross_matrix(spec, A, B)
        return K[:, :, None] * delta / spec.lengthscales ** 2

    t = _scaled_distance(spec, A, B)
    factor = 3.0 * spec.signal_var / spec.lengthscales[0] ** 2
    return (factor * np.exp(-t))[:, :, None] * delta


def param_gradients(spec, A, B):
    """
    Derivatives of the noise free cross covariance with respect to the
    log lengthscales and the log signal variance, in packing order.
    """
    A = _as_rows(A)
    B = _as_rows(B)
    distance = _scaled_distance(spec, A, B)
    K = _from_distance(spec, distance)

    if spec.family == SE:
        gradients = []
        for axis, lengthscale in enumerate(spec.lengthscales):
            sq = (A[:, None, axis] - B[None, :, axis]) ** 2
            gradients.append(K * sq / lengthscale ** 2)
    else:
        gradients = [spec.signal_var * distance ** 2 * np.exp(-distance)]

    gradients.append(K)
    return gradients


def pack_params(spec):
    """
    Log-space parameter vector: lengthscales, signal and noise variance.
    """
    return np.log(np.concatenate([
        spec.lengthscales,
        [spec.signal_var, max(spec.noise_var, noise_floor)]
    ]))


def unpack_params(spec, theta):
    values = np.exp(np.asarray(theta, dtype=float))
    count = spec.lengthscales.size
    return KernelSpec(
        spec.family,
        Hyperparams(
            lengthscales=values[:count],
            signal_var=values[count],
            noise_var=values[count + 1]
        )
    )


def sample_spacing(X):
    """
    Mean distance from each row of X to its nearest neighbour.
    """
    X = _as_rows(X)
    if len(X) < 2:
        return 0.0
    distances, _ = cKDTree(X).query(X, k=2)
    return float(np.mean(distances[:, 1]))


def param_bounds(spec, X, y):
    """
    Log-space bounds tied to the training data.

    Lengthscales run from spacing_factor times the mean sample spacing to
    the bounding box diagonal. Signal and noise variance are bounded by
    multiples of var(y) from signal_range and noise_range, the noise
    range lying wholly below the signal range.
    """
    X = _as_rows(X)
    scale = float(np.var(y)) or 1.0
    shortest = max(spacing_factor * sample_spacing(X), min_lengthscale)
    diagonal = float(np.linalg.norm(X.max(axis=0) - X.min(axis=0)))
    longest = max(diagonal, 2.0 * shortest)

    signal = (signal_range[0] * scale, signal_range[1] * scale)
    noise = (
        max(noise_range[0] * scale, noise_floor),
        noise_range[1] * scale
    )

    count = spec.lengthscales.size
    return (
        [(np.log(shortest), np.log(longest))] * count +
        [tuple(np.log(signal)), tuple(np.log(noise))]
    )


def clip_spec(spec, bounds):
    """
    Move every log-hyperparameter of spec inside bounds.
    """
    lower = np.array([bound[0] for bound in bounds], dtype=float)
    upper = np.array([bound[1] for bound in bounds], dtype=float)
    return unpack_params(spec, np.clip(pack_params(spec), lower, upper))
