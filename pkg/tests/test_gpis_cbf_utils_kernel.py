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
import pytest

from gpis_cbf_utils.exceptions import (
    DimensionMismatchException,
    InvalidParameterException,
    SingularPointException
)
from gpis_cbf_utils.kernel import (
    KernelSpec,
    MATERN32,
    SE,
    clip_spec,
    cross_matrix,
    default_spec,
    evaluate,
    grad_matrix,
    grad_second_arg,
    grad_x,
    hess_stack,
    hess_x,
    make_spec,
    pack_params,
    param_bounds,
    param_gradients,
    prior_var,
    sample_spacing,
    unpack_params
)

rng = np.random.default_rng(11)
A = rng.uniform(-1.0, 1.0, size=(6, 3))
B = rng.uniform(-1.0, 1.0, size=(4, 3))
xq = np.array([0.3, -0.2, 0.45])

corner_y = np.array([0.0, 0.0, 1.0, -1.0])
corner_X = np.array([
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0]
])

specs = [
    make_spec(SE, [0.6, 0.9, 1.2], 1.5, 0.01),
    make_spec(MATERN32, 0.8, 0.7, 0.02)
]
spec_ids = ['se', 'matern32']


def numeric_grad(function, x, step=1e-6):
    x = np.asarray(x, dtype=float)
    grad = []
    for axis in range(x.size):
        shift = np.zeros_like(x)
        shift[axis] = step
        grad.append(
            (function(x + shift) - function(x - shift)) / (2.0 * step)
        )
    return np.array(grad)


def test_se_value():
    spec = make_spec(SE, [1.0, 2.0, 0.5], 2.0, 0.1)
    value = evaluate(spec, [0.0, 0.0, 0.0], [1.0, 2.0, 0.5])

    assert value == pytest.approx(2.0 * np.exp(-1.5))


def test_matern_value():
    spec = make_spec(MATERN32, 1.0, 2.0, 0.1)
    value = evaluate(spec, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0])
    t = np.sqrt(3.0)

    assert value == pytest.approx(2.0 * (1.0 + t) * np.exp(-t))


@pytest.mark.parametrize('spec', specs, ids=spec_ids)
def test_noise_only_on_same_index(spec):
    same = evaluate(spec, xq, xq, same_index=True)
    other = evaluate(spec, xq, xq)

    assert same == pytest.approx(spec.signal_var + spec.noise_var)
    assert other == pytest.approx(prior_var(spec))


@pytest.mark.parametrize('spec', specs, ids=spec_ids)
def test_cross_matrix_symmetric(spec):
    K = cross_matrix(spec, A, A, add_noise_on_diag=True)

    np.testing.assert_allclose(K, K.T)
    np.testing.assert_allclose(
        np.diag(K),
        np.full(len(A), spec.signal_var + spec.noise_var)
    )
    assert np.all(np.linalg.eigvalsh(K) > 0)


def test_noise_diag_requires_same_set():
    with pytest.raises(DimensionMismatchException):
        cross_matrix(specs[0], A, B, add_noise_on_diag=True)


@pytest.mark.parametrize('spec', specs, ids=spec_ids)
def test_grad_matches_finite_difference(spec):
    expected = np.array([
        numeric_grad(lambda x: evaluate(spec, row, x), xq) for row in A
    ])

    np.testing.assert_allclose(
        grad_matrix(spec, A, xq),
        expected,
        rtol=1e-6,
        atol=1e-8
    )
    np.testing.assert_allclose(grad_x(spec, A[0], xq), expected[0])


@pytest.mark.parametrize('spec', specs, ids=spec_ids)
def test_hess_matches_finite_difference(spec):
    stack = hess_stack(spec, A, xq)

    for index, row in enumerate(A):
        expected = numeric_grad(lambda x: grad_x(spec, row, x), xq)
        np.testing.assert_allclose(
            stack[index],
            expected,
            rtol=1e-5,
            atol=1e-7
        )
        np.testing.assert_allclose(stack[index], stack[index].T)

    np.testing.assert_allclose(hess_x(spec, A[1], xq), stack[1])


def test_matern_derivative_singular_at_data_point():
    with pytest.raises(SingularPointException):
        grad_x(specs[1], A[0], A[0])

    with pytest.raises(SingularPointException):
        hess_x(specs[1], A[0], A[0] + 1e-10)


def test_se_derivative_at_data_point():
    np.testing.assert_allclose(grad_x(specs[0], A[0], A[0]), np.zeros(3))


@pytest.mark.parametrize('spec', specs, ids=spec_ids)
def test_grad_second_arg(spec):
    result = grad_second_arg(spec, A, B)
    assert result.shape == (6, 4, 3)

    for i in (0, 3):
        for j in (1, 2):
            expected = numeric_grad(lambda b: evaluate(spec, A[i], b), B[j])
            np.testing.assert_allclose(
                result[i, j],
                expected,
                rtol=1e-6,
                atol=1e-8
            )


def test_grad_second_arg_finite_at_coincident_points():
    result = grad_second_arg(specs[1], A, A)
    assert np.all(np.isfinite(result))
    np.testing.assert_allclose(result[2, 2], np.zeros(3))


@pytest.mark.parametrize('spec', specs, ids=spec_ids)
def test_param_gradients(spec):
    theta = pack_params(spec)
    gradients = param_gradients(spec, A, B)

    assert len(gradients) == theta.size - 1

    for index, gradient in enumerate(gradients):
        def cross(value):
            shifted = theta.copy()
            shifted[index] = value
            return cross_matrix(unpack_params(spec, shifted), A, B)

        step = 1e-6
        expected = (
            cross(theta[index] + step) - cross(theta[index] - step)
        ) / (2.0 * step)
        np.testing.assert_allclose(gradient, expected, rtol=1e-5, atol=1e-9)


@pytest.mark.parametrize('spec', specs, ids=spec_ids)
def test_pack_unpack(spec):
    restored = unpack_params(spec, pack_params(spec))

    np.testing.assert_allclose(restored.lengthscales, spec.lengthscales)
    assert restored.signal_var == pytest.approx(spec.signal_var)
    assert restored.noise_var == pytest.approx(spec.noise_var)


def test_spec_dict_round_trip():
    spec = KernelSpec.from_dict(specs[0].to_dict())

    assert spec.family == SE
    np.testing.assert_allclose(spec.lengthscales, [0.6, 0.9, 1.2])


def test_make_spec_broadcasts_se_lengthscale():
    spec = make_spec(SE, 0.5, 1.0, 0.0, dim=2)
    np.testing.assert_allclose(spec.lengthscales, [0.5, 0.5])


def test_default_spec():
    spec = default_spec(SE, corner_X, corner_y)

    np.testing.assert_allclose(spec.lengthscales, np.full(3, 0.2 * 3 ** 0.5))
    assert spec.signal_var == pytest.approx(0.5)
    assert spec.noise_var == pytest.approx(0.005)


def test_sample_spacing():
    assert sample_spacing(corner_X) == pytest.approx(1.0)
    assert sample_spacing(corner_X[:1]) == 0.0


@pytest.mark.parametrize('family', [SE, MATERN32])
def test_param_bounds_follow_data(family):
    spec = default_spec(family, corner_X, corner_y)
    bounds = np.exp(param_bounds(spec, corner_X, corner_y))
    count = spec.lengthscales.size

    assert len(bounds) == count + 2
    np.testing.assert_allclose(bounds[:count], [[2.0, 4.0]] * count)
    np.testing.assert_allclose(bounds[count], [0.1, 2.5])
    np.testing.assert_allclose(bounds[count + 1], [5e-7, 5e-3])
    assert bounds[count + 1][1] < bounds[count][0]


def test_param_bounds_scale_with_data():
    spec = default_spec(SE, corner_X, corner_y)
    small = np.exp(param_bounds(spec, 0.01 * corner_X, 0.1 * corner_y))

    np.testing.assert_allclose(small[0], [0.02, 0.04])
    np.testing.assert_allclose(small[3], [1e-3, 2.5e-2])


def test_clip_spec():
    spec = default_spec(SE, corner_X, corner_y)
    clipped = clip_spec(spec, param_bounds(spec, corner_X, corner_y))

    np.testing.assert_allclose(clipped.lengthscales, np.full(3, 2.0))
    assert clipped.signal_var == pytest.approx(0.5)
    assert clipped.noise_var == pytest.approx(0.005)


@pytest.mark.parametrize(
    'family,lengthscale,signal_var,noise_var',
    [
        ('rbf', 1.0, 1.0, 0.0),
        (SE, -1.0, 1.0, 0.0),
        (SE, 1.0, 0.0, 0.0),
        (SE, 1.0, 1.0, -0.1),
        (MATERN32, [1.0, 2.0], 1.0, 0.0)
    ]
)
def test_invalid_spec(family, lengthscale, signal_var, noise_var):
    with pytest.raises(InvalidParameterException):
        make_spec(family, lengthscale, signal_var, noise_var)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchException):
        cross_matrix(specs[0], np.zeros((2, 2)), np.zeros((2, 2)))
