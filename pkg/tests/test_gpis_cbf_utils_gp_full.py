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

import logging

import numpy as np
import pytest

from gpis_cbf_utils.exceptions import (
    DimensionMismatchException,
    InvalidParameterException,
    ModelFormatException,
    NotPositiveDefiniteException
)
from gpis_cbf_utils.gp_full import (
    GpModel,
    fit,
    jitter_cholesky,
    log_marginal_likelihood,
    optimize_hyperparams,
    predict_mean,
    predict_var,
    training_arrays
)
from gpis_cbf_utils.kernel import (
    MATERN32,
    SE,
    make_spec,
    pack_params,
    unpack_params
)
from gpis_cbf_utils.pointcloud import make_safety_samples, sphere_cloud

rng = np.random.default_rng(5)
X = rng.uniform(-1.0, 1.0, size=(12, 3))
y = np.sin(2.0 * X[:, 0]) + X[:, 1] * X[:, 2]

specs = [
    make_spec(SE, [0.5, 0.7, 0.9], 1.2, 0.05),
    make_spec(MATERN32, 0.6, 0.9, 0.05)
]
spec_ids = ['se', 'matern32']


def test_training_arrays_from_pair():
    inputs, targets = training_arrays(([1.0, 2.0, 3.0], [0.0, 1.0, 0.0]))

    assert inputs.shape == (3, 1)
    assert targets.shape == (3,)


@pytest.mark.parametrize(
    'data',
    [(np.zeros((3, 3)), np.zeros(2)), (np.zeros((0, 3)), np.zeros(0))]
)
def test_training_arrays_invalid(data):
    with pytest.raises(DimensionMismatchException):
        training_arrays(data)


def test_jitter_cholesky_clean():
    K = np.array([[2.0, 0.5], [0.5, 1.0]])
    chol, jitter = jitter_cholesky(K)

    np.testing.assert_allclose(chol @ chol.T, K, atol=1e-8)
    assert jitter == pytest.approx(1.5e-10)


def test_jitter_cholesky_escalates(caplog):
    with caplog.at_level(logging.WARNING, logger='gpis_cbf_utils'):
        _, jitter = jitter_cholesky(np.diag([1.0, -1e-8]))

    assert 1e-8 < jitter < 1e-6
    assert 'jitter' in caplog.text


def test_jitter_cholesky_not_positive_definite():
    with pytest.raises(NotPositiveDefiniteException):
        jitter_cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_fit_interpolates_with_small_noise():
    spec = make_spec(SE, 0.5, 1.0, 1e-8)
    model = fit(spec, (X, y))

    for row, target in zip(X, y):
        assert predict_mean(model, row) == pytest.approx(target, abs=1e-4)
        assert predict_var(model, row) < 1e-4


@pytest.mark.parametrize('spec', specs, ids=spec_ids)
def test_predict_matches_scalar(spec):
    model = fit(spec, (X, y))
    Xq = rng.uniform(-1.5, 1.5, size=(7, 3))
    mean, var = model.predict(Xq, chunk=3)

    np.testing.assert_allclose(
        mean,
        [model.predict_mean(row) for row in Xq]
    )
    np.testing.assert_allclose(
        var,
        [model.predict_var(row) for row in Xq],
        atol=1e-12
    )
    assert np.all(var >= 0.0)
    assert np.all(var <= spec.signal_var + 1e-12)


def test_variance_reverts_to_prior_far_away():
    model = fit(specs[0], (X, y))

    assert model.predict_mean([50.0, 50.0, 50.0]) == pytest.approx(0.0)
    assert model.predict_var([50.0, 50.0, 50.0]) == pytest.approx(1.2)


@pytest.mark.parametrize('spec', specs, ids=spec_ids)
def test_predictions_invariant_to_sample_order(spec):
    order = np.random.default_rng(2).permutation(len(X))
    Xq = rng.uniform(-1.0, 1.0, size=(8, 3))

    mean, var = fit(spec, (X, y)).predict(Xq)
    mean_permuted, var_permuted = fit(spec, (X[order], y[order])).predict(Xq)

    np.testing.assert_allclose(mean_permuted, mean, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(var_permuted, var, rtol=1e-8, atol=1e-10)


@pytest.mark.parametrize('spec', specs, ids=spec_ids)
def test_variance_does_not_grow_with_data(spec):
    Xq = rng.uniform(-1.2, 1.2, size=(20, 3))
    variances = [
        fit(spec, (X[:count], y[:count])).predict(Xq)[1]
        for count in (4, 8, len(X))
    ]

    assert np.all(variances[1] <= variances[0] + 1e-10)
    assert np.all(variances[2] <= variances[1] + 1e-10)


def test_var_weights_and_quad():
    model = fit(specs[0], (X, y))
    k = model.kernel_vector([0.1, 0.2, 0.3])
    K = model.chol @ model.chol.T

    np.testing.assert_allclose(
        model.var_weights(k),
        np.linalg.solve(K, k),
        rtol=1e-8
    )
    J = rng.normal(size=(12, 3))
    np.testing.assert_allclose(
        model.var_quad(J),
        J.T @ np.linalg.solve(K, J),
        rtol=1e-8,
        atol=1e-10
    )


def test_model_is_read_only():
    model = fit(specs[0], (X, y))

    with pytest.raises(ValueError):
        model.alpha[0] = 1.0


def test_model_dict_round_trip():
    model = fit(specs[1], (X, y))
    restored = GpModel.from_dict(model.to_dict())

    np.testing.assert_allclose(restored.alpha, model.alpha)
    assert restored.spec.family == MATERN32


@pytest.mark.parametrize(
    'data',
    [
        {'kind': 'gp'},
        {'format_version': 99, 'kind': 'gp'},
        {'format_version': 1, 'kind': 'sparse_gp'},
        'not a model'
    ]
)
def test_model_dict_invalid(data):
    with pytest.raises(ModelFormatException):
        GpModel.from_dict(data)


@pytest.mark.parametrize('spec', specs, ids=spec_ids)
def test_lml_gradient_matches_finite_difference(spec):
    theta = pack_params(spec)
    _, gradient = log_marginal_likelihood(spec, (X, y))

    step = 1e-5
    for index in range(theta.size):
        shift = np.zeros_like(theta)
        shift[index] = step
        upper, _ = log_marginal_likelihood(
            unpack_params(spec, theta + shift), (X, y)
        )
        lower, _ = log_marginal_likelihood(
            unpack_params(spec, theta - shift), (X, y)
        )
        assert gradient[index] == pytest.approx(
            (upper - lower) / (2.0 * step),
            rel=1e-4,
            abs=1e-6
        )


def test_lml_single_point():
    spec = make_spec(SE, 1.0, 1.0, 1.0)
    value, _ = log_marginal_likelihood(spec, ([[0.0, 0.0, 0.0]], [1.0]))

    # N(1 | 0, 2)
    assert value == pytest.approx(-0.25 - 0.5 * np.log(4.0 * np.pi))


@pytest.mark.parametrize('spec', specs, ids=spec_ids)
def test_optimize_hyperparams_improves(spec):
    data = make_safety_samples(sphere_cloud(0.5, 60), 30, 8, 8, seed=2)
    before, _ = log_marginal_likelihood(spec, data)
    tuned = optimize_hyperparams(spec, data, max_iters=10, restarts=1)
    after, _ = log_marginal_likelihood(tuned, data)

    assert after >= before
    assert tuned.family == spec.family


def test_optimize_hyperparams_invalid_iters():
    with pytest.raises(InvalidParameterException):
        optimize_hyperparams(specs[0], (X, y), max_iters=0)
