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

from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from gpis_cbf_utils.exceptions import (
    DimensionMismatchException,
    InvalidParameterException,
    ModelFormatException,
    NotPositiveDefiniteException
)
from gpis_cbf_utils.kernel import (
    KernelSpec,
    cross_matrix,
    pack_params,
    param_bounds,
    param_gradients,
    prior_var,
    unpack_params
)

logger = logging.getLogger('gpis_cbf_utils')

model_format_version = 1
jitter_start = 1e-10
jitter_limit = 1e-4
failed_objective = 1e20
log_2pi = np.log(2.0 * np.pi)


def training_arrays(data):
    """
    Return (X, y) from a SafetyDataset or an (X, y) pair.
    """
    if hasattr(data, 'X') and hasattr(data, 'y'):
        X, y = data.X, data.y
    else:
        X, y = data

    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()

    if len(X) != len(y):
        raise DimensionMismatchException(
            'Got {inputs} inputs but {targets} targets'.format(
                inputs=len(X),
                targets=len(y)
            )
        )

    if len(y) < 1:
        raise DimensionMismatchException('Training set is empty')

    return X, y


def jitter_cholesky(K):
    """
    Lower Cholesky factor of K + jitter * I with escalating jitter.

    Jitter starts at 1e-10 of the mean diagonal and grows tenfold up to
    1e-4 of it. Returns the factor and the jitter used.
    """
    scale = float(np.mean(np.diag(K)))
    if not scale > 0:
        scale = 1.0

    jitter = jitter_start * scale
    eye = np.eye(len(K))

    while jitter <= jitter_limit * scale * (1.0 + 1e-9):
        try:
            chol = cholesky(K + jitter * eye, lower=True)
        except (LinAlgError, ValueError):
            logger.debug(
                'Cholesky failed with jitter {jitter:.3g}, '
                'escalating'.format(jitter=jitter)
            )
            jitter *= 10.0
            continue

        if jitter > jitter_start * scale * (1.0 + 1e-9):
            logger.warning(
                'Covariance needed jitter {jitter:.3g} to factorize'.format(
                    jitter=jitter
                )
            )
        return chol, jitter

    raise NotPositiveDefiniteException(
        'Covariance matrix of size {size} is not positive definite '
        'after jitter {jitter:.3g}'.format(
            size=len(K),
            jitter=jitter_limit * scale
        )
    )


def _readonly(*arrays):
    for array in arrays:
        array.setflags(write=False)


class GpModel(object):
    """
    Exact GP posterior with precomputed Cholesky factor and weights.
    """
    kind = 'gp'

    def __init__(self, spec, X, y, chol, alpha, jitter):
        self.spec = spec
        self.X = X
        self.y = y
        self.chol = chol
        self.alpha = alpha
        self.jitter = jitter
        _readonly(self.X, self.y, self.chol, self.alpha)

    @property
    def basis(self):
        return self.X

    @property
    def mean_weights(self):
        return self.alpha

    @property
    def prior_var(self):
        return prior_var(self.spec)

    def kernel_vector(self, xq):
        return cross_matrix(self.spec, self.X, xq)[:, 0]

    def var_weights(self, k):
        """
        K^-1 k, the weights of the variance term.
        """
        return cho_solve((self.chol, True), k)

    def var_quad(self, J):
        """
        J^T K^-1 J for a matrix of kernel gradients J.
        """
        V = solve_triangular(self.chol, J, lower=True)
        return V.T @ V

    def predict_mean(self, xq):
        return float(self.kernel_vector(xq) @ self.alpha)

    def predict_var(self, xq):
        v = solve_triangular(self.chol, self.kernel_vector(xq), lower=True)
        return max(self.prior_var - float(v @ v), 0.0)

    def predict(self, Xq, chunk=2048):
        """
        Posterior mean and variance at every row of Xq.
        """
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        mean = np.empty(len(Xq))
        var = np.empty(len(Xq))

        for start in range(0, len(Xq), chunk):
            block = slice(start, start + chunk)
            Kq = cross_matrix(self.spec, self.X, Xq[block])
            V = solve_triangular(self.chol, Kq, lower=True)
            mean[block] = Kq.T @ self.alpha
            var[block] = self.prior_var - np.sum(V * V, axis=0)

        return mean, np.maximum(var, 0.0)

    def to_dict(self):
        return {
            'format_version': model_format_version,
            'kind': self.kind,
            'kernel': self.spec.to_dict(),
            'X': self.X.tolist(),
            'y': self.y.tolist()
        }

    @classmethod
    def from_dict(cls, data):
        check_model_dict(data, cls.kind)
        spec = KernelSpec.from_dict(data['kernel'])
        return fit(spec, (data['X'], data['y']))


def check_model_dict(data, kind):
    try:
        version = data['format_version']
        found = data['kind']
    except (KeyError, TypeError):
        raise ModelFormatException('Model document has no version or kind')

    if version != model_format_version:
        raise ModelFormatException(
            'Unsupported model format version: {version}'.format(
                version=version
            )
        )

    if found != kind:
        raise ModelFormatException(
            'Expected a {kind} model, found {found}'.format(
                kind=kind,
                found=found
            )
        )


def fit(spec, data):
    """
    Condition the GP on the training data.
    """
    X, y = training_arrays(data)
    K = cross_matrix(spec, X, X, add_noise_on_diag=True)
    chol, jitter = jitter_cholesky(K)
    alpha = cho_solve((chol, True), y)

    logger.debug(
        'Fitted GP on {count} points (jitter {jitter:.3g})'.format(
            count=len(y),
            jitter=jitter
        )
    )
    return GpModel(spec, X.copy(), y.copy(), chol, alpha, jitter)


def predict_mean(model, xq):
    return model.predict_mean(xq)


def predict_var(model, xq):
    return model.predict_var(xq)


def log_marginal_likelihood(spec, data):
    """
    Log marginal likelihood and its gradient over the log-hyperparameters.

    The gradient is ordered as kernel.pack_params: lengthscales, signal
    variance, noise variance.
    """
    X, y = training_arrays(data)
    K = cross_matrix(spec, X, X, add_noise_on_diag=True)
    chol, _ = jitter_cholesky(K)
    alpha = cho_solve((chol, True), y)

    value = (
        -0.5 * float(y @ alpha) -
        float(np.sum(np.log(np.diag(chol)))) -
        0.5 * len(y) * log_2pi
    )

    W = np.outer(alpha, alpha) - cho_solve((chol, True), np.eye(len(y)))
    gradient = [
        0.5 * float(np.sum(W * dK)) for dK in param_gradients(spec, X, X)
    ]
    gradient.append(0.5 * float(np.trace(W)) * spec.noise_var)

    return value, np.array(gradient)


def _clipped(theta, bounds):
    lower = np.array([bound[0] for bound in bounds], dtype=float)
    upper = np.array([bound[1] for bound in bounds], dtype=float)
    lower[np.isnan(lower)] = -np.inf
    upper[np.isnan(upper)] = np.inf
    return np.clip(theta, lower, upper)


def run_lbfgs(objective, start, bounds, max_iters):
    """
    Minimize with L-BFGS-B under a fixed iteration budget.
    """
    result = minimize(
        objective,
        start,
        jac=True,
        method='L-BFGS-B',
        bounds=bounds,
        options={'maxiter': max_iters}
    )
    logger.debug(
        'L-BFGS-B stopped after {iters} iterations: {message}'.format(
            iters=result.nit,
            message=result.message
        )
    )
    return result


def optimize_hyperparams(spec, data, max_iters, seed=0, restarts=0):
    """
    Maximize the log marginal likelihood over log-hyperparameters.

    Returns a spec whose likelihood is at least that of the input spec.
    Optional restarts perturb the start point with a seeded generator.
    """
    if max_iters < 1:
        raise InvalidParameterException(
            'max_iters must be at least 1, got {iters}'.format(
                iters=max_iters
            )
        )

    X, y = training_arrays(data)
    initial, _ = log_marginal_likelihood(spec, (X, y))
    bounds = param_bounds(spec, X, y)

    def objective(theta):
        try:
            value, gradient = log_marginal_likelihood(
                unpack_params(spec, theta),
                (X, y)
            )
        except NotPositiveDefiniteException:
            return failed_objective, np.zeros_like(theta)
        return -value, -gradient

    rng = np.random.default_rng(seed)
    theta0 = _clipped(pack_params(spec), bounds)
    starts = [theta0] + [
        _clipped(theta0 + rng.normal(0.0, 0.5, size=theta0.size), bounds)
        for _ in range(restarts)
    ]

    best_spec, best_value = spec, initial
    for start in starts:
        result = run_lbfgs(objective, start, bounds, max_iters)
        if np.isfinite(result.fun) and -result.fun > best_value:
            best_spec = unpack_params(spec, result.x)
            best_value = -float(result.fun)

    logger.info(
        'GP log marginal likelihood {initial:.6g} -> {final:.6g}'.format(
            initial=initial,
            final=best_value
        )
    )
    return best_spec
