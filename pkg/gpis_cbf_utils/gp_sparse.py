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

from scipy.linalg import cho_solve, solve_triangular

from gpis_cbf_utils.exceptions import (
    InvalidParameterException,
    InvalidPseudoInputsException,
    NotPositiveDefiniteException
)
from gpis_cbf_utils.gp_full import (
    _clipped,
    _readonly,
    check_model_dict,
    failed_objective,
    jitter_cholesky,
    log_2pi,
    model_format_version,
    run_lbfgs,
    training_arrays
)
from gpis_cbf_utils.kernel import (
    KernelSpec,
    cross_matrix,
    grad_second_arg,
    pack_params,
    param_bounds,
    param_gradients,
    prior_var,
    unpack_params
)

logger = logging.getLogger('gpis_cbf_utils')


class SparseGpModel(object):
    """
    FITC sparse GP over M pseudo-inputs.

    Stores Km_chol = chol(K_M), B_chol = chol(I + V D^-1 V^T) with
    V = Km_chol^-1 K_MN and D = Lambda + noise, so that
    Q_M = Km_chol B Km_chol^T without forming Q_M.
    """
    kind = 'sparse_gp'

    def __init__(self, spec, X, y, Z, Lambda, Km_chol, B_chol, w, jitter):
        self.spec = spec
        self.X = X
        self.y = y
        self.Z = Z
        self.Lambda = Lambda
        self.Km_chol = Km_chol
        self.B_chol = B_chol
        self.w = w
        self.jitter = jitter
        _readonly(
            self.X, self.y, self.Z, self.Lambda,
            self.Km_chol, self.B_chol, self.w
        )

    @property
    def basis(self):
        return self.Z

    @property
    def mean_weights(self):
        return self.w

    @property
    def prior_var(self):
        return prior_var(self.spec)

    @property
    def Qm_chol(self):
        return self.Km_chol @ self.B_chol

    @property
    def P(self):
        """
        K_M^-1 - Q_M^-1 as a dense M x M matrix.
        """
        return self.var_weights(np.eye(len(self.Z)))

    def kernel_vector(self, xq):
        return cross_matrix(self.spec, self.Z, xq)[:, 0]

    def var_weights(self, k):
        """
        P k without forming P.
        """
        a = solve_triangular(self.Km_chol, k, lower=True)
        b = a - cho_solve((self.B_chol, True), a)
        return solve_triangular(self.Km_chol.T, b, lower=False)

    def var_quad(self, J):
        """
        J^T P J for a matrix of kernel gradients J.
        """
        A = solve_triangular(self.Km_chol, J, lower=True)
        C = solve_triangular(self.B_chol, A, lower=True)
        return A.T @ A - C.T @ C

    def _reduction(self, Kq):
        A = solve_triangular(self.Km_chol, Kq, lower=True)
        C = solve_triangular(self.B_chol, A, lower=True)
        return np.sum(A * A, axis=0) - np.sum(C * C, axis=0)

    def predict_mean(self, xq):
        return float(self.kernel_vector(xq) @ self.w)

    def predict_var(self, xq):
        k = self.kernel_vector(xq)
        return max(self.prior_var - float(self._reduction(k[:, None])[0]), 0.0)

    def predict(self, Xq, chunk=4096):
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        mean = np.empty(len(Xq))
        var = np.empty(len(Xq))

        for start in range(0, len(Xq), chunk):
            block = slice(start, start + chunk)
            Kq = cross_matrix(self.spec, self.Z, Xq[block])
            mean[block] = Kq.T @ self.w
            var[block] = self.prior_var - self._reduction(Kq)

        return mean, np.maximum(var, 0.0)

    def to_dict(self):
        return {
            'format_version': model_format_version,
            'kind': self.kind,
            'kernel': self.spec.to_dict(),
            'X': self.X.tolist(),
            'y': self.y.tolist(),
            'Z': self.Z.tolist()
        }

    @classmethod
    def from_dict(cls, data):
        check_model_dict(data, cls.kind)
        Z = np.asarray(data['Z'], dtype=float)
        return fit_sparse(
            KernelSpec.from_dict(data['kernel']),
            (data['X'], data['y']),
            len(Z),
            Z=Z
        )


def _check_count(m, n):
    if not 1 <= m <= n:
        raise InvalidPseudoInputsException(
            'Number of pseudo-inputs must be in [1, {n}], got {m}'.format(
                n=n,
                m=m
            )
        )


def initial_pseudo_inputs(X, m, seed=0):
    """
    Random subset of m training inputs in their original order.
    """
    _check_count(m, len(X))
    rng = np.random.default_rng(seed)
    return X[np.sort(rng.choice(len(X), size=m, replace=False))].copy()


def _fitc_terms(spec, X, Z):
    Kmm = cross_matrix(spec, Z, Z)
    Km_chol, jitter = jitter_cholesky(Kmm)
    Kmn = cross_matrix(spec, Z, X)
    V = solve_triangular(Km_chol, Kmn, lower=True)
    Lambda = np.maximum(prior_var(spec) - np.sum(V * V, axis=0), 0.0)
    D = Lambda + spec.noise_var

    if np.min(D) <= 0:
        raise NotPositiveDefiniteException(
            'FITC diagonal is not positive, the noise variance must be '
            'positive when pseudo-inputs reproduce the data'
        )

    Vd = V / np.sqrt(D)
    B_chol, _ = jitter_cholesky(np.eye(len(Z)) + Vd @ Vd.T)
    return Km_chol, jitter, V, Lambda, D, B_chol


def fit_sparse(spec, data, m, seed=0, Z=None):
    """
    Fit a FITC model on m pseudo-inputs.

    Pseudo-inputs default to a seeded random subset of the training inputs.
    """
    X, y = training_arrays(data)

    if Z is None:
        Z = initial_pseudo_inputs(X, m, seed)
    else:
        Z = np.atleast_2d(np.asarray(Z, dtype=float)).copy()
        _check_count(len(Z), len(X))

    Km_chol, jitter, V, Lambda, D, B_chol = _fitc_terms(spec, X, Z)
    beta = V @ (y / D)
    w = solve_triangular(
        Km_chol.T,
        cho_solve((B_chol, True), beta),
        lower=False
    )

    logger.debug(
        'Fitted sparse GP on {count} points with {m} pseudo-inputs'.format(
            count=len(y),
            m=len(Z)
        )
    )
    return SparseGpModel(
        spec, X.copy(), y.copy(), Z, Lambda, Km_chol, B_chol, w, jitter
    )


def sparse_mean(model, xq):
    return model.predict_mean(xq)


def sparse_var(model, xq):
    return model.predict_var(xq)


def sparse_lml(spec, data, Z):
    """
    FITC log marginal likelihood with gradients.

    Returns the value, the gradient over the packed log-hyperparameters and
    the gradient over the pseudo-inputs. Cost is O(N M^2).
    """
    X, y = training_arrays(data)
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    Km_chol, _, V, _, D, B_chol = _fitc_terms(spec, X, Z)

    r = y / D
    beta = V @ r
    gamma = solve_triangular(B_chol, beta, lower=True)
    quad = float(y @ r) - float(gamma @ gamma)
    logdet = float(np.sum(np.log(D))) + 2.0 * float(
        np.sum(np.log(np.diag(B_chol)))
    )
    value = -0.5 * quad - 0.5 * logdet - 0.5 * len(y) * log_2pi

    # alpha = C^-1 y with C^-1 = D^-1 - D^-1 V^T B^-1 V D^-1.
    alpha = r - (V.T @ cho_solve((B_chol, True), beta)) / D
    U = solve_triangular(B_chol, V, lower=True)
    diag_inv = 1.0 / D - np.sum(U * U, axis=0) / D ** 2
    w = alpha ** 2 - diag_inv

    Bmat = solve_triangular(Km_chol.T, V, lower=False)
    Bt_scaled = Bmat.T / D[:, None]
    inv_Bt = Bt_scaled - (
        V.T @ cho_solve((B_chol, True), V @ Bt_scaled)
    ) / D[:, None]

    R = np.outer(alpha, Bmat @ alpha) - inv_Bt - w[:, None] * Bmat.T
    S = Bmat @ R
    S = 0.5 * (S + S.T)

    dK_nm = param_gradients(spec, X, Z)
    dK_m = param_gradients(spec, Z, Z)
    grad_theta = []
    for index, (d_nm, d_m) in enumerate(zip(dK_nm, dK_m)):
        grad = float(np.sum(R * d_nm)) - 0.5 * float(np.sum(S * d_m))
        if index == len(dK_nm) - 1:
            grad += 0.5 * float(np.sum(w)) * prior_var(spec)
        grad_theta.append(grad)
    grad_theta.append(0.5 * float(np.sum(w)) * spec.noise_var)

    G_nm = grad_second_arg(spec, X, Z)
    G_m = grad_second_arg(spec, Z, Z)
    grad_Z = (
        np.einsum('ij,ijk->jk', R, G_nm) -
        np.einsum('mj,mjk->jk', S, G_m)
    )

    return value, np.array(grad_theta), grad_Z


def optimize_sparse(spec, data, m, max_iters, seed=0, Z=None,
                    optimize_inputs=True):
    """
    Jointly optimize log-hyperparameters and pseudo-input locations.

    Returns a fitted SparseGpModel whose likelihood is at least that of
    the starting spec and pseudo-inputs.
    """
    if max_iters < 1:
        raise InvalidParameterException(
            'max_iters must be at least 1, got {iters}'.format(
                iters=max_iters
            )
        )

    X, y = training_arrays(data)
    if Z is None:
        Z0 = initial_pseudo_inputs(X, m, seed)
    else:
        Z0 = np.atleast_2d(np.asarray(Z, dtype=float))
        _check_count(len(Z0), len(X))

    initial, _, _ = sparse_lml(spec, (X, y), Z0)
    theta_bounds = param_bounds(spec, X, y)
    theta0 = _clipped(pack_params(spec), theta_bounds)
    count = theta0.size

    if optimize_inputs:
        start = np.concatenate([theta0, Z0.ravel()])
        bounds = theta_bounds + [(None, None)] * Z0.size
    else:
        start, bounds = theta0, theta_bounds

    def split(vector):
        if optimize_inputs:
            return vector[:count], vector[count:].reshape(Z0.shape)
        return vector, Z0

    def objective(vector):
        theta, pseudo = split(vector)
        try:
            value, grad_theta, grad_Z = sparse_lml(
                unpack_params(spec, theta),
                (X, y),
                pseudo
            )
        except NotPositiveDefiniteException:
            return failed_objective, np.zeros_like(vector)

        if optimize_inputs:
            gradient = np.concatenate([grad_theta, grad_Z.ravel()])
        else:
            gradient = grad_theta
        return -value, -gradient

    result = run_lbfgs(objective, start, bounds, max_iters)

    if np.isfinite(result.fun) and -result.fun > initial:
        theta, pseudo = split(result.x)
        best_spec, best_Z = unpack_params(spec, theta), pseudo.copy()
        final = -float(result.fun)
    else:
        best_spec, best_Z, final = spec, Z0, initial

    logger.info(
        'Sparse GP log marginal likelihood {initial:.6g} -> '
        '{final:.6g}'.format(initial=initial, final=final)
    )
    return fit_sparse(best_spec, (X, y), len(best_Z), Z=best_Z)
