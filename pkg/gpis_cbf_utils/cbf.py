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

from collections import namedtuple
from dataclasses import dataclass
from typing import Optional

import numpy as np

from gpis_cbf_utils.exceptions import (
    DimensionMismatchException,
    InvalidParameterException
)
from gpis_cbf_utils.kernel import cross_matrix, grad_matrix, hess_stack

degree2_terms = namedtuple(
    'degree2_terms',
    ['Lf2_h', 'LgLf_h', 'h', 'hdot']
)


@dataclass(frozen=True, eq=False)
class CbfConfig:
    """
    Barrier h = mu + margin_coeff * var.

    margin_coeff is signed. alpha_gain is k0 of the linear class-K
    function for relative degree one, ecbf_poles the (l1, l2) pole pair
    for relative degree two.
    """
    margin_coeff: float = 1.0
    alpha_gain: float = 1.0
    ecbf_poles: tuple = (2.0, 2.0)
    position_selector: tuple = (0, 1, 2)

    def __post_init__(self):
        if not self.alpha_gain > 0:
            raise InvalidParameterException(
                'alpha_gain must be positive, got {gain}'.format(
                    gain=self.alpha_gain
                )
            )

        poles = tuple(float(pole) for pole in self.ecbf_poles)
        if len(poles) != 2 or min(poles) <= 0:
            raise InvalidParameterException(
                'ecbf_poles must be two positive values, got {poles}'.format(
                    poles=list(self.ecbf_poles)
                )
            )

        object.__setattr__(self, 'ecbf_poles', poles)
        object.__setattr__(self, 'margin_coeff', float(self.margin_coeff))
        object.__setattr__(self, 'alpha_gain', float(self.alpha_gain))
        object.__setattr__(
            self,
            'position_selector',
            tuple(int(index) for index in self.position_selector)
        )


@dataclass(frozen=True, eq=False)
class CbfEvaluation:
    h: float
    grad: Optional[np.ndarray] = None
    hess: Optional[np.ndarray] = None


def evaluate(model, cfg, xq, with_grad=True, with_hess=False):
    """
    Value, gradient and optionally Hessian of h at xq in one pass.

    Works for any model exposing basis, mean_weights, var_weights and
    var_quad, which covers the exact and the sparse GP.
    """
    xq = np.asarray(xq, dtype=float).ravel()
    basis = model.basis
    c = cfg.margin_coeff

    k = cross_matrix(model.spec, basis, xq)[:, 0]
    weights = model.mean_weights
    Pk = model.var_weights(k)
    var = max(model.prior_var - float(k @ Pk), 0.0)
    h = float(k @ weights) + c * var

    if not (with_grad or with_hess):
        return CbfEvaluation(h)

    J = grad_matrix(model.spec, basis, xq)
    grad = J.T @ weights - 2.0 * c * (J.T @ Pk)

    hess = None
    if with_hess:
        H_k = hess_stack(model.spec, basis, xq)
        hess = (
            np.einsum('i,ijk->jk', weights - 2.0 * c * Pk, H_k) -
            2.0 * c * model.var_quad(J)
        )
        hess = 0.5 * (hess + hess.T)

    return CbfEvaluation(h, grad, hess)


def eval_h(model, cfg, xq):
    return evaluate(model, cfg, xq, with_grad=False).h


def grad_h(model, cfg, xq):
    return evaluate(model, cfg, xq).grad


def hess_h(model, cfg, xq):
    return evaluate(model, cfg, xq, with_hess=True).hess


def eval_h_batch(model, cfg, Xq):
    """
    h at every row of Xq.
    """
    mean, var = model.predict(Xq)
    return mean + cfg.margin_coeff * var


def lie_degree1(model, cfg, xq, f_val, g_val, position_selector=None,
                evaluation=None):
    """
    Lie derivatives of h for a relative degree one system.

    xq is the full state. Only the state rows named by the position
    selector enter h, the remaining rows contribute zero.
    """
    selector = list(position_selector or cfg.position_selector)
    state = np.asarray(xq, dtype=float).ravel()
    f_val = np.asarray(f_val, dtype=float).ravel()
    g_val = np.atleast_2d(np.asarray(g_val, dtype=float))

    if len(f_val) != len(state) or g_val.shape[0] != len(state):
        raise DimensionMismatchException(
            'Drift {f} and input matrix {g} do not match a state of '
            'size {n}'.format(
                f=f_val.shape,
                g=g_val.shape,
                n=len(state)
            )
        )

    if evaluation is None:
        evaluation = evaluate(model, cfg, state[selector])

    Lf_h = float(evaluation.grad @ f_val[selector])
    Lg_h = evaluation.grad @ g_val[selector]
    return Lf_h, Lg_h


def lie_degree2(model, cfg, state):
    """
    Lie derivatives of h for a double integrator with state (p, v).
    """
    state = np.asarray(state, dtype=float).ravel()
    dim = len(state) // 2

    if len(state) != 2 * dim:
        raise DimensionMismatchException(
            'Double integrator state must have even length, got '
            '{n}'.format(n=len(state))
        )

    position, velocity = state[:dim], state[dim:]
    evaluation = evaluate(model, cfg, position, with_hess=True)

    return degree2_terms(
        Lf2_h=float(velocity @ evaluation.hess @ velocity),
        LgLf_h=evaluation.grad.copy(),
        h=evaluation.h,
        hdot=float(evaluation.grad @ velocity)
    )
