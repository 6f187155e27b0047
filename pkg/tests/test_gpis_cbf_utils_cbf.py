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

from gpis_cbf_utils.cbf import (
    CbfConfig,
    eval_h,
    eval_h_batch,
    evaluate,
    grad_h,
    hess_h,
    lie_degree1,
    lie_degree2
)
from gpis_cbf_utils.exceptions import (
    DimensionMismatchException,
    InvalidParameterException
)
from gpis_cbf_utils.gp_full import fit
from gpis_cbf_utils.gp_sparse import fit_sparse
from gpis_cbf_utils.kernel import MATERN32, SE, make_spec
from gpis_cbf_utils.pointcloud import make_safety_samples, sphere_cloud

data = make_safety_samples(sphere_cloud(0.3, 80), 40, 12, 12, seed=1)
query = np.array([0.05, -0.42, 0.21])


def build(kind, family):
    if family == SE:
        spec = make_spec(SE, [0.25, 0.3, 0.35], 0.5, 0.01)
    else:
        spec = make_spec(MATERN32, 0.3, 0.5, 0.01)

    if kind == 'gp':
        return fit(spec, data)
    return fit_sparse(spec, data, 15, seed=2)


models = [
    ('gp', SE), ('gp', MATERN32), ('sparse_gp', SE), ('sparse_gp', MATERN32)
]
model_ids = ['-'.join(item) for item in models]


def numeric_grad(function, x, step=1e-6):
    grad = []
    for axis in range(len(x)):
        shift = np.zeros(len(x))
        shift[axis] = step
        grad.append(
            (function(x + shift) - function(x - shift)) / (2.0 * step)
        )
    return np.array(grad)


@pytest.mark.parametrize('kind,family', models, ids=model_ids)
@pytest.mark.parametrize('margin', [1.0, -2.0, 0.0])
def test_value_matches_predict(kind, family, margin):
    model = build(kind, family)
    cfg = CbfConfig(margin_coeff=margin)
    mean, var = model.predict(query[None, :])

    assert eval_h(model, cfg, query) == pytest.approx(
        mean[0] + margin * var[0]
    )
    np.testing.assert_allclose(
        eval_h_batch(model, cfg, np.vstack([query, query + 0.1])),
        [eval_h(model, cfg, query), eval_h(model, cfg, query + 0.1)]
    )


@pytest.mark.parametrize('kind,family', models, ids=model_ids)
@pytest.mark.parametrize('margin', [1.0, -2.0])
def test_grad_matches_finite_difference(kind, family, margin):
    model = build(kind, family)
    cfg = CbfConfig(margin_coeff=margin)

    np.testing.assert_allclose(
        grad_h(model, cfg, query),
        numeric_grad(lambda x: eval_h(model, cfg, x), query),
        rtol=1e-5,
        atol=1e-7
    )


@pytest.mark.parametrize('kind,family', models, ids=model_ids)
def test_hess_matches_finite_difference(kind, family):
    model = build(kind, family)
    cfg = CbfConfig(margin_coeff=1.5)
    hess = hess_h(model, cfg, query)

    np.testing.assert_allclose(hess, hess.T)
    np.testing.assert_allclose(
        hess,
        numeric_grad(lambda x: grad_h(model, cfg, x), query),
        rtol=1e-4,
        atol=1e-6
    )


def test_sign_inside_and_outside():
    model = build('gp', SE)
    cfg = CbfConfig(margin_coeff=0.0)

    assert eval_h(model, cfg, 0.98 * data.X[-1]) < 0.0
    assert eval_h(model, cfg, 1.02 * data.X[40]) > 0.0
    assert abs(eval_h(model, cfg, data.X[0])) < 0.1


def test_evaluate_without_gradient():
    model = build('gp', SE)
    result = evaluate(model, CbfConfig(), query, with_grad=False)

    assert result.grad is None
    assert result.hess is None


def test_lie_degree1_with_selector():
    model = build('sparse_gp', SE)
    cfg = CbfConfig(position_selector=(1, 2, 3))
    state = np.array([9.0, *query, -4.0])
    f_val = np.array([1.0, 0.2, -0.1, 0.3, 5.0])
    g_val = np.arange(10.0).reshape(5, 2)

    Lf_h, Lg_h = lie_degree1(model, cfg, state, f_val, g_val)
    grad = grad_h(model, cfg, query)

    assert Lf_h == pytest.approx(float(grad @ f_val[1:4]))
    np.testing.assert_allclose(Lg_h, grad @ g_val[1:4])


def test_lie_degree1_dimension_mismatch():
    model = build('gp', SE)

    with pytest.raises(DimensionMismatchException):
        lie_degree1(model, CbfConfig(), query, np.zeros(2), np.eye(3))


def test_lie_degree2_along_trajectory():
    model = build('gp', MATERN32)
    cfg = CbfConfig(margin_coeff=1.0)
    velocity = np.array([0.2, 0.5, -0.1])
    terms = lie_degree2(model, cfg, np.concatenate([query, velocity]))

    step = 1e-5
    ahead = eval_h(model, cfg, query + step * velocity)
    behind = eval_h(model, cfg, query - step * velocity)

    assert terms.h == pytest.approx(eval_h(model, cfg, query))
    assert terms.hdot == pytest.approx(
        (ahead - behind) / (2.0 * step), rel=1e-5
    )
    assert terms.Lf2_h == pytest.approx(
        (ahead - 2.0 * terms.h + behind) / step ** 2, rel=1e-3, abs=1e-4
    )
    np.testing.assert_allclose(terms.LgLf_h, grad_h(model, cfg, query))


def test_lie_degree2_odd_state():
    with pytest.raises(DimensionMismatchException):
        lie_degree2(build('gp', SE), CbfConfig(), np.zeros(5))


@pytest.mark.parametrize(
    'values',
    [{'alpha_gain': 0.0}, {'ecbf_poles': (1.0, -1.0)}, {'ecbf_poles': (1,)}]
)
def test_invalid_config(values):
    with pytest.raises(InvalidParameterException):
        CbfConfig(**values)
