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

from scipy.optimize import minimize

from gpis_cbf_utils.exceptions import (
    DegenerateConstraintException,
    InvalidParameterException
)
from gpis_cbf_utils.safety_filter import rectify, rectify_ecbf


def solve_qp(a, b, u_nom):
    """
    Numerical reference for min |u - u_nom|^2 s.t. a + b u >= 0.
    """
    result = minimize(
        lambda u: 0.5 * float(np.sum((u - u_nom) ** 2)),
        u_nom,
        jac=lambda u: u - u_nom,
        constraints=[{
            'type': 'ineq',
            'fun': lambda u: a + b @ u,
            'jac': lambda u: b
        }],
        method='SLSQP',
        options={'ftol': 1e-12, 'maxiter': 200}
    )
    return result.x


def test_inactive_returns_nominal():
    u_nom = np.array([0.3, -0.2])
    result = rectify(0.5, np.array([1.0, 0.0]), 1.0, 2.0, u_nom)

    np.testing.assert_array_equal(result.u_rect, u_nom)
    assert not result.active
    assert not result.fallback
    assert result.constraint_value == pytest.approx(0.5 + 2.0 + 0.3)


def test_active_projection():
    # 0 + (1, 0) u + 1 * 0.1 >= 0 with u_nom = (-1, 0.5)
    result = rectify(0.0, np.array([1.0, 0.0]), 0.1, 1.0, [-1.0, 0.5])

    np.testing.assert_allclose(result.u_rect, [-0.1, 0.5])
    assert result.active
    assert result.constraint_value == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize('seed', range(5))
def test_matches_numerical_qp(seed):
    rng = np.random.default_rng(seed)
    Lf_h = rng.normal()
    Lg_h = rng.normal(size=3)
    h = rng.uniform(0.0, 0.5)
    u_nom = rng.normal(size=3) * 3.0
    k0 = 1.5

    result = rectify(Lf_h, Lg_h, h, k0, u_nom)
    expected = solve_qp(Lf_h + k0 * h, Lg_h, u_nom)

    np.testing.assert_allclose(result.u_rect, expected, atol=1e-6)
    assert result.constraint_value >= -1e-9


@pytest.mark.parametrize('seed', range(5))
def test_rectify_is_idempotent(seed):
    rng = np.random.default_rng(seed)
    Lf_h = rng.normal()
    Lg_h = rng.normal(size=3)
    h = rng.uniform(0.0, 0.5)

    first = rectify(Lf_h, Lg_h, h, 1.5, rng.normal(size=3) * 3.0)
    second = rectify(Lf_h, Lg_h, h, 1.5, first.u_rect)

    np.testing.assert_allclose(second.u_rect, first.u_rect, atol=1e-12)
    assert second.constraint_value >= -1e-12


@pytest.mark.parametrize('seed', range(5))
def test_rectify_is_minimal(seed):
    rng = np.random.default_rng(seed)
    a = -abs(rng.normal()) - 0.5
    b = rng.normal(size=3)
    u_nom = np.zeros(3)
    result = rectify(a, b, 0.0, 1.0, u_nom)
    distance = np.linalg.norm(result.u_rect - u_nom)

    for candidate in rng.normal(size=(200, 3)) * 3.0:
        if a + b @ candidate >= 0:
            assert np.linalg.norm(candidate - u_nom) >= distance - 1e-12


def test_degenerate_falls_back_to_zero(caplog):
    with caplog.at_level(logging.WARNING, logger='gpis_cbf_utils'):
        result = rectify(-1.0, np.zeros(3), 0.1, 1.0, [1.0, 2.0, 3.0])

    np.testing.assert_array_equal(result.u_rect, np.zeros(3))
    assert result.active
    assert result.fallback
    assert 'no control authority' in caplog.text


def test_degenerate_strict():
    with pytest.raises(DegenerateConstraintException):
        rectify(-1.0, np.zeros(2), 0.1, 1.0, [1.0, 2.0], strict=True)


def test_degenerate_but_satisfied():
    result = rectify(1.0, np.zeros(2), 0.1, 1.0, [1.0, 2.0])

    np.testing.assert_array_equal(result.u_rect, [1.0, 2.0])
    assert not result.active


def test_clip_to_limit(caplog):
    with caplog.at_level(logging.WARNING, logger='gpis_cbf_utils'):
        result = rectify(
            -10.0, np.array([1.0, 0.0]), 0.0, 1.0, [0.0, 0.0], u_max=2.0
        )

    np.testing.assert_allclose(result.u_rect, [2.0, 0.0])
    assert result.constraint_value == pytest.approx(-8.0)
    assert 'clipped' in caplog.text


@pytest.mark.parametrize('k0', [0.0, -1.0])
def test_invalid_gain(k0):
    with pytest.raises(InvalidParameterException):
        rectify(0.0, np.ones(2), 1.0, k0, np.zeros(2))


def test_size_mismatch():
    with pytest.raises(InvalidParameterException):
        rectify(0.0, np.ones(3), 1.0, 1.0, np.zeros(2))


def test_ecbf_constraint():
    poles = (3.0, 2.0)
    LgLf_h = np.array([0.0, 0.0, 1.0])
    result = rectify_ecbf(
        Lf2_h=0.5,
        LgLf_h=LgLf_h,
        hdot=-2.0,
        h=0.1,
        poles=poles,
        u_nom=[0.4, 0.0, 0.0]
    )

    # 0.5 + u_z + 5 * (-2) + 6 * 0.1 >= 0
    np.testing.assert_allclose(result.u_rect, [0.4, 0.0, 8.9])
    assert result.active
    assert result.constraint_value == pytest.approx(0.0, abs=1e-12)


def test_ecbf_inactive():
    result = rectify_ecbf(0.0, np.ones(3), 1.0, 1.0, (2.0, 2.0), np.zeros(3))

    assert not result.active
    assert result.constraint_value == pytest.approx(8.0)


def test_ecbf_invalid_poles():
    with pytest.raises(InvalidParameterException):
        rectify_ecbf(0.0, np.ones(3), 1.0, 1.0, (2.0, 0.0), np.zeros(3))
