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
    InvalidParameterException
)
from gpis_cbf_utils.kinematics import (
    ChainModel,
    LinearPositionReference,
    dh_transform,
    fk,
    jacobian,
    transforms
)

planar = ChainModel(((1.0, 0.0, 0.0, 0.0), (1.0, 0.0, 0.0, 0.0)))
q0 = np.array([0.0, 0.3, 0.0, 1.5, 0.0, 1.0, 0.0])


def test_dh_transform_identity():
    np.testing.assert_allclose(dh_transform(0.0, 0.0, 0.0, 0.0), np.eye(4))


def test_dh_transform_order():
    # Translate along z and x, then twist about x.
    T = dh_transform(2.0, np.pi / 2, 3.0, 0.0)

    np.testing.assert_allclose(T[:3, 3], [2.0, 0.0, 3.0])
    np.testing.assert_allclose(T[:3, 2], [0.0, -1.0, 0.0], atol=1e-12)


@pytest.mark.parametrize(
    'q,expected',
    [
        ([0.0, 0.0], [2.0, 0.0, 0.0]),
        ([np.pi / 2, 0.0], [0.0, 2.0, 0.0]),
        ([0.0, np.pi / 2], [1.0, 1.0, 0.0])
    ]
)
def test_planar_fk(q, expected):
    np.testing.assert_allclose(fk(planar, q), expected, atol=1e-12)


def test_planar_jacobian():
    J = jacobian(planar, [0.0, 0.0])

    np.testing.assert_allclose(
        J,
        [[0.0, 0.0], [2.0, 1.0], [0.0, 0.0]],
        atol=1e-12
    )


def test_base_position_offsets_fk():
    chain = ChainModel(planar.dh_rows, base_position=(0.5, -1.0, 2.0))

    np.testing.assert_allclose(fk(chain, [0.0, 0.0]), [2.5, -1.0, 2.0])


def test_gen3_like_straight_up():
    chain = ChainModel.gen3_like()

    assert chain.n_joints == 7
    assert len(transforms(chain, np.zeros(7))) == 8
    np.testing.assert_allclose(
        fk(chain, np.zeros(7)),
        [0.0, 0.0, 1.1873],
        atol=1e-12
    )


def test_gen3_like_jacobian_matches_finite_difference():
    chain = ChainModel.gen3_like()
    J = jacobian(chain, q0)

    step = 1e-6
    for joint in range(7):
        shift = np.zeros(7)
        shift[joint] = step
        np.testing.assert_allclose(
            J[:, joint],
            (fk(chain, q0 + shift) - fk(chain, q0 - shift)) / (2.0 * step),
            atol=1e-8
        )


def test_chain_from_dict():
    chain = ChainModel.from_dict({'dh_rows': [[1.0, 0.0, 0.0, 0.0]]})

    assert chain.n_joints == 1
    assert chain.base_position == (0.0, 0.0, 0.0)


@pytest.mark.parametrize(
    'rows',
    [(), ((1.0, 0.0, 0.0),), ((np.nan, 0.0, 0.0, 0.0),)]
)
def test_invalid_chain(rows):
    with pytest.raises(InvalidParameterException):
        ChainModel(rows)


def test_joint_count_mismatch():
    with pytest.raises(DimensionMismatchException):
        fk(planar, [0.0, 0.0, 0.0])


def test_reference_profile():
    reference = LinearPositionReference(
        planar, [0.0, 0.0, 0.0], [2.0, 0.0, 0.0], travel_time=2.0
    )

    np.testing.assert_allclose(reference.position(1.0), [1.0, 0.0, 0.0])
    np.testing.assert_allclose(reference.position(5.0), [2.0, 0.0, 0.0])
    np.testing.assert_allclose(reference.velocity(1.0), [1.0, 0.0, 0.0])
    np.testing.assert_allclose(reference.velocity(2.0), np.zeros(3))
    np.testing.assert_allclose(
        reference.boresight(np.zeros(3)),
        [1.0, 0.0, 0.0]
    )
    assert reference.boresight(np.array([2.0, 0.0, 0.0])) is None


def test_reference_tracking_reaches_goal():
    chain = ChainModel.gen3_like()
    start = fk(chain, q0)
    goal = start + np.array([0.0, 0.1, -0.05])
    reference = LinearPositionReference(chain, start, goal, travel_time=1.0)

    q = q0.copy()
    dt = 0.01
    for step in range(300):
        q = q + dt * reference.joint_velocity(step * dt, q)

    assert np.linalg.norm(fk(chain, q) - goal) < 1e-2


def test_reference_joint_speed_limit():
    chain = ChainModel.gen3_like()
    start = fk(chain, q0)
    reference = LinearPositionReference(
        chain,
        start,
        start + np.array([0.3, 0.0, 0.0]),
        travel_time=0.1,
        max_joint_speed=0.2
    )

    q_dot = reference.joint_velocity(0.0, q0)
    assert np.max(np.abs(q_dot)) == pytest.approx(0.2)


def test_reference_invalid_travel_time():
    with pytest.raises(InvalidParameterException):
        LinearPositionReference(planar, np.zeros(3), np.ones(3), 0.0)
