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

from dataclasses import dataclass

import numpy as np

from gpis_cbf_utils.exceptions import (
    DimensionMismatchException,
    InvalidParameterException
)

half_pi = 0.5 * np.pi

# Seven revolute joints with alternating twists and Gen3-like link
# offsets (a, alpha, d, theta_offset).
gen3_like_rows = (
    (0.0, -half_pi, 0.2848, 0.0),
    (0.0, half_pi, 0.0, 0.0),
    (0.0, -half_pi, 0.4208, 0.0),
    (0.0, half_pi, 0.0, 0.0),
    (0.0, -half_pi, 0.3143, 0.0),
    (0.0, half_pi, 0.0, 0.0),
    (0.0, 0.0, 0.1674, 0.0),
)


@dataclass(frozen=True, eq=False)
class ChainModel:
    """
    Serial chain of revolute joints in standard DH convention.

    Each row is (a, alpha, d, theta_offset).
    """
    dh_rows: tuple
    base_position: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        rows = tuple(
            tuple(float(value) for value in row) for row in self.dh_rows
        )

        if not rows:
            raise InvalidParameterException('Chain needs at least one joint')

        if any(len(row) != 4 for row in rows):
            raise InvalidParameterException(
                'DH rows need four values (a, alpha, d, theta_offset)'
            )

        if not np.all(np.isfinite(np.array(rows, dtype=float).ravel())):
            raise InvalidParameterException('DH parameters must be finite')

        object.__setattr__(self, 'dh_rows', rows)
        object.__setattr__(
            self,
            'base_position',
            tuple(float(value) for value in self.base_position)
        )

    @property
    def n_joints(self):
        return len(self.dh_rows)

    @classmethod
    def gen3_like(cls, base_position=(0.0, 0.0, 0.0)):
        return cls(gen3_like_rows, base_position)

    @classmethod
    def from_dict(cls, data):
        return cls(
            tuple(tuple(row) for row in data['dh_rows']),
            tuple(data.get('base_position', (0.0, 0.0, 0.0)))
        )


def dh_transform(a, alpha, d, theta):
    """
    Rz(theta) Tz(d) Tx(a) Rx(alpha).
    """
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    return np.array([
        [ct, -st * ca, st * sa, a * ct],
        [st, ct * ca, -ct * sa, a * st],
        [0.0, sa, ca, d],
        [0.0, 0.0, 0.0, 1.0]
    ])


def _check_joints(chain, q):
    q = np.asarray(q, dtype=float).ravel()
    if len(q) != chain.n_joints:
        raise DimensionMismatchException(
            'Chain has {joints} joints, got {count} joint values'.format(
                joints=chain.n_joints,
                count=len(q)
            )
        )
    return q


def transforms(chain, q):
    """
    Base to frame i transforms for i = 0 .. n_joints.
    """
    q = _check_joints(chain, q)
    T = np.eye(4)
    T[:3, 3] = chain.base_position
    frames = [T]

    for (a, alpha, d, offset), angle in zip(chain.dh_rows, q):
        T = T @ dh_transform(a, alpha, d, angle + offset)
        frames.append(T)

    return frames


def fk(chain, q):
    return transforms(chain, q)[-1][:3, 3].copy()


def jacobian(chain, q):
    """
    Geometric position Jacobian, column i is z_(i-1) x (p_e - p_(i-1)).
    """
    frames = transforms(chain, q)
    p_end = frames[-1][:3, 3]
    J = np.zeros((3, chain.n_joints))

    for joint, frame in enumerate(frames[:-1]):
        J[:, joint] = np.cross(frame[:3, 2], p_end - frame[:3, 3])

    return J


class LinearPositionReference(object):
    """
    End-effector straight line reference tracked with damped least squares.

    The reference moves from start to goal at constant speed over
    travel_time and then holds the goal.
    """

    def __init__(self, chain, start, goal, travel_time, gain=2.0,
                 damping=0.05, max_joint_speed=None):
        if not travel_time > 0:
            raise InvalidParameterException(
                'Travel time must be positive, got {time}'.format(
                    time=travel_time
                )
            )

        self.chain = chain
        self.start = np.asarray(start, dtype=float)
        self.goal = np.asarray(goal, dtype=float)
        self.travel_time = float(travel_time)
        self.gain = gain
        self.damping = damping
        self.max_joint_speed = max_joint_speed

    def position(self, t):
        fraction = min(max(t / self.travel_time, 0.0), 1.0)
        return self.start + fraction * (self.goal - self.start)

    def velocity(self, t):
        if 0.0 <= t < self.travel_time:
            return (self.goal - self.start) / self.travel_time
        return np.zeros(3)

    def boresight(self, position):
        """
        Unit direction from position toward the goal.
        """
        direction = self.goal - position
        norm = np.linalg.norm(direction)
        if norm < 1e-9:
            return None
        return direction / norm

    def joint_velocity(self, t, q):
        """
        Joint rates driving the end effector along the reference.
        """
        q = np.asarray(q, dtype=float)
        J = jacobian(self.chain, q)
        error = self.position(t) - fk(self.chain, q)
        target = self.velocity(t) + self.gain * error
        q_dot = J.T @ np.linalg.solve(
            J @ J.T + self.damping ** 2 * np.eye(3),
            target
        )

        if self.max_joint_speed is not None:
            peak = np.max(np.abs(q_dot))
            if peak > self.max_joint_speed:
                q_dot *= self.max_joint_speed / peak

        return q_dot
