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

from dataclasses import dataclass

import numpy as np

from gpis_cbf_utils.exceptions import (
    DegenerateConstraintException,
    InvalidParameterException
)

logger = logging.getLogger('gpis_cbf_utils')

# Below this norm of the control coefficient the constraint is degenerate.
degenerate_tolerance = 1e-10


@dataclass(frozen=True, eq=False)
class RectifyResult:
    u_rect: np.ndarray
    constraint_value: float
    active: bool
    fallback: bool


def _project(a, b, u_nom, u_max=None, strict=False):
    """
    Minimum norm change of u_nom satisfying a + b @ u >= 0.
    """
    u_nom = np.asarray(u_nom, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()

    if b.shape != u_nom.shape:
        raise InvalidParameterException(
            'Constraint row of size {b} does not match a control of '
            'size {u}'.format(b=b.size, u=u_nom.size)
        )

    slack = float(a + b @ u_nom)
    if slack >= 0:
        u_rect, active, fallback = u_nom.copy(), False, False
    else:
        norm_sq = float(b @ b)
        if np.sqrt(norm_sq) < degenerate_tolerance:
            message = (
                'Barrier constraint violated by {slack:.3g} with no control '
                'authority'.format(slack=slack)
            )
            if strict:
                raise DegenerateConstraintException(message)

            logger.warning(message + ', stopping')
            u_rect, active, fallback = np.zeros_like(u_nom), True, True
        else:
            u_rect = u_nom - b * slack / norm_sq
            active, fallback = True, False

    if u_max is not None:
        clipped = np.clip(u_rect, -u_max, u_max)
        if not np.array_equal(clipped, u_rect):
            logger.warning(
                'Control clipped to {limit}, the barrier guarantee no '
                'longer holds'.format(limit=u_max)
            )
            u_rect = clipped

    return RectifyResult(
        u_rect=u_rect,
        constraint_value=float(a + b @ u_rect),
        active=active,
        fallback=fallback
    )


def rectify(Lf_h, Lg_h, h, k0, u_nom, u_max=None, strict=False):
    """
    Closed form solution of the single constraint barrier QP

        min 1/2 |u - u_nom|^2  s.t.  Lf_h + Lg_h u + k0 h >= 0.
    """
    if not k0 > 0:
        raise InvalidParameterException(
            'k0 must be positive, got {k0}'.format(k0=k0)
        )

    return _project(Lf_h + k0 * h, Lg_h, u_nom, u_max, strict)


def rectify_ecbf(Lf2_h, LgLf_h, hdot, h, poles, u_nom, u_max=None,
                 strict=False):
    """
    Exponential barrier QP for relative degree two, with the constraint

        Lf2_h + LgLf_h u + (l1 + l2) hdot + l1 l2 h >= 0.
    """
    l1, l2 = poles
    if not (l1 > 0 and l2 > 0):
        raise InvalidParameterException(
            'Poles must be positive, got {poles}'.format(poles=list(poles))
        )

    a = Lf2_h + (l1 + l2) * hdot + l1 * l2 * h
    return _project(a, LgLf_h, u_nom, u_max, strict)
