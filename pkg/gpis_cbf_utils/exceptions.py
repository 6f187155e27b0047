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


class GPISCBFUtilsException(Exception):
    """
    Base class to handle all known exceptions.

    Specific exceptions are implemented as sub classes
    of GPISCBFUtilsException.

    Attributes
    * :attr:`message`
        Exception message text
    * :attr:`exit_code`
        Process exit code used by the command line interface
    """
    exit_code = 3

    def __init__(self, message):
        self.message = message

    def __str__(self):
        return format(self.message)


class GPISCBFInputException(GPISCBFUtilsException):
    """
    Base class for errors caused by invalid input or usage.
    """
    exit_code = 2


class GPISCBFRuntimeException(GPISCBFUtilsException):
    """
    Base class for numeric and runtime failures.
    """
    exit_code = 3


class CloudParseException(GPISCBFInputException):
    """
    Exception raised if a point cloud file record is malformed.
    """


class MissingNormalsException(GPISCBFInputException):
    """
    Exception raised if a point cloud file has no normal data.
    """


class InvalidCountsException(GPISCBFInputException):
    """
    Exception raised if safety sample counts violate their ordering.
    """


class InvalidPseudoInputsException(GPISCBFInputException):
    """
    Exception raised if the number of pseudo-inputs is out of range.
    """


class InvalidParameterException(GPISCBFInputException):
    """
    Exception raised if a parameter value is outside its valid range.
    """


class DimensionMismatchException(GPISCBFInputException):
    """
    Exception raised if array dimensions do not agree.
    """


class ModelFormatException(GPISCBFInputException):
    """
    Exception raised if a model or field file cannot be read.
    """


class ScenarioException(GPISCBFInputException):
    """
    Exception raised if a scenario file is invalid.
    """


class DegenerateCloudException(GPISCBFRuntimeException):
    """
    Exception raised if a cloud bounding box has zero extent.
    """


class SingularPointException(GPISCBFRuntimeException):
    """
    Exception raised if a Matern derivative is requested at a data point.
    """


class NotPositiveDefiniteException(GPISCBFRuntimeException):
    """
    Exception raised if a covariance matrix cannot be factorized.
    """


class DegenerateConstraintException(GPISCBFRuntimeException):
    """
    Exception raised if the control has no authority over a violated
    barrier constraint.
    """


class UnsafeStartException(GPISCBFRuntimeException):
    """
    Exception raised if a simulation starts outside the safe set.
    """


class SimulationAbortException(GPISCBFRuntimeException):
    """
    Exception raised if a simulation state becomes non-finite.
    """


class EmptySetException(GPISCBFRuntimeException):
    """
    Exception raised if a metric is requested on an empty point set.
    """
