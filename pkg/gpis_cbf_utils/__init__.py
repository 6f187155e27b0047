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

__author__ = """gpis-cbf-utils developers"""
__email__ = 'gpis-cbf-utils@users.noreply.github.com'
__version__ = '0.1.0'
