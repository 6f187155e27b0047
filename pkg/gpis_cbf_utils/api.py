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
import time

from collections import namedtuple

from gpis_cbf_utils.cbf import CbfConfig, evaluate, lie_degree1
from gpis_cbf_utils.exceptions import (
    InvalidParameterException,
    ModelFormatException
)
from gpis_cbf_utils.gp_full import (
    GpModel,
    fit,
    log_marginal_likelihood,
    optimize_hyperparams
)
from gpis_cbf_utils.gp_sparse import SparseGpModel, optimize_sparse, sparse_lml
from gpis_cbf_utils.kernel import clip_spec, default_spec, param_bounds
from gpis_cbf_utils.pointcloud import (
    downsample,
    load_cloud,
    make_safety_samples,
    rescale_to_box
)
from gpis_cbf_utils.safety_filter import rectify
from gpis_cbf_utils.utils import read_yaml, write_yaml

model_types = {
    GpModel.kind: GpModel,
    SparseGpModel.kind: SparseGpModel
}

train_summary = namedtuple(
    'train_summary', [
        'kind',
        'n',
        'm',
        'max_iters',
        'lml',
        'seconds'
    ]
)


def synthesize(dataset, family='se', sparse_m=None, iters=15, seed=0,
               spec=None):
    """
    Optimize hyperparameters and fit a full or sparse model.

    A sparse model is built when sparse_m is given. Without a spec the
    data scaled default, moved inside the fitting bounds, is the start.
    """
    if spec is None:
        spec = default_spec(family, dataset.X, dataset.y)
        spec = clip_spec(spec, param_bounds(spec, dataset.X, dataset.y))

    if sparse_m is None:
        spec = optimize_hyperparams(spec, dataset, iters, seed)
        return fit(spec, dataset)

    return optimize_sparse(spec, dataset, sparse_m, iters, seed)


def model_lml(model):
    """
    Log marginal likelihood of a fitted model on its training data.
    """
    if model.kind == SparseGpModel.kind:
        return sparse_lml(model.spec, (model.X, model.y), model.Z)[0]
    return log_marginal_likelihood(model.spec, (model.X, model.y))[0]


def save_model(model, path):
    write_yaml(path, model.to_dict())


def load_model(path):
    """
    Load a model file written by save_model.

    The model is refit from the stored kernel and data.
    """
    data = read_yaml(path)

    try:
        model_class = model_types[data['kind']]
    except (KeyError, TypeError):
        raise ModelFormatException(
            'File {path} does not hold a known model kind'.format(path=path)
        )

    try:
        return model_class.from_dict(data)
    except (KeyError, TypeError, ValueError) as error:
        raise ModelFormatException(
            'Model file {path} is malformed: {error}'.format(
                path=path,
                error=error
            )
        )


class GaussianCBFUtil(object):
    """
    Builds a Gaussian CBF from a point cloud with normals.

    Loads and optionally downsamples and rescales the cloud, generates
    labeled safety samples, optimizes a full or sparse GP and rectifies
    nominal controls against the resulting barrier.
    """
    def __init__(
        self,
        cloud_path=None,
        cloud=None,
        downsample_to=None,
        downsample_mode='random',
        extents=None,
        n0=None,
        n_plus=None,
        n_minus=None,
        offset=None,
        kernel='se',
        sparse_m=None,
        iters=15,
        margin=1.0,
        k0=1.0,
        poles=(2.0, 2.0),
        seed=0,
        log_level=logging.INFO,
        log_callback=None
    ):
        if log_callback:
            self.log_callback = log_callback
        else:
            logger = logging.getLogger('gpis_cbf_utils')
            logger.setLevel(log_level)
            self.log_callback = logger

        if cloud is None and cloud_path is None:
            raise InvalidParameterException(
                'Either cloud or cloud_path is required'
            )

        self.cloud_path = cloud_path
        self.downsample_to = downsample_to
        self.downsample_mode = downsample_mode
        self.extents = extents
        self.n0 = n0
        self.n_plus = n_plus
        self.n_minus = n_minus
        self.offset = offset
        self.kernel = kernel
        self.sparse_m = sparse_m
        self.iters = iters
        self.seed = seed
        self.cbf_config = CbfConfig(
            margin_coeff=margin,
            alpha_gain=k0,
            ecbf_poles=poles
        )

        self._cloud = cloud
        self._dataset = None
        self._model = None
        self.summary = None

    @property
    def cloud(self):
        if self._cloud is None:
            self._cloud = load_cloud(self.cloud_path)
            self.log_callback.info(
                'Loaded {count} points from {path}'.format(
                    count=len(self._cloud),
                    path=self.cloud_path
                )
            )

        return self._cloud

    def prepare_cloud(self):
        """
        Downsample and rescale the cloud as configured.
        """
        cloud = self.cloud

        if self.downsample_to:
            cloud = downsample(
                cloud,
                self.downsample_to,
                seed=self.seed,
                mode=self.downsample_mode
            )

        if self.extents is not None:
            cloud = rescale_to_box(cloud, self.extents)

        self._cloud = cloud
        return cloud

    @property
    def dataset(self):
        if self._dataset is None:
            cloud = self.prepare_cloud()
            n0 = self.n0 or len(cloud)
            n_plus = n0 // 4 if self.n_plus is None else self.n_plus
            n_minus = n_plus if self.n_minus is None else self.n_minus

            self._dataset = make_safety_samples(
                cloud,
                n0,
                n_plus,
                n_minus,
                offset=self.offset,
                seed=self.seed
            )
            self.log_callback.debug(
                'Safety samples: {n0} surface, {n_plus} exterior, '
                '{n_minus} interior'.format(
                    n0=n0,
                    n_plus=n_plus,
                    n_minus=n_minus
                )
            )

        return self._dataset

    def train(self):
        """
        Optimize and synthesize the model, timing the whole fit.
        """
        dataset = self.dataset
        start = time.perf_counter()
        self._model = synthesize(
            dataset,
            family=self.kernel,
            sparse_m=self.sparse_m,
            iters=self.iters,
            seed=self.seed
        )
        seconds = time.perf_counter() - start

        self.summary = train_summary(
            kind=self._model.kind,
            n=len(dataset),
            m=len(self._model.basis),
            max_iters=self.iters,
            lml=model_lml(self._model),
            seconds=seconds
        )
        self.log_callback.info(
            'Trained {kind} model on {n} samples in {seconds:.2f}s'.format(
                kind=self.summary.kind,
                n=self.summary.n,
                seconds=seconds
            )
        )
        return self._model

    @property
    def model(self):
        if self._model is None:
            self.train()

        return self._model

    def barrier(self, xq, with_hess=False):
        return evaluate(self.model, self.cbf_config, xq, with_hess=with_hess)

    def rectify(self, state, u_nom, f_val, g_val):
        """
        Rectify u_nom for a relative degree one system.
        """
        evaluation = self.barrier(
            [state[index] for index in self.cbf_config.position_selector]
        )
        Lf_h, Lg_h = lie_degree1(
            self.model,
            self.cbf_config,
            state,
            f_val,
            g_val,
            evaluation=evaluation
        )
        return rectify(
            Lf_h,
            Lg_h,
            evaluation.h,
            self.cbf_config.alpha_gain,
            u_nom
        )

    def save_model(self, path):
        save_model(self.model, path)
        self.log_callback.info('Model written to {path}'.format(path=path))
