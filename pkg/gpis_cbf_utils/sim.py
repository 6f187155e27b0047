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

import csv
import io
import logging
import os
import time

from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from gpis_cbf_utils.api import synthesize
from gpis_cbf_utils.cbf import (
    CbfConfig,
    eval_h,
    evaluate,
    lie_degree1,
    lie_degree2
)
from gpis_cbf_utils.exceptions import (
    GPISCBFRuntimeException,
    InvalidParameterException,
    ScenarioException,
    SimulationAbortException,
    UnsafeStartException
)
from gpis_cbf_utils.kinematics import (
    ChainModel,
    LinearPositionReference,
    fk,
    jacobian,
    transforms
)
from gpis_cbf_utils.pointcloud import (
    PointCloud,
    chair_proxy_boxes,
    chair_proxy_cloud,
    downsample,
    load_cloud,
    make_safety_samples,
    rescale_to_box,
    sphere_cloud
)
from gpis_cbf_utils.safety_filter import rectify, rectify_ecbf
from gpis_cbf_utils.utils import read_yaml, write_atomic

kinds = ['manipulator', 'quadrotor']

sensor_pose = namedtuple('sensor_pose', ['origin', 'boresight'])

# Cone membership is closed, cosines within this of the limit count.
cone_tolerance = 1e-12

# True signed distances below minus this count as penetrations.
penetration_depth = 1e-3


def _get_logger(log_callback, log_level):
    if log_callback:
        return log_callback

    logger = logging.getLogger('gpis_cbf_utils')
    logger.setLevel(log_level)
    return logger


@dataclass(frozen=True, eq=False)
class SensorConfig:
    """
    Proximity sensor with a spherical cone field of view.

    mount offsets the sensor origin from the end effector.
    """
    fov_half_angle: float = float(np.radians(55.0))
    range: float = 0.8
    mount: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not 0 < self.fov_half_angle <= np.pi:
            raise InvalidParameterException(
                'Sensor half angle must be in (0, pi], got {angle}'.format(
                    angle=self.fov_half_angle
                )
            )

        if not self.range > 0:
            raise InvalidParameterException(
                'Sensor range must be positive, got {range}'.format(
                    range=self.range
                )
            )

    @classmethod
    def from_fov(cls, fov_deg=110.0, range=0.8, mount=(0.0, 0.0, 0.0)):
        return cls(float(np.radians(fov_deg) / 2.0), range, tuple(mount))


def sense_mask(points, sensor, pose):
    """
    Boolean mask of the points inside the sensor cone and range.
    """
    offsets = np.asarray(points, dtype=float) - pose.origin
    distance = np.linalg.norm(offsets, axis=1)
    boresight = np.asarray(pose.boresight, dtype=float)
    boresight = boresight / np.linalg.norm(boresight)

    cosine = np.ones(len(offsets))
    away = distance > 0
    cosine[away] = offsets[away] @ boresight / distance[away]

    return (distance <= sensor.range) & (
        cosine >= np.cos(sensor.fov_half_angle) - cone_tolerance
    )


def sense(cloud, sensor, pose):
    mask = sense_mask(cloud.points, sensor, pose)
    return PointCloud(cloud.points[mask], cloud.normals[mask])


def sphere_sdf(center, radius):
    center = np.asarray(center, dtype=float)

    def sdf(point):
        return float(np.linalg.norm(point - center)) - radius

    return sdf


def boxes_sdf(boxes):
    """
    Signed distance to a union of axis-aligned (lower, upper) boxes.
    """
    boxes = [
        (np.asarray(lower, dtype=float), np.asarray(upper, dtype=float))
        for lower, upper in boxes
    ]

    def sdf(point):
        distances = []
        for lower, upper in boxes:
            q = np.abs(point - 0.5 * (lower + upper)) - 0.5 * (upper - lower)
            distances.append(
                float(np.linalg.norm(np.maximum(q, 0.0))) +
                min(float(np.max(q)), 0.0)
            )
        return min(distances)

    return sdf


def _format(value):
    return repr(float(value))


class SimRun(object):
    """
    Aligned time series and events of one closed loop run.
    """

    def __init__(self, kind, dt, duration, state_labels, control_labels,
                 goal=None, seed=0):
        self.kind = kind
        self.dt = dt
        self.duration = duration
        self.state_labels = list(state_labels)
        self.control_labels = list(control_labels)
        self.goal = None if goal is None else np.asarray(goal, dtype=float)
        self.seed = seed

        self.times = []
        self.states = []
        self.controls = []
        self.h_values = []
        self.sdf_values = []
        self.positions = []
        self.events = []
        self.training_times = []
        self.inference_times = []

        self.datasets = 0
        self.rejected = 0
        self.fallbacks = 0
        self.active_steps = 0

    def record(self, t, state, control, h, position, sdf=None):
        self.times.append(float(t))
        self.states.append(np.array(state, dtype=float))
        self.controls.append(np.array(control, dtype=float))
        self.h_values.append(float('nan') if h is None else float(h))
        self.positions.append(np.array(position, dtype=float))
        self.sdf_values.append(
            float('nan') if sdf is None else float(sdf(position))
        )

    def event(self, t, kind, detail=''):
        self.events.append((float(t), kind, detail))

    def _csv(self, header, rows):
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(header)
        writer.writerows(rows)
        return buffer.getvalue()

    def trajectory_csv(self):
        rows = [
            [_format(t)] +
            [_format(value) for value in state] +
            [_format(value) for value in control] +
            [_format(h)]
            for t, state, control, h in zip(
                self.times, self.states, self.controls, self.h_values
            )
        ]
        return self._csv(
            ['t'] + self.state_labels + self.control_labels + ['h'],
            rows
        )

    def events_csv(self):
        rows = [[_format(t), kind, detail] for t, kind, detail in self.events]
        return self._csv(['t', 'event', 'detail'], rows)

    def timing_csv(self):
        rows = [
            [_format(t), 'train', _format(seconds)]
            for t, seconds in self.training_times
        ] + [
            [_format(t), 'inference', _format(seconds)]
            for t, seconds in self.inference_times
        ]
        return self._csv(['t', 'kind', 'seconds'], rows)

    def to_csv(self, output_dir):
        """
        Write trajectory.csv, events.csv and timing.csv.

        Only timing.csv holds wall clock measurements.
        """
        paths = {
            'trajectory': os.path.join(output_dir, 'trajectory.csv'),
            'events': os.path.join(output_dir, 'events.csv'),
            'timing': os.path.join(output_dir, 'timing.csv')
        }
        write_atomic(paths['trajectory'], self.trajectory_csv())
        write_atomic(paths['events'], self.events_csv())
        write_atomic(paths['timing'], self.timing_csv())
        return paths

    @property
    def min_h(self):
        values = np.array(self.h_values)
        values = values[np.isfinite(values)]
        return float(values.min()) if values.size else None

    @property
    def penetrations(self):
        values = np.array(self.sdf_values)
        if not np.any(np.isfinite(values)):
            return None
        return int(np.sum(values[np.isfinite(values)] < -penetration_depth))

    def summary(self):
        goal_error = None
        if self.goal is not None and self.positions:
            goal_error = float(np.linalg.norm(self.positions[-1] - self.goal))

        sdf = np.array(self.sdf_values)
        sdf = sdf[np.isfinite(sdf)]
        inference = [seconds for _, seconds in self.inference_times]

        return {
            'kind': self.kind,
            'steps': len(self.times),
            'min_h': self.min_h,
            'goal_error': goal_error,
            'datasets': self.datasets,
            'rejected_models': self.rejected,
            'fallbacks': self.fallbacks,
            'active_steps': self.active_steps,
            'penetrations': self.penetrations,
            'min_sdf': float(sdf.min()) if sdf.size else None,
            'mean_inference_ms': (
                1000.0 * float(np.mean(inference)) if inference else None
            )
        }


@dataclass(frozen=True, eq=False)
class TrainingPolicy:
    """
    Online local model training.

    A local dataset is built from the currently sensed points once at
    least trigger_count new points were sensed since the last training.
    Half of the local dataset serves as pseudo-inputs for sparse models.
    """
    trigger_count: int = 100
    max_points: int = 150
    exterior_ratio: float = 0.5
    offset: float = 0.02
    kernel: str = 'se'
    model: str = 'sparse_gp'
    iters: int = 10

    def __post_init__(self):
        if self.model not in ('gp', 'sparse_gp'):
            raise InvalidParameterException(
                'Unknown model type: {model}'.format(model=self.model)
            )

        if not 0 <= self.exterior_ratio <= 0.5:
            raise InvalidParameterException(
                'exterior_ratio must be in [0, 0.5]'
            )


def train_local(cloud, policy, seed=0):
    """
    Fit a local barrier model on sensed surface points.
    """
    local = downsample(cloud, policy.max_points, seed=seed)
    n0 = len(local)
    n_plus = min(int(policy.exterior_ratio * n0), n0 - 1)
    dataset = make_safety_samples(
        local,
        n0,
        n_plus,
        n_plus,
        offset=policy.offset,
        seed=seed
    )
    sparse_m = len(dataset) // 2 if policy.model == 'sparse_gp' else None
    return synthesize(
        dataset,
        family=policy.kernel,
        sparse_m=sparse_m,
        iters=policy.iters,
        seed=seed
    )


def _check_finite(state, t):
    if not np.all(np.isfinite(state)):
        raise SimulationAbortException(
            'State became non-finite at t={t:.4f}'.format(t=t)
        )


def run_manipulator(
    chain,
    cloud,
    sensor,
    reference,
    cfg,
    policy,
    q0,
    dt=0.01,
    duration=10.0,
    seed=0,
    sdf=None,
    unfiltered=False,
    log_callback=None,
    log_level=logging.INFO
):
    """
    Kinematic manipulator q' = u with online local barrier training.

    Each step senses the cloud, retrains when the trigger fires, rectifies
    the reference joint rates and integrates with explicit Euler. With
    unfiltered set the reference is applied unchanged.
    """
    log = _get_logger(log_callback, log_level)
    q = np.asarray(q0, dtype=float).copy()
    steps = int(round(duration / dt))

    run = SimRun(
        'manipulator',
        dt,
        duration,
        ['q{index}'.format(index=index + 1) for index in range(len(q))] +
        ['px', 'py', 'pz'],
        ['u{index}'.format(index=index + 1) for index in range(len(q))],
        goal=reference.goal,
        seed=seed
    )

    seen = np.zeros(len(cloud), dtype=bool)
    fresh = 0
    model = None

    for step in range(steps + 1):
        t = step * dt
        frames = transforms(chain, q)
        position = frames[-1][:3, 3].copy()

        boresight = reference.boresight(position)
        if boresight is None:
            boresight = frames[-1][:3, 2]
        pose = sensor_pose(position + np.asarray(sensor.mount), boresight)

        visible = sense_mask(cloud.points, sensor, pose)
        fresh += int(np.sum(visible & ~seen))
        seen |= visible

        if fresh >= policy.trigger_count:
            fresh = 0
            start = time.perf_counter()
            attempt = run.datasets + run.rejected
            try:
                candidate = train_local(
                    PointCloud(cloud.points[visible], cloud.normals[visible]),
                    policy,
                    seed=seed + attempt
                )
                h_candidate = eval_h(candidate, cfg, position)
            except GPISCBFRuntimeException as error:
                run.event(t, 'train_failed', str(error))
                log.warning(
                    'Local training failed at t={t:.2f}: {error}'.format(
                        t=t,
                        error=error
                    )
                )
            else:
                if h_candidate > 0:
                    model = candidate
                    run.datasets += 1
                    run.event(
                        t,
                        'train',
                        'points={points} basis={basis}'.format(
                            points=int(np.sum(visible)),
                            basis=len(model.basis)
                        )
                    )
                else:
                    # A model must not switch the current state unsafe.
                    run.rejected += 1
                    run.event(
                        t,
                        'train_rejected',
                        'h={h!r}'.format(h=h_candidate)
                    )
                    log.warning(
                        'Local model rejected at t={t:.2f}: h={h:.4g} at '
                        'the end effector'.format(t=t, h=h_candidate)
                    )
            run.training_times.append((t, time.perf_counter() - start))

        u = reference.joint_velocity(t, q)
        h = None

        if model is not None:
            start = time.perf_counter()
            evaluation = evaluate(model, cfg, position)
            h = evaluation.h

            if not unfiltered:
                Lf_h, Lg_h = lie_degree1(
                    model,
                    cfg,
                    position,
                    np.zeros(3),
                    jacobian(chain, q),
                    position_selector=(0, 1, 2),
                    evaluation=evaluation
                )
                result = rectify(Lf_h, Lg_h, h, cfg.alpha_gain, u)
                u = result.u_rect
                run.active_steps += int(result.active)
                if result.fallback:
                    run.fallbacks += 1
                    run.event(t, 'fallback', 'h={h!r}'.format(h=h))

            run.inference_times.append((t, time.perf_counter() - start))

        run.record(t, np.concatenate([q, position]), u, h, position, sdf)

        if step == steps:
            break

        q = q + dt * u
        _check_finite(q, t + dt)

    log.info(
        'Manipulator run finished: {datasets} datasets, min h {min_h}'.format(
            datasets=run.datasets,
            min_h=run.min_h
        )
    )
    return run


@dataclass(frozen=True, eq=False)
class PdGains:
    """
    Position PD with a speed limit on the commanded velocity.
    """
    kp: float = 4.0
    kd: float = 4.0
    max_speed: float = 0.5

    def __post_init__(self):
        if not (self.kp > 0 and self.kd > 0 and self.max_speed > 0):
            raise InvalidParameterException(
                'PD gains and speed limit must be positive'
            )

    def control(self, state, goal):
        position, velocity = state[:3], state[3:]
        desired = (self.kp / self.kd) * (goal - position)
        speed = np.linalg.norm(desired)
        if speed > self.max_speed:
            desired *= self.max_speed / speed
        return self.kd * (desired - velocity)


def double_integrator(state, u):
    return np.concatenate([state[3:], u])


def rk4_step(dynamics, state, u, dt):
    k1 = dynamics(state, u)
    k2 = dynamics(state + 0.5 * dt * k1, u)
    k3 = dynamics(state + 0.5 * dt * k2, u)
    k4 = dynamics(state + dt * k3, u)
    return state + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def run_quadrotor(
    model,
    start,
    goal,
    cfg,
    gains=None,
    seed=0,
    physics_dt=0.002,
    control_rate=50.0,
    duration=10.0,
    sdf=None,
    unfiltered=False,
    u_max=None,
    log_callback=None,
    log_level=logging.INFO
):
    """
    Double integrator p' = v, v' = u tracking goal with a PD controller.

    The exponential barrier filter runs at control_rate with the control
    held between updates while RK4 integrates at physics_dt. A model of
    None flies without an obstacle.
    """
    log = _get_logger(log_callback, log_level)
    gains = gains or PdGains()
    goal = np.asarray(goal, dtype=float)
    state = np.concatenate([np.asarray(start, dtype=float), np.zeros(3)])

    if model is not None:
        h_start = eval_h(model, cfg, state[:3])
        if not h_start > 0:
            raise UnsafeStartException(
                'Start {start} is outside the safe set (h={h:.4g})'.format(
                    start=state[:3].tolist(),
                    h=h_start
                )
            )

    hold = max(1, int(round(1.0 / (control_rate * physics_dt))))
    steps = int(round(duration / physics_dt))
    run = SimRun(
        'quadrotor',
        physics_dt,
        duration,
        ['px', 'py', 'pz', 'vx', 'vy', 'vz'],
        ['ux', 'uy', 'uz'],
        goal=goal,
        seed=seed
    )
    u = np.zeros(3)

    for step in range(steps + 1):
        t = step * physics_dt
        h = None

        if step % hold == 0:
            u = gains.control(state, goal)

            if model is not None and not unfiltered:
                tic = time.perf_counter()
                terms = lie_degree2(model, cfg, state)
                result = rectify_ecbf(
                    terms.Lf2_h,
                    terms.LgLf_h,
                    terms.hdot,
                    terms.h,
                    cfg.ecbf_poles,
                    u,
                    u_max=u_max
                )
                run.inference_times.append((t, time.perf_counter() - tic))

                u = result.u_rect
                h = terms.h
                run.active_steps += int(result.active)
                if result.fallback:
                    run.fallbacks += 1
                    run.event(t, 'fallback', 'h={h!r}'.format(h=h))

        if model is not None and h is None:
            h = eval_h(model, cfg, state[:3])

        run.record(t, state, u, h, state[:3], sdf)

        if step == steps:
            break

        state = rk4_step(double_integrator, state, u, physics_dt)
        _check_finite(state, t + physics_dt)

    log.info(
        'Quadrotor run finished: goal error {error:.4f}, min h {min_h}'.format(
            error=float(np.linalg.norm(state[:3] - goal)),
            min_h=run.min_h
        )
    )
    return run


@dataclass(frozen=True, eq=False)
class Scenario:
    kind: str
    data: dict
    base_dir: str = '.'

    def get(self, key, default=None):
        return self.data.get(key, default)


def load_scenario(path):
    """
    Read and validate a scenario file.
    """
    try:
        data = read_yaml(path)
    except FileNotFoundError:
        raise ScenarioException(
            'Scenario file not found: {path}'.format(path=path)
        )

    if not isinstance(data, dict):
        raise ScenarioException(
            'Scenario {path} is not a mapping'.format(path=path)
        )

    kind = data.get('kind')
    if kind not in kinds:
        raise ScenarioException(
            'Scenario kind must be one of {kinds}, got {kind}'.format(
                kinds=', '.join(kinds),
                kind=kind
            )
        )

    for key in ('object', 'goal'):
        if key not in data:
            raise ScenarioException(
                'Scenario {path} has no {key} section'.format(
                    path=path,
                    key=key
                )
            )

    return Scenario(kind, data, os.path.dirname(os.path.abspath(path)))


def build_object(section, base_dir='.', seed=0, shift=(0.0, 0.0, 0.0)):
    """
    Object cloud and, where known, its true signed distance function.

    shift translates the object after it is built.
    """
    object_type = section.get('type')
    shift = np.asarray(shift, dtype=float)

    if object_type == 'sphere':
        center = np.asarray(section.get('center', (0.0, 0.0, 0.0))) + shift
        radius = float(section['radius'])
        cloud = sphere_cloud(radius, int(section.get('points', 400)), center)
        return cloud, sphere_sdf(center, radius)

    if object_type == 'chair_proxy':
        origin = np.asarray(section.get('origin', (0.0, 0.0, 0.0))) + shift
        cloud = chair_proxy_cloud(float(section.get('spacing', 0.02)), origin)
        boxes = [
            (origin + np.asarray(lower), origin + np.asarray(upper))
            for lower, upper in chair_proxy_boxes
        ]
        return cloud, boxes_sdf(boxes)

    if object_type == 'cloud':
        cloud = load_cloud(os.path.join(base_dir, section['path']))
        if section.get('downsample'):
            cloud = downsample(cloud, int(section['downsample']), seed=seed)
        if section.get('extents'):
            cloud = rescale_to_box(cloud, section['extents'])
        return PointCloud(cloud.points + shift, cloud.normals), None

    raise ScenarioException(
        'Unknown object type: {type}'.format(type=object_type)
    )


def cbf_config_from(section):
    section = section or {}
    return CbfConfig(
        margin_coeff=float(section.get('margin', 1.0)),
        alpha_gain=float(section.get('k0', 1.0)),
        ecbf_poles=tuple(section.get('poles', (2.0, 2.0)))
    )


def model_options(section):
    """
    Normalized model section of a quadrotor scenario.
    """
    section = section or {}
    options = {
        'points': section.get('points'),
        'downsample_mode': section.get('downsample_mode', 'voxel'),
        'n0': section.get('n0'),
        'n_plus': section.get('n_plus'),
        'n_minus': section.get('n_minus'),
        'offset': section.get('offset'),
        'type': section.get('type', 'gp'),
        'm': section.get('m'),
        'kernel': section.get('kernel', 'matern32'),
        'iters': int(section.get('iters', 15))
    }

    for key in ('points', 'n0', 'n_plus', 'n_minus', 'm'):
        if options[key] is not None:
            options[key] = int(options[key])

    if options['offset'] is not None:
        options['offset'] = float(options['offset'])

    if options['type'] not in ('gp', 'sparse_gp'):
        raise ScenarioException(
            'Unknown model type: {type}'.format(type=options['type'])
        )

    return options


def train_offline(cloud, section, seed=0):
    """
    Fit the barrier model used by the quadrotor scenarios.
    """
    options = model_options(section)
    if options['points']:
        cloud = downsample(
            cloud,
            options['points'],
            seed=seed,
            mode=options['downsample_mode']
        )

    n0 = options['n0'] or len(cloud)
    n_plus = n0 // 4 if options['n_plus'] is None else options['n_plus']
    n_minus = n_plus if options['n_minus'] is None else options['n_minus']
    dataset = make_safety_samples(
        cloud,
        n0,
        n_plus,
        n_minus,
        offset=options['offset'],
        seed=seed
    )

    sparse_m = None
    if options['type'] == 'sparse_gp':
        sparse_m = options['m'] or len(dataset) // 5

    return synthesize(
        dataset,
        family=options['kernel'],
        sparse_m=sparse_m,
        iters=options['iters'],
        seed=seed
    )


def _chain_from(scenario):
    section = scenario.get('chain', 'gen3_like')
    if section == 'gen3_like':
        return ChainModel.gen3_like()
    return ChainModel.from_dict(section)


def _vector(value, name):
    vector = np.asarray(value, dtype=float)
    if vector.shape != (3,):
        raise ScenarioException(
            'Scenario {name} must be a 3-vector, got {value}'.format(
                name=name,
                value=value
            )
        )
    return vector


def _setup_manipulator(scenario, seed):
    chain = _chain_from(scenario)
    q0 = np.asarray(scenario.get('q0'), dtype=float)
    if q0.shape != (chain.n_joints,):
        raise ScenarioException(
            'q0 must hold {count} joint angles'.format(count=chain.n_joints)
        )

    shift = np.zeros(3)
    if scenario.get('relative_to_start'):
        shift = fk(chain, q0)

    cloud, sdf = build_object(
        scenario.get('object'),
        scenario.base_dir,
        seed,
        shift
    )

    sensor_section = scenario.get('sensor') or {}
    sensor = SensorConfig.from_fov(
        float(sensor_section.get('fov_deg', 110.0)),
        float(sensor_section.get('range', 0.8)),
        tuple(sensor_section.get('mount', (0.0, 0.0, 0.0)))
    )

    reference_section = scenario.get('reference') or {}
    reference = LinearPositionReference(
        chain,
        fk(chain, q0),
        shift + _vector(scenario.get('goal'), 'goal'),
        float(reference_section.get('travel_time', 5.0)),
        gain=float(reference_section.get('gain', 2.0)),
        damping=float(reference_section.get('damping', 0.05)),
        max_joint_speed=reference_section.get('max_joint_speed')
    )

    return {
        'chain': chain,
        'cloud': cloud,
        'sensor': sensor,
        'reference': reference,
        'policy': TrainingPolicy(**(scenario.get('training') or {})),
        'q0': q0,
        'dt': float(scenario.get('dt', 0.01)),
        'duration': float(scenario.get('duration', 10.0)),
        'sdf': sdf
    }


def _setup_quadrotor(scenario, seed):
    cloud, sdf = build_object(scenario.get('object'), scenario.base_dir, seed)
    u_max = scenario.get('u_max')

    return {
        'cloud': cloud,
        'options': model_options(scenario.get('model')),
        'start': _vector(scenario.get('start'), 'start'),
        'goal': _vector(scenario.get('goal'), 'goal'),
        'gains': PdGains(**(scenario.get('gains') or {})),
        'physics_dt': float(scenario.get('dt', 0.002)),
        'control_rate': float(scenario.get('control_rate', 50.0)),
        'duration': float(scenario.get('duration', 10.0)),
        'u_max': None if u_max is None else float(u_max),
        'sdf': sdf
    }


def run_scenario(scenario, unfiltered=False, with_obstacle=True, seed=None,
                 log_callback=None, log_level=logging.INFO):
    """
    Build and run the simulation a scenario describes.

    An explicit seed overrides the scenario seed. Manipulator scenarios
    with relative_to_start set give the object and goal relative to the
    start end-effector position. Malformed scenario entries raise
    ScenarioException before any training or simulation starts.
    """
    try:
        if seed is None:
            seed = scenario.get('seed', 0)
        seed = int(seed)
        cfg = cbf_config_from(scenario.get('cbf'))

        if scenario.kind == 'manipulator':
            setup = _setup_manipulator(scenario, seed)
        else:
            setup = _setup_quadrotor(scenario, seed)
    except (AttributeError, KeyError, TypeError, ValueError) as error:
        raise ScenarioException(
            'Scenario is missing or has a malformed entry: {error}'.format(
                error=error
            )
        )

    if scenario.kind == 'manipulator':
        return run_manipulator(
            setup['chain'],
            setup['cloud'],
            setup['sensor'],
            setup['reference'],
            cfg,
            setup['policy'],
            setup['q0'],
            dt=setup['dt'],
            duration=setup['duration'],
            seed=seed,
            sdf=setup['sdf'],
            unfiltered=unfiltered,
            log_callback=log_callback,
            log_level=log_level
        )

    model, sdf = None, None
    if with_obstacle:
        model = train_offline(setup['cloud'], setup['options'], seed)
        sdf = setup['sdf']

    return run_quadrotor(
        model,
        setup['start'],
        setup['goal'],
        cfg,
        gains=setup['gains'],
        seed=seed,
        physics_dt=setup['physics_dt'],
        control_rate=setup['control_rate'],
        duration=setup['duration'],
        sdf=sdf,
        unfiltered=unfiltered,
        u_max=setup['u_max'],
        log_callback=log_callback,
        log_level=log_level
    )
