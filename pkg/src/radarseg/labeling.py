"""Automatic per-return labeling from synchronized target GPS tracks.

A return is assigned to a target when its world-frame distance to the
target's interpolated position is within the target's half-extent inflated
by the sensor measurement error and a fixed slack term. Airplane returns are
labeled by an approach/landing corridor instead, since the aircraft carries
no logged GPS.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import LocalPosition, Pose, rotate_yaw, sensor_to_world, sensor_to_world_xyz
from .returns import ClassLabel, RadarReturn, Returns

log = logging.getLogger(__name__)

DEFAULT_EPSILON_M = 1.5


class TrackError(ValueError):
    """Malformed or out-of-span GPS track."""


@dataclass(frozen=True)
class TargetSpec:
    cls: ClassLabel
    w: float
    l: float
    h: float

    def __post_init__(self):
        if min(self.w, self.l, self.h) <= 0:
            raise ValueError("target dimensions must be positive")


M300_SPEC = TargetSpec(ClassLabel.M300, w=0.67, l=0.81, h=0.43)
MINI_SPEC = TargetSpec(ClassLabel.MINI, w=0.289, l=0.245, h=0.056)
AIRPLANE_SPEC = TargetSpec(ClassLabel.AIRPLANE, w=9.45, l=6.2, h=2.34)


@dataclass(frozen=True)
class SensorErrorModel:
    range_err: float = 0.5
    azimuth_err: float = math.radians(1.0)
    elevation_err: float = math.radians(1.0)
    epsilon: float = DEFAULT_EPSILON_M

    def __post_init__(self):
        if min(self.range_err, self.azimuth_err, self.elevation_err, self.epsilon) < 0:
            raise ValueError("error parameters must be non-negative")


class TargetTrack:
    """Time-stamped target positions with the target's physical spec."""

    def __init__(self, times, positions, spec: TargetSpec):
        self.times = np.asarray(times, dtype=float).reshape(-1)
        self.positions = np.asarray(positions, dtype=float).reshape(-1, 3)
        if len(self.times) != len(self.positions):
            raise TrackError("times and positions differ in length")
        if len(self.times) == 0:
            raise TrackError("empty track")
        if np.any(np.diff(self.times) <= 0):
            raise TrackError("track timestamps must be strictly increasing")
        self.spec = spec

    def covers(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return (t >= self.times[0]) & (t <= self.times[-1])


def interpolate_track(track: TargetTrack, t) -> np.ndarray:
    """Linear interpolation of the track at time(s) ``t``.

    Returns a (3,) array for scalar ``t`` and (n, 3) otherwise. Raises
    :class:`TrackError` when any ``t`` falls outside the track span.
    """
    ts = np.asarray(t, dtype=float)
    if not np.all(track.covers(ts)):
        raise TrackError("interpolation time outside track span (no extrapolation)")
    flat = ts.reshape(-1)
    out = np.stack([np.interp(flat, track.times, track.positions[:, k]) for k in range(3)], axis=-1)
    return out[0] if ts.ndim == 0 else out


def match_threshold(spec: TargetSpec, rng, err: SensorErrorModel):
    """Right-hand side of the matching inequality for returns at range ``rng``."""
    rng = np.asarray(rng, dtype=float)
    return np.sqrt(
        (spec.l / 2 + err.range_err) ** 2
        + (spec.w / 2 + rng * math.sin(err.azimuth_err)) ** 2
        + (spec.h / 2 + rng * math.sin(err.elevation_err)) ** 2
    ) + err.epsilon


def label_returns(returns: Returns, sensor_xyz, sensor_yaw, tracks: Sequence[TargetTrack],
                  err: SensorErrorModel = SensorErrorModel()) -> np.ndarray:
    """Vectorised matcher.

    ``sensor_xyz`` (n, 3) and ``sensor_yaw`` (n,) give the synchronized sensor
    pose for each return. Returns class codes per return, 0 where no track
    matches. Tracks not covering a return's timestamp are skipped for it.
    """
    n = len(returns)
    world = sensor_to_world_xyz(returns.r, returns.az, returns.el,
                                np.asarray(sensor_xyz, float).reshape(n, 3), sensor_yaw)
    best = np.full(n, np.inf)
    out = np.zeros(n, dtype=np.uint8)
    for track in tracks:
        ok = track.covers(returns.t)
        if not ok.any():
            continue
        target = np.zeros((n, 3))
        target[ok] = interpolate_track(track, returns.t[ok])
        dist = np.linalg.norm(world - target, axis=1)
        hit = ok & (dist < match_threshold(track.spec, returns.r, err)) & (dist < best)
        best[hit] = dist[hit]
        out[hit] = int(track.spec.cls)
    return out


def label_return(ret: RadarReturn, sensor_pose: Pose, tracks: Sequence[TargetTrack],
                 err: SensorErrorModel = SensorErrorModel()) -> Optional[ClassLabel]:
    """Class of the nearest matching track, or ``None`` when unmatched."""
    if not tracks:
        return None
    world = sensor_to_world(ret.polar, sensor_pose)
    best, best_cls = math.inf, None
    for track in tracks:
        if not track.times[0] <= ret.t <= track.times[-1]:
            continue
        tx, ty, tz = _interp_point(track, ret.t)
        dist = math.sqrt((world.x - tx) ** 2 + (world.y - ty) ** 2 + (world.z - tz) ** 2)
        if dist < float(match_threshold(track.spec, ret.polar.range, err)) and dist < best:
            best, best_cls = dist, track.spec.cls
    return best_cls


def _interp_point(track: TargetTrack, t: float):
    times, pos = track.times, track.positions
    j = int(np.searchsorted(times, t, side="right"))
    if j >= len(times):
        return pos[-1]
    if j == 0:
        return pos[0]
    f = (t - times[j - 1]) / (times[j] - times[j - 1])
    return pos[j - 1] + f * (pos[j] - pos[j - 1])


@dataclass(frozen=True)
class Corridor:
    """Horizontal polygon (world x, y vertices) extruded over an altitude band."""

    polygon: tuple
    z_min: float
    z_max: float

    def __post_init__(self):
        poly = np.asarray(self.polygon, dtype=float)
        if poly.ndim != 2 or poly.shape[1] != 2 or len(poly) < 3:
            raise ValueError("corridor polygon needs at least 3 (x, y) vertices")
        if self.z_max < self.z_min:
            raise ValueError("corridor altitude band is inverted")
        object.__setattr__(self, "polygon", tuple(map(tuple, poly)))


def points_in_polygon(xy, polygon) -> np.ndarray:
    """Even-odd ray casting test for an (n, 2) array of points."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    poly = np.asarray(polygon, dtype=float)
    px, py = xy[:, 0], xy[:, 1]
    inside = np.zeros(len(xy), dtype=bool)
    x1, y1 = poly[-1]
    for x2, y2 in poly:
        crosses = (y1 > py) != (y2 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_at = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (px < x_at)
        x1, y1 = x2, y2
    return inside


def label_corridor(returns: Returns, sensor_xyz, sensor_yaw, corridor: Corridor,
                   cls: ClassLabel, labels=None) -> np.ndarray:
    """Assign ``cls`` to returns whose world position lies inside ``corridor``.

    Other entries of ``labels`` (default: the table's current labels) are left
    untouched; a new array is returned.
    """
    n = len(returns)
    labels = np.array(returns.label if labels is None else labels, dtype=np.uint8, copy=True)
    world = sensor_to_world_xyz(returns.r, returns.az, returns.el,
                                np.asarray(sensor_xyz, float).reshape(n, 3), sensor_yaw)
    inside = points_in_polygon(world[:, :2], corridor.polygon)
    inside &= (world[:, 2] >= corridor.z_min) & (world[:, 2] <= corridor.z_max)
    labels[inside] = int(cls)
    return labels


class SensorTrack:
    """Logged sensor-platform poses; interpolated at return timestamps."""

    def __init__(self, times, positions, yaws):
        self.times = np.asarray(times, dtype=float).reshape(-1)
        if np.any(np.diff(self.times) <= 0):
            raise TrackError("sensor track timestamps must be strictly increasing")
        self.positions = np.asarray(positions, dtype=float).reshape(-1, 3)
        self._yaw_unwrapped = np.unwrap(np.asarray(yaws, dtype=float).reshape(-1))

    def pose_at(self, t):
        t = np.asarray(t, dtype=float)
        if np.any((t < self.times[0]) | (t > self.times[-1])):
            raise TrackError("pose requested outside the sensor track span")
        xyz = np.stack([np.interp(t, self.times, self.positions[:, k]) for k in range(3)], axis=-1)
        return xyz, np.interp(t, self.times, self._yaw_unwrapped)


def relative_to_sensor(world_xyz, sensor_xyz, yaw) -> LocalPosition:
    """World point expressed in the sensor frame (helper for tests and tooling)."""
    v = rotate_yaw(np.asarray(world_xyz, float) - np.asarray(sensor_xyz, float), -yaw)
    return LocalPosition(*map(float, v))
