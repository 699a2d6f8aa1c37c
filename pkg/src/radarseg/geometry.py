"""Coordinate frames: geodetic to local ENU, sensor polar to cartesian, sensor to world.

Sensor frame convention: ``x`` right, ``y`` forward along boresight, ``z`` up.
Azimuth is measured from boresight towards ``+x``; elevation from the
horizontal plane towards ``+z``. The world frame is a local east-north-up
tangent plane anchored at a ground station. A yaw of ``psi`` turns the sensor
boresight clockwise from north, so a return at azimuth ``a`` has world bearing
``a + psi``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Equatorial radius; spherical tangent-plane approximation.
EARTH_RADIUS_M = 6378137.0


@dataclass(frozen=True)
class GeodeticPosition:
    lat: float
    lon: float
    alt: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")


@dataclass(frozen=True)
class LocalPosition:
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


def normalize_angle(a):
    """Wrap an angle (or array of angles) into (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return float(w) if np.ndim(w) == 0 else w


@dataclass(frozen=True)
class Pose:
    position: LocalPosition
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))


@dataclass(frozen=True)
class PolarReturn:
    range: float
    azimuth: float
    elevation: float

    def __post_init__(self):
        if self.range < 0:
            raise ValueError(f"negative range: {self.range}")


def geodetic_to_local(p: GeodeticPosition, station: GeodeticPosition) -> LocalPosition:
    """East-north-up offset of ``p`` from ``station`` on a flat tangent plane.

    Valid for separations of a few kilometres; beyond 10 km the function
    refuses rather than silently degrade.
    """
    dlat = math.radians(p.lat - station.lat)
    dlon = math.radians(p.lon - station.lon)
    # shortest way round the antimeridian
    dlon = (dlon + math.pi) % (2.0 * math.pi) - math.pi
    north = EARTH_RADIUS_M * dlat
    east = EARTH_RADIUS_M * dlon * math.cos(math.radians(station.lat))
    if math.hypot(north, east) > 10_000.0:
        raise ValueError("positions too far apart for a tangent-plane approximation")
    return LocalPosition(east, north, p.alt - station.alt)


def spherical_to_xyz(r, az, el):
    """Vectorised sensor-frame polar to cartesian; returns an (..., 3) array."""
    r, az, el = np.broadcast_arrays(np.asarray(r, float), np.asarray(az, float), np.asarray(el, float))
    ce = np.cos(el)
    return np.stack([r * np.sin(az) * ce, r * np.cos(az) * ce, r * np.sin(el)], axis=-1)


def xyz_to_spherical(xyz):
    """Inverse of :func:`spherical_to_xyz`; returns ``(r, az, el)`` arrays."""
    xyz = np.asarray(xyz, float)
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    horiz = np.hypot(x, y)
    return np.hypot(horiz, z), np.arctan2(x, y), np.arctan2(z, horiz)


def polar_to_cartesian(r: PolarReturn) -> LocalPosition:
    x, y, z = spherical_to_xyz(r.range, r.azimuth, r.elevation)
    return LocalPosition(float(x), float(y), float(z))


def cartesian_to_polar(p: LocalPosition) -> PolarReturn:
    r, az, el = xyz_to_spherical(p.as_array())
    return PolarReturn(float(r), float(az), float(el))


def rotate_yaw(xyz, yaw):
    """Rotate sensor-frame vectors into world axes (yaw only).

    ``yaw`` may be scalar or broadcast against the leading dims of ``xyz``.
    """
    xyz = np.asarray(xyz, float)
    c, s = np.cos(yaw), np.sin(yaw)
    x, y = xyz[..., 0], xyz[..., 1]
    return np.stack([x * c + y * s, -x * s + y * c, xyz[..., 2]], axis=-1)


def unrotate_yaw(xyz, yaw):
    """World axes back to sensor-frame axes; inverse of :func:`rotate_yaw`."""
    return rotate_yaw(xyz, -np.asarray(yaw, float))


def sensor_to_world_xyz(r, az, el, sensor_xyz, yaw):
    """Vectorised :func:`sensor_to_world` over arrays of returns and poses."""
    return np.asarray(sensor_xyz, float) + rotate_yaw(spherical_to_xyz(r, az, el), yaw)


def sensor_to_world(r: PolarReturn, sensor_pose: Pose) -> LocalPosition:
    """World-frame position of a return seen from ``sensor_pose``."""
    x, y, z = sensor_to_world_xyz(
        r.range, r.azimuth, r.elevation, sensor_pose.position.as_array(), sensor_pose.yaw
    )
    return LocalPosition(float(x), float(y), float(z))
