"""Synthetic airborne radar scenes.

The sensor platform hovers, climbs or yaws at a scene-specific altitude.
Aerial targets follow waypoint missions and produce returns at a Poisson
rate scaled by a per-class detection coverage (two elliptic bicones sharing
their base). Ground and infrastructure returns come from casting random rays
across the sensor field of view against a flat ground plane and boxes.

A campaign is a list of scene instances laid out back to back in time; the
returned :class:`Simulation` carries the labeled return stream together with
the logged sensor poses, target GPS tracks and airplane corridors needed to
re-derive labels.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

from .config import ConfigError, load_flat, parse_flat, section
from .geometry import LocalPosition, rotate_yaw, unrotate_yaw, xyz_to_spherical
from .labeling import (AIRPLANE_SPEC, M300_SPEC, MINI_SPEC, Corridor, SensorErrorModel,
                       TargetSpec)
from .returns import ClassLabel, Returns

log = logging.getLogger(__name__)

FOV_AZ_HALF = math.radians(60.0)
FOV_EL_HALF = math.radians(12.5)
DOPPLER_RESOLUTION = 0.1
GPS_RATE_HZ = 10.0
MIN_RANGE = 1.0  # m; closer static hits are discarded

# fraction of the normalised bicone radius with full detection probability
_CORE_FRACTION = 0.5


@dataclass(frozen=True)
class DetectionCoverage:
    max_range: float
    azimuth_half_angle: float
    elevation_half_angle: float
    peak_offset_range: float
    near_field_taper: float = 0.0

    def __post_init__(self):
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")
        if self.azimuth_half_angle <= 0 or self.elevation_half_angle <= 0:
            raise ValueError("coverage half-angles must be positive")
        if not 0 < self.peak_offset_range < self.max_range:
            raise ValueError("peak_offset_range must lie in (0, max_range)")
        if not 0.0 <= self.near_field_taper <= 1.0:
            raise ValueError("near_field_taper must be in [0, 1]")

    def probability(self, rel_xyz) -> np.ndarray:
        """Detection probability for sensor-frame offsets (..., 3)."""
        rel = np.asarray(rel_xyz, dtype=float)
        lateral, forward, vertical = rel[..., 0], rel[..., 1], rel[..., 2]
        rng = np.linalg.norm(rel, axis=-1)
        peak = self.peak_offset_range
        # half-width grows linearly to the peak range, then closes to the tip
        grow = np.clip(forward / peak, 0.0, None)
        shrink = np.clip((self.max_range - forward) / (self.max_range - peak), 0.0, None)
        scale = np.minimum(grow, shrink)
        w_az = scale * peak * math.tan(self.azimuth_half_angle)
        w_el = scale * peak * math.tan(self.elevation_half_angle)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            rho = np.sqrt((lateral / w_az) ** 2 + (vertical / w_el) ** 2)
        rho = np.where(scale > 0, rho, np.inf)
        t = np.clip((rho - _CORE_FRACTION) / (1.0 - _CORE_FRACTION), 0.0, 1.0)
        p = 0.5 * (1.0 + np.cos(np.pi * t))
        near = 1.0 - self.near_field_taper * np.clip(1.0 - forward / (0.1 * self.max_range), 0.0, 1.0)
        p = p * near
        inside = (forward > 0) & (rng <= self.max_range) & (rho < 1.0)
        return np.where(inside, p, 0.0)


def in_coverage(coverage: DetectionCoverage, relative_position: LocalPosition) -> float:
    return float(coverage.probability(relative_position.as_array()))


@dataclass(frozen=True)
class TargetProfile:
    spec: TargetSpec
    coverage: DetectionCoverage
    rcs_mean: float
    rcs_spread: float
    return_rate: float
    max_speed: float

    def __post_init__(self):
        if self.return_rate <= 0:
            raise ValueError("return_rate must be positive")
        if self.rcs_spread < 0:
            raise ValueError("rcs_spread must be non-negative")


M300_PROFILE = TargetProfile(
    M300_SPEC,
    DetectionCoverage(90.0, math.radians(30.0), math.radians(10.0), 35.0, 0.2),
    rcs_mean=6.0, rcs_spread=7.0, return_rate=140.0, max_speed=23.0,
)
MINI_PROFILE = TargetProfile(
    MINI_SPEC,
    DetectionCoverage(40.0, math.radians(15.0), math.radians(3.0), 15.0, 0.2),
    rcs_mean=-4.0, rcs_spread=7.0, return_rate=50.0, max_speed=16.0,
)
AIRPLANE_PROFILE = TargetProfile(
    AIRPLANE_SPEC,
    DetectionCoverage(350.0, math.radians(55.0), math.radians(12.0), 150.0, 0.0),
    rcs_mean=18.0, rcs_spread=4.0, return_rate=12.0, max_speed=175.0 / 3.6,
)
PROFILES = {"m300": M300_PROFILE, "mini": MINI_PROFILE, "airplane": AIRPLANE_PROFILE}


@dataclass
class Mission:
    """Piecewise-linear path: ``waypoints`` rows are ``(t, x, y, z)`` in world frame."""

    waypoints: np.ndarray
    pattern: str = "manual"

    def __post_init__(self):
        self.waypoints = np.asarray(self.waypoints, dtype=float).reshape(-1, 4)
        if len(self.waypoints) < 1:
            raise ConfigError("mission needs at least one waypoint")
        if np.any(np.diff(self.waypoints[:, 0]) <= 0):
            raise ConfigError("mission waypoint times must be increasing")

    def speeds(self) -> np.ndarray:
        d = np.diff(self.waypoints, axis=0)
        if len(d) == 0:
            return np.zeros(0)
        return np.linalg.norm(d[:, 1:], axis=1) / d[:, 0]

    def check_speed(self, max_speed: float) -> None:
        s = self.speeds()
        if len(s) and s.max() > max_speed * (1 + 1e-9):
            raise ConfigError(f"mission speed {s.max():.2f} m/s exceeds actor maximum {max_speed:.2f} m/s")

    def state(self, t):
        """Position (n, 3) and velocity (n, 3) at times ``t``; holds outside the span."""
        t = np.asarray(t, dtype=float).reshape(-1)
        wp = self.waypoints
        pos = np.stack([np.interp(t, wp[:, 0], wp[:, k]) for k in (1, 2, 3)], axis=-1)
        vel = np.zeros_like(pos)
        if len(wp) > 1:
            seg = np.clip(np.searchsorted(wp[:, 0], t, side="right") - 1, 0, len(wp) - 2)
            dt = wp[seg + 1, 0] - wp[seg, 0]
            v = (wp[seg + 1, 1:] - wp[seg, 1:]) / dt[:, None]
            inside = (t >= wp[0, 0]) & (t < wp[-1, 0])
            vel[inside] = v[inside]
        return pos, vel


@dataclass
class SensorPlan:
    """Sensor platform path plus a linear yaw schedule ``yaw0 + yaw_rate * (t - t0)``."""

    mission: Mission
    yaw0: float
    yaw_rate: float = 0.0

    def state(self, t):
        pos, vel = self.mission.state(t)
        t = np.asarray(t, dtype=float).reshape(-1)
        return pos, vel, self.yaw0 + self.yaw_rate * (t - self.mission.waypoints[0, 0])


@dataclass(frozen=True)
class Box:
    """Axis-aligned infrastructure block resting on the ground plane."""

    cx: float
    cy: float
    w: float
    l: float
    h: float

    @property
    def lo(self):
        return np.array([self.cx - self.w / 2, self.cy - self.l / 2, 0.0])

    @property
    def hi(self):
        return np.array([self.cx + self.w / 2, self.cy + self.l / 2, self.h])


@dataclass
class Actor:
    name: str
    profile: TargetProfile
    mission: Mission


@dataclass
class Scene:
    start: float
    duration: float
    sensor: SensorPlan
    actors: list = field(default_factory=list)
    ground: bool = True
    boxes: list = field(default_factory=list)
    kind: str = ""


@dataclass
class StaticClutter:
    ray_rate: float = 6000.0
    max_range: float = 120.0
    ground_rcs: tuple = (-6.0, 5.0)
    infra_rcs: tuple = (6.0, 6.0)


@dataclass
class SceneRecipe:
    scenes: list
    seed: int = 0
    step: float = 0.05
    noise: SensorErrorModel = field(default_factory=SensorErrorModel)
    clutter: StaticClutter = field(default_factory=StaticClutter)
    doppler_resolution: float = DOPPLER_RESOLUTION

    def __post_init__(self):
        if self.step <= 0:
            raise ConfigError("simulation step must be positive")

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.scenes)


@dataclass
class TrackLog:
    spec: TargetSpec
    times: np.ndarray
    positions: np.ndarray


@dataclass
class Simulation:
    returns: Returns
    sensor_segments: list          # list of (times, positions, yaws)
    target_tracks: list            # list of TrackLog, GPS-equipped targets only
    corridors: list                # list of (Corridor, t_min, t_max, class)
    duration: float


def doppler_of(target_velocity, sensor_velocity, line_of_sight) -> float:
    """Radial component of the relative velocity along a unit line of sight."""
    los = np.asarray(line_of_sight, dtype=float)
    n = np.linalg.norm(los)
    if n == 0:
        raise ValueError("zero-length line of sight")
    if abs(n - 1.0) > 1e-9:
        raise ValueError("line of sight must be a unit vector")
    rel = np.asarray(target_velocity, float) - np.asarray(sensor_velocity, float)
    return float(rel @ los)


def _radial(rel_vel, los):
    return np.einsum("ij,ij->i", rel_vel, los)


def _quantize(v, res):
    q = np.round(v / res) * res if res > 0 else v
    return q + 0.0  # no negative zeros


def _measure(rng_gen, world, sensor_pos, yaw, noise: SensorErrorModel):
    """Noisy sensor-frame polar measurement of world points; also returns the LoS."""
    rel = world - sensor_pos
    r, az, el = xyz_to_spherical(unrotate_yaw(rel, yaw))
    n = len(r)
    r = np.abs(r + rng_gen.normal(0.0, noise.range_err, n))
    az = az + rng_gen.normal(0.0, noise.azimuth_err, n)
    el = el + rng_gen.normal(0.0, noise.elevation_err, n)
    with np.errstate(invalid="ignore", divide="ignore"):
        los = rel / np.linalg.norm(rel, axis=1, keepdims=True)
    return r, az, el, los


def _in_fov(az, el):
    return (np.abs(az) <= FOV_AZ_HALF) & (np.abs(el) <= FOV_EL_HALF)


def _simulate_actor(gen, scene: Scene, actor: Actor, recipe: SceneRecipe) -> Returns:
    step = recipe.step
    t0 = scene.start + step * np.arange(int(math.ceil(scene.duration / step - 1e-9)))
    tc = np.minimum(t0 + step / 2, scene.start + scene.duration)
    pos, _ = actor.mission.state(tc)
    spos, _, syaw = scene.sensor.state(tc)
    rel = unrotate_yaw(pos - spos, syaw)
    p = actor.profile.coverage.probability(rel)
    span = np.minimum(step, scene.start + scene.duration - t0)
    counts = gen.poisson(actor.profile.return_rate * span * p)
    total = int(counts.sum())
    if total == 0:
        return Returns.empty()
    idx = np.repeat(np.arange(len(t0)), counts)
    t = t0[idx] + gen.uniform(0.0, 1.0, total) * span[idx]
    tpos, tvel = actor.mission.state(t)
    spos, svel, syaw = scene.sensor.state(t)
    spec = actor.profile.spec
    half = np.array([spec.w, spec.l, spec.h]) / 2.0
    world = tpos + gen.uniform(-1.0, 1.0, (total, 3)) * half
    r, az, el, los = _measure(gen, world, spos, syaw, recipe.noise)
    dop = _quantize(_radial(tvel - svel, los), recipe.doppler_resolution)
    rcs = gen.normal(actor.profile.rcs_mean, actor.profile.rcs_spread, total)
    keep = _in_fov(az, el)
    label = np.full(total, int(spec.cls), dtype=np.uint8)
    return Returns(t, r, az, el, dop, rcs, label)[keep]


def _ray_box_hits(origin, dirs, box: Box):
    """Entry distance along each ray into ``box`` (inf where missed)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t1 = (box.lo - origin) * inv
        t2 = (box.hi - origin) * inv
    tmin = np.nanmax(np.minimum(t1, t2), axis=1)
    tmax = np.nanmin(np.maximum(t1, t2), axis=1)
    hit = (tmax >= np.maximum(tmin, 0.0))
    return np.where(hit, np.maximum(tmin, 0.0), np.inf)


def _simulate_static(gen, scene: Scene, recipe: SceneRecipe) -> Returns:
    cl = recipe.clutter
    if not scene.ground and not scene.boxes:
        return Returns.empty()
    n = int(gen.poisson(cl.ray_rate * scene.duration))
    if n == 0:
        return Returns.empty()
    t = np.sort(scene.start + gen.uniform(0.0, scene.duration, n))
    spos, svel, syaw = scene.sensor.state(t)
    az = gen.uniform(-FOV_AZ_HALF, FOV_AZ_HALF, n)
    el = gen.uniform(-FOV_EL_HALF, FOV_EL_HALF, n)
    ce = np.cos(el)
    dirs = rotate_yaw(np.stack([np.sin(az) * ce, np.cos(az) * ce, np.sin(el)], axis=1), syaw)
    dist = np.full(n, np.inf)
    cls = np.zeros(n, dtype=np.uint8)
    if scene.ground:
        with np.errstate(divide="ignore", invalid="ignore"):
            tg = np.where(dirs[:, 2] < 0, -spos[:, 2] / dirs[:, 2], np.inf)
        dist = tg
        cls[:] = ClassLabel.GROUND
    for box in scene.boxes:
        tb = _ray_box_hits(spos, dirs, box)
        closer = tb < dist
        dist[closer] = tb[closer]
        cls[closer] = ClassLabel.INFRASTRUCTURE
    # detection falls off over the last 30% of the characterised range
    frac = np.clip((dist / cl.max_range - 0.7) / 0.3, 0.0, 1.0)
    p = np.where((dist <= cl.max_range) & (dist >= MIN_RANGE), 0.5 * (1 + np.cos(np.pi * frac)), 0.0)
    keep = gen.uniform(0.0, 1.0, n) < p
    if not keep.any():
        return Returns.empty()
    t, spos, svel, syaw = t[keep], spos[keep], svel[keep], syaw[keep]
    world = spos + dirs[keep] * dist[keep][:, None]
    cls = cls[keep]
    m = len(t)
    r, az_m, el_m, los = _measure(gen, world, spos, syaw, recipe.noise)
    dop = _quantize(_radial(-svel, los), recipe.doppler_resolution)
    ground = cls == ClassLabel.GROUND
    rcs = np.where(ground, gen.normal(*cl.ground_rcs, m), gen.normal(*cl.infra_rcs, m))
    keep = _in_fov(az_m, el_m)
    return Returns(t, r, az_m, el_m, dop, rcs, cls)[keep]


def _gps_log(scene: Scene, mission: Mission):
    times = np.arange(scene.start, scene.start + scene.duration, 1.0 / GPS_RATE_HZ)
    times = np.append(times, scene.start + scene.duration)
    times = np.unique(times)
    return times, mission.state(times)[0]


def simulate(recipe: SceneRecipe) -> Simulation:
    """Run every scene; deterministic for a fixed ``recipe.seed``."""
    for scene in recipe.scenes:
        for actor in scene.actors:
            actor.mission.check_speed(actor.profile.max_speed)
    parts, sensor_segments, tracks, corridors = [], [], [], []
    for i, scene in enumerate(recipe.scenes):
        if scene.duration <= 0:
            continue
        gen = np.random.default_rng([recipe.seed, i])
        parts.append(_simulate_static(gen, scene, recipe))
        for actor in scene.actors:
            parts.append(_simulate_actor(gen, scene, actor, recipe))
            if actor.profile.spec.cls == ClassLabel.M300:
                times, pos = _gps_log(scene, actor.mission)
                tracks.append(TrackLog(actor.profile.spec, times, pos))
            elif actor.profile.spec.cls == ClassLabel.AIRPLANE:
                corridors.append((_corridor_around(actor.mission), scene.start,
                                  scene.start + scene.duration, ClassLabel.AIRPLANE))
        times, _ = _gps_log(scene, scene.sensor.mission)
        spos, _, syaw = scene.sensor.state(times)
        sensor_segments.append((times, spos, syaw))
    returns = Returns.concat(parts).sorted_by_time()
    return Simulation(returns, sensor_segments, tracks, corridors, recipe.duration)


def _corridor_around(mission: Mission, half_width: float = 25.0, band: float = 20.0) -> Corridor:
    """Rectangle around a straight-leg flight path, padded by ``half_width``."""
    xy = mission.waypoints[:, 1:3]
    a, b = xy[0], xy[-1]
    d = b - a
    d = d / (np.linalg.norm(d) or 1.0)
    nrm = np.array([-d[1], d[0]])
    a, b = a - d * half_width, b + d * half_width
    poly = [a + nrm * half_width, b + nrm * half_width, b - nrm * half_width, a - nrm * half_width]
    z = mission.waypoints[:, 3]
    return Corridor(tuple(map(tuple, poly)), float(z.min() - band), float(z.max() + band))


# ---------------------------------------------------------------------------
# mission patterns

def _timed(points, speeds, start, duration, pattern):
    """Turn a polyline into a timed mission truncated/held to ``duration``."""
    points = np.asarray(points, dtype=float)
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    speeds = np.broadcast_to(np.asarray(speeds, float), seg.shape)
    dts = np.where(seg > 0, seg / np.maximum(speeds, 1e-9), speeds)  # zero-length = dwell of `speed` s
    times = start + np.concatenate([[0.0], np.cumsum(dts)])
    keep = np.concatenate([[True], dts > 0])
    times, points = times[keep], points[keep]
    end = start + duration
    if times[-1] > end:
        k = int(np.searchsorted(times, end))
        last = np.array([np.interp(end, times, points[:, j]) for j in range(3)])
        times = np.append(times[:k], end)
        points = np.vstack([points[:k], last])
        if len(times) > 1 and times[-1] <= times[-2]:
            times, points = times[:-1], points[:-1]
    return Mission(np.column_stack([times, points]), pattern)


def _bearing_point(origin, yaw, bearing, rng_m, dz):
    d = rotate_yaw(np.array([math.sin(bearing), math.cos(bearing), 0.0]), yaw)
    return origin + d * rng_m + np.array([0.0, 0.0, dz])


def make_mission(pattern: str, profile: TargetProfile, origin, yaw, start, duration,
                 gen, range_band=None, speed_band=None, elevation_band=None,
                 min_height: float = 1.0) -> Mission:
    """Waypoint mission of the named pattern around the sensor boresight.

    ``elevation_band`` bounds waypoint elevation as fractions of the target's
    coverage half-angle; waypoints never go below ``min_height`` above ground.
    """
    cov = profile.coverage
    r_lo, r_hi = range_band or (0.15 * cov.max_range, 0.85 * cov.max_range)
    v_lo, v_hi = speed_band or (0.2 * profile.max_speed, 0.5 * profile.max_speed)
    az_half = cov.azimuth_half_angle
    el_half = cov.elevation_half_angle
    origin = np.asarray(origin, float)

    e_lo, e_hi = elevation_band or (-0.6, 0.6)

    def dz(r):
        return r * math.tan(el_half) * gen.uniform(e_lo, e_hi)

    pts, speeds = [], []
    if pattern == "zigzag":
        n_legs = int(gen.integers(4, 9))
        ranges = np.linspace(r_lo, r_hi, n_legs)
        if gen.uniform() < 0.5:
            ranges = ranges[::-1]
        side = 1.0
        for r in ranges:
            h = dz(r)
            for s in (-side, side):
                pts.append(_bearing_point(origin, yaw, s * 1.0 * az_half, r, h))
            side = -side
        v = gen.uniform(v_lo, v_hi)
        speeds = [v] * (len(pts) - 1)
    elif pattern == "radial":
        while len(pts) < 12:
            b = gen.uniform(-0.8, 0.8) * az_half
            r_far = gen.uniform(0.6 * r_hi, 1.1 * r_hi)
            h = dz(0.5 * (r_lo + r_far))
            pts += [_bearing_point(origin, yaw, b, r_lo, h), _bearing_point(origin, yaw, b, r_far, h)]
        v = gen.uniform(v_lo, v_hi)
        speeds = [v] * (len(pts) - 1)
    elif pattern == "manual":
        p = _bearing_point(origin, yaw, gen.uniform(-0.7, 0.7) * az_half, gen.uniform(r_lo, r_hi), 0.0)
        pts.append(p)
        while len(pts) < 16:
            r = gen.uniform(r_lo, r_hi)
            nxt = _bearing_point(origin, yaw, gen.uniform(-0.9, 0.9) * az_half, r, dz(r))
            if gen.uniform() < 0.3:
                pts.append(pts[-1].copy())               # hover in place
                speeds.append(gen.uniform(1.0, 4.0))     # dwell seconds
            pts.append(nxt)
            speeds.append(gen.uniform(v_lo, v_hi))
    elif pattern == "circuit":
        # straight pass across the field of view, e.g. an approach or climb-out leg
        r = gen.uniform(r_lo, r_hi)
        b = gen.uniform(-0.3, 0.3) * az_half
        centre = _bearing_point(origin, yaw, b, r, gen.uniform(-0.4, 0.4) * r * math.tan(el_half))
        heading = yaw + b + math.pi / 2 + gen.uniform(-0.3, 0.3)
        d = np.array([math.sin(heading), math.cos(heading), 0.0])
        v = gen.uniform(v_lo, v_hi)
        half_len = 0.5 * v * duration
        if gen.uniform() < 0.5:
            d = -d
        pts = [centre - d * half_len, centre + d * half_len]
        speeds = [v]
    else:
        raise ConfigError(f"unknown mission pattern {pattern!r}")
    pts = np.asarray(pts, float)
    pts[:, 2] = np.maximum(pts[:, 2], min_height)
    return _timed(pts, speeds, start, duration, pattern)


# ---------------------------------------------------------------------------
# recipe files

def _draw(gen, spec):
    """Scalar, or uniform draw from a ``[lo, hi]`` pair."""
    if isinstance(spec, (list, tuple)):
        lo, hi = spec
        return float(gen.uniform(lo, hi))
    return float(spec)


def _scene_instance(gen, kind: str, cfg: dict, start: float, duration: float) -> Scene:
    alt = _draw(gen, cfg.get("sensor.altitude", 30.0))
    yaw = math.radians(_draw(gen, cfg.get("sensor.yaw_deg", [-180.0, 180.0])))
    yaw_rate = math.radians(_draw(gen, cfg.get("sensor.yaw_rate_deg", 0.0)))
    climb = _draw(gen, cfg.get("sensor.climb_rate", 0.0))
    speed = _draw(gen, cfg.get("sensor.speed", 0.0))
    heading = yaw + math.radians(_draw(gen, cfg.get("sensor.heading_deg", 0.0)))
    end_alt = max(alt + climb * duration, 1.0)
    end_x, end_y = speed * duration * math.sin(heading), speed * duration * math.cos(heading)
    origin = np.array([0.0, 0.0, alt])
    moving = bool(climb or speed)
    sensor = SensorPlan(Mission([[start, 0.0, 0.0, alt], [start + duration, end_x, end_y, end_alt]],
                                "manual" if moving else "hover"), yaw, yaw_rate)
    boxes = []
    for b in cfg.get("boxes", []):
        boxes.append(Box(*b))
    n_boxes = int(round(_draw(gen, cfg.get("infra.count", 0))))
    for _ in range(n_boxes):
        bearing = yaw + gen.uniform(-0.9, 0.9) * FOV_AZ_HALF
        r = gen.uniform(*cfg.get("infra.range", [25.0, 110.0]))
        boxes.append(Box(r * math.sin(bearing), r * math.cos(bearing),
                         _draw(gen, cfg.get("infra.width", [4.0, 20.0])),
                         _draw(gen, cfg.get("infra.length", [4.0, 20.0])),
                         _draw(gen, cfg.get("infra.height", [2.0, 10.0]))))
    actors = []
    for entry in cfg.get("actors", []):
        name, _, pattern = entry.partition(":")
        choices = pattern.split("|") if pattern else ["manual"]
        pattern = choices[int(gen.integers(len(choices)))]
        if name not in PROFILES:
            raise ConfigError(f"unknown actor {name!r}")
        profile = PROFILES[name]
        prefix = section(cfg, name)
        mission = make_mission(pattern, profile, origin, yaw, start, duration, gen,
                               range_band=prefix.get("range"), speed_band=prefix.get("speed"),
                               elevation_band=prefix.get("elevation"))
        actors.append(Actor(name, profile, mission))
    return Scene(start, duration, sensor, actors, bool(cfg.get("ground", True)), boxes, kind)


def recipe_from_flat(values: dict, duration: Optional[float] = None,
                     seed: Optional[int] = None) -> SceneRecipe:
    """Build a campaign from a flat recipe mapping.

    Scene kinds declared under ``scene.<kind>.*`` share the campaign duration
    by ``weight``; each kind is cut into instances of ``segment`` seconds with
    freshly drawn sensor poses, infrastructure and missions. Instances are
    shuffled in time.
    """
    seed = int(values.get("seed", 0) if seed is None else seed)
    duration = float(values.get("duration", 0.0) if duration is None else duration)
    if duration < 0:
        raise ConfigError("recipe duration must be non-negative")
    kinds = sorted({k.split(".")[1] for k in values if k.startswith("scene.")})
    shared = section(values, "defaults")
    cfgs = {k: {**shared, **section(values, f"scene.{k}")} for k in kinds}
    weights = np.array([float(cfgs[k].get("weight", 1.0)) for k in kinds])
    if kinds and (weights < 0).any():
        raise ConfigError("scene weights must be non-negative")
    gen = np.random.default_rng([seed, 0xC0FFEE])
    plan = []
    if kinds and duration > 0 and weights.sum() > 0:
        for kind, w in zip(kinds, weights / weights.sum()):
            total = w * duration
            seg = float(cfgs[kind].get("segment", 30.0))
            n = int(total // seg)
            rest = total - n * seg
            plan += [(kind, seg)] * n + ([(kind, rest)] if rest > 1e-6 else [])
        order = gen.permutation(len(plan))
        plan = [plan[i] for i in order]
    scenes, t = [], 0.0
    for kind, d in plan:
        scenes.append(_scene_instance(gen, kind, cfgs[kind], t, d))
        t += d
    noise = SensorErrorModel(
        range_err=float(values.get("noise.range_m", 0.5)),
        azimuth_err=math.radians(float(values.get("noise.azimuth_deg", 1.0))),
        elevation_err=math.radians(float(values.get("noise.elevation_deg", 1.0))),
    )
    clutter = StaticClutter(
        ray_rate=float(values.get("static.ray_rate", 6000.0)),
        max_range=float(values.get("static.max_range", 120.0)),
        ground_rcs=tuple(values.get("static.ground_rcs", [-6.0, 5.0])),
        infra_rcs=tuple(values.get("static.infra_rcs", [6.0, 6.0])),
    )
    return SceneRecipe(scenes, seed, float(values.get("step", 0.05)), noise, clutter)


def load_recipe(path, duration: Optional[float] = None, seed: Optional[int] = None) -> SceneRecipe:
    return recipe_from_flat(load_flat(path), duration=duration, seed=seed)


def bundled_recipe_text(name: str = "campaign") -> str:
    return resources.files("radarseg.recipes").joinpath(f"{name}.recipe").read_text()


def campaign_recipe(duration: Optional[float] = None, seed: Optional[int] = None) -> SceneRecipe:
    """The bundled default campaign."""
    return recipe_from_flat(parse_flat(bundled_recipe_text()), duration=duration, seed=seed)
