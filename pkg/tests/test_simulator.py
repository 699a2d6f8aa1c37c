import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from radarseg.config import ConfigError, parse_flat
from radarseg.geometry import LocalPosition
from radarseg.returns import ClassLabel
from radarseg.simulator import (
    AIRPLANE_PROFILE, M300_PROFILE, MINI_PROFILE, Actor, Box, DetectionCoverage, Mission, Scene,
    SceneRecipe, SensorPlan, bundled_recipe_text, doppler_of, in_coverage, make_mission, recipe_from_flat,
    simulate,
)


def hover(alt=30.0, yaw=0.0, start=0.0, duration=20.0):
    return SensorPlan(Mission([[start, 0.0, 0.0, alt], [start + duration, 0.0, 0.0, alt]], "hover"), yaw)


def run(scenes, seed=7):
    return simulate(SceneRecipe(scenes, seed=seed))


# -- coverage ------------------------------------------------------------------------

def test_coverage_core_and_hull():
    cov = M300_PROFILE.coverage
    assert in_coverage(cov, LocalPosition(0.0, cov.max_range / 2, 0.0)) == 1.0
    assert in_coverage(cov, LocalPosition(0.0, cov.max_range + 1.0, 0.0)) == 0.0
    assert in_coverage(cov, LocalPosition(0.0, -10.0, 0.0)) == 0.0


def test_m300_detected_near_90m():
    cov = M300_PROFILE.coverage
    assert in_coverage(cov, LocalPosition(0.0, 85.0, 0.0)) > 0.0
    assert in_coverage(cov, LocalPosition(0.0, 95.0, 0.0)) == 0.0


def test_mini_range_below_40m():
    cov = MINI_PROFILE.coverage
    assert in_coverage(cov, LocalPosition(0.0, 38.0, 0.0)) > 0.0
    assert in_coverage(cov, LocalPosition(0.0, 41.0, 0.0)) == 0.0


@given(st.floats(-200, 200), st.floats(-5, 400), st.floats(-100, 100))
def test_coverage_is_probability(x, y, z):
    for prof in (M300_PROFILE, MINI_PROFILE, AIRPLANE_PROFILE):
        p = in_coverage(prof.coverage, LocalPosition(x, y, z))
        assert 0.0 <= p <= 1.0


def test_coverage_tapers_sideways():
    cov = M300_PROFILE.coverage
    xs = np.linspace(0, 30, 61)
    p = cov.probability(np.column_stack([xs, np.full_like(xs, 40.0), np.zeros_like(xs)]))
    assert np.all(np.diff(p) <= 1e-12) and p[0] == 1.0 and p[-1] == 0.0


def test_coverage_validation():
    with pytest.raises(ValueError):
        DetectionCoverage(10.0, 0.1, 0.1, 12.0)
    with pytest.raises(ValueError):
        DetectionCoverage(-1.0, 0.1, 0.1, 0.5)


# -- doppler ---------------------------------------------------------------------------

def test_doppler_examples():
    assert doppler_of([0, 0, 0], [0, 0, 0], [0, 1, 0]) == 0.0
    assert doppler_of([0, -5, 0], [0, 0, 0], [0, 1, 0]) == -5.0
    assert doppler_of([3, 4, 0], [0, 1, 0], [0.6, 0.8, 0]) == pytest.approx(4.2)


def test_doppler_rejects_bad_los():
    with pytest.raises(ValueError):
        doppler_of([1, 0, 0], [0, 0, 0], [0, 0, 0])
    with pytest.raises(ValueError):
        doppler_of([1, 0, 0], [0, 0, 0], [0, 2, 0])


def test_head_on_m300_closing_doppler():
    # inbound along boresight at 10 m/s, from 80 m to 20 m
    m = Mission([[0.0, 0.0, 80.0, 30.0], [6.0, 0.0, 20.0, 30.0]])
    sim = run([Scene(0.0, 6.0, hover(), [Actor("m300", M300_PROFILE, m)], ground=False)])
    ret = sim.returns
    assert len(ret) > 50
    assert np.all(ret.label == ClassLabel.M300)
    assert np.median(ret.doppler) == pytest.approx(-10.0, abs=0.3)


# -- scenes ------------------------------------------------------------------------------

def test_empty_sky_has_almost_no_returns():
    # high and level: the ground is beyond the characterised range at every elevation
    sim = run([Scene(0.0, 30.0, hover(alt=90.0), [], ground=True)])
    assert len(sim.returns) / 30.0 < 1.0


def test_ground_rate_thousands_per_second():
    sim = run([Scene(0.0, 10.0, hover(alt=10.0), [], ground=True, boxes=[Box(0, 40, 10, 10, 8)])])
    assert len(sim.returns) / 10.0 > 500
    assert set(np.unique(sim.returns.label)) == {ClassLabel.GROUND, ClassLabel.INFRASTRUCTURE}


def test_hovering_static_world_has_zero_doppler():
    sim = run([Scene(0.0, 5.0, hover(alt=8.0), [], ground=True, boxes=[Box(5, 30, 6, 6, 5)])])
    assert len(sim.returns) > 0
    assert np.all(sim.returns.doppler == 0.0)


def test_no_returns_outside_coverage():
    far = Mission([[0.0, 0.0, 200.0, 30.0], [10.0, 0.0, 201.0, 30.0]])
    behind = Mission([[0.0, 0.0, -40.0, 30.0], [10.0, 0.0, -41.0, 30.0]])
    actors = [Actor("m300", M300_PROFILE, far), Actor("mini", MINI_PROFILE, behind)]
    sim = run([Scene(0.0, 10.0, hover(), actors, ground=False)])
    assert len(sim.returns) == 0


def test_deterministic_for_seed():
    scenes = [Scene(0.0, 8.0, hover(alt=12.0), [Actor("m300", M300_PROFILE,
                                                        Mission([[0, -5, 30, 12], [8, 5, 40, 14]]))])]
    a, b, c = run(scenes, 3), run(scenes, 3), run(scenes, 4)
    assert a.returns.equals(b.returns)
    assert not a.returns.equals(c.returns)


def test_infeasible_speed_rejected():
    fast = Mission([[0.0, 0.0, 10.0, 5.0], [1.0, 0.0, 60.0, 5.0]])  # 50 m/s
    with pytest.raises(ConfigError):
        run([Scene(0.0, 1.0, hover(), [Actor("m300", M300_PROFILE, fast)])])


def test_mission_validation():
    with pytest.raises(ConfigError):
        Mission([[1.0, 0, 0, 0], [1.0, 1, 0, 0]])
    m = Mission([[0, 0, 0, 0], [2, 2, 0, 0]])
    pos, vel = m.state([1.0, 5.0])
    assert pos.tolist() == [[1, 0, 0], [2, 0, 0]]
    assert vel.tolist() == [[1, 0, 0], [0, 0, 0]]


@pytest.mark.parametrize("pattern", ["zigzag", "radial", "manual", "circuit"])
def test_mission_patterns_respect_speed(pattern):
    gen = np.random.default_rng(0)
    prof = AIRPLANE_PROFILE if pattern == "circuit" else M300_PROFILE
    m = make_mission(pattern, prof, [0, 0, 30], 0.3, 10.0, 40.0, gen)
    m.check_speed(prof.max_speed)
    assert m.waypoints[0, 0] >= 10.0 and m.waypoints[-1, 0] <= 50.0 + 1e-9
    assert m.waypoints[:, 3].min() >= 1.0


def test_unknown_pattern():
    with pytest.raises(ConfigError):
        make_mission("loop", M300_PROFILE, [0, 0, 0], 0.0, 0.0, 10.0, np.random.default_rng(0))


def test_rcs_ordering_across_seeds():
    m300 = Mission([[0, 0, 30, 30], [20, 0, 50, 30]])
    mini = Mission([[0, 0, 15, 30], [20, 0, 25, 30]])
    for seed in range(5):
        sim = run([Scene(0.0, 20.0, hover(), [Actor("m300", M300_PROFILE, m300),
                                              Actor("mini", MINI_PROFILE, mini)], ground=False)], seed)
        ret = sim.returns
        assert ret.rcs[ret.label == ClassLabel.M300].mean() > ret.rcs[ret.label == ClassLabel.MINI].mean()


def test_gps_log_and_corridor_emitted():
    plane = make_mission("circuit", AIRPLANE_PROFILE, [0, 0, 40], 0.0, 0.0, 20.0, np.random.default_rng(1))
    drone = Mission([[0, 0, 30, 30], [20, 0, 50, 30]])
    sim = run([Scene(0.0, 20.0, hover(alt=40.0), [Actor("m300", M300_PROFILE, drone),
                                                  Actor("airplane", AIRPLANE_PROFILE, plane)])])
    assert len(sim.target_tracks) == 1 and len(sim.corridors) == 1
    track = sim.target_tracks[0]
    assert track.times[0] == 0.0 and track.times[-1] == 20.0
    assert np.diff(track.times).max() == pytest.approx(0.1)
    corridor, t0, t1, cls = sim.corridors[0]
    assert (t0, t1, cls) == (0.0, 20.0, ClassLabel.AIRPLANE)
    assert len(sim.sensor_segments) == 1


# -- recipes -------------------------------------------------------------------------------

def test_recipe_defaults_merge_and_weights():
    values = parse_flat("""
        seed = 3
        duration = 100
        defaults.sensor.altitude = 50
        scene.a.weight = 3
        scene.a.segment = 25
        scene.b.weight = 1
        scene.b.sensor.altitude = 10
    """)
    rec = recipe_from_flat(values)
    by_kind = {}
    for s in rec.scenes:
        by_kind.setdefault(s.kind, []).append(s)
    assert sum(s.duration for s in by_kind["a"]) == pytest.approx(75.0)
    assert sum(s.duration for s in by_kind["b"]) == pytest.approx(25.0)
    assert all(s.sensor.mission.waypoints[0, 3] == 50.0 for s in by_kind["a"])
    assert all(s.sensor.mission.waypoints[0, 3] == 10.0 for s in by_kind["b"])
    starts = sorted(s.start for s in rec.scenes)
    assert starts[0] == 0.0 and rec.duration == pytest.approx(100.0)


def test_zero_duration_recipe_is_empty():
    rec = recipe_from_flat(parse_flat(bundled_recipe_text()), duration=0.0)
    assert rec.scenes == []
    assert len(simulate(rec).returns) == 0


def test_bad_recipe_values():
    with pytest.raises(ConfigError):
        recipe_from_flat({"duration": -1})
    with pytest.raises(ConfigError):
        recipe_from_flat({"duration": 10, "scene.x.weight": -1})
    with pytest.raises(ConfigError):
        recipe_from_flat({"duration": 10, "scene.x.actors": ["zeppelin"]})


def test_mission_yaw_convention():
    # a drone placed on boresight of a sensor yawed east lies east of it
    gen = np.random.default_rng(5)
    m = make_mission("radial", M300_PROFILE, [0, 0, 30], math.pi / 2, 0.0, 30.0, gen)
    assert np.all(m.waypoints[:, 1] > 0)
