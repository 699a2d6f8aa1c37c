import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from radarseg.labeling import (
    AIRPLANE_SPEC, M300_SPEC, MINI_SPEC, Corridor, SensorErrorModel, SensorTrack, TargetSpec,
    TargetTrack, TrackError, interpolate_track, label_corridor, label_return, label_returns,
    match_threshold, points_in_polygon,
)
from radarseg.returns import ClassLabel, Returns

from oracles import labeling_agreement, pose, random_pairs, return_at, static_track

ZERO_ERR = SensorErrorModel(0.0, 0.0, 0.0, 1.5)


def test_threshold_frozen_value():
    # M300 with zero sensor error: half dims (0.405, 0.335, 0.215) plus 1.5 m slack
    assert match_threshold(M300_SPEC, 30.0, ZERO_ERR) == pytest.approx(2.0678679, abs=1e-6)


def test_zero_distance_matches():
    tr = static_track([0.0, 30.0, 5.0])
    assert label_return(return_at([0.0, 30.0, 5.0]), pose(), [tr], ZERO_ERR) == ClassLabel.M300


@pytest.mark.parametrize("offset, expected", [(2.05, ClassLabel.M300), (2.1, None), (2.5, None)])
def test_m300_boundary(offset, expected):
    target = np.array([0.0, 30.0, 0.0])
    tr = static_track(target)
    world = target + [offset, 0.0, 0.0]
    ret = return_at(world)
    assert ret.polar.range == pytest.approx(30.0, abs=0.2)
    assert label_return(ret, pose(), [tr], ZERO_ERR) == expected


def test_nearest_track_wins():
    a = static_track([0.0, 50.0, 0.0], M300_SPEC)
    b = static_track([0.0, 53.0, 0.0], MINI_SPEC)
    err = SensorErrorModel(0.0, 0.0, 0.0, 3.0)
    # 1 m from a and 2 m from b: both match
    ret = return_at([0.0, 51.0, 0.0])
    assert label_return(ret, pose(), [a], err) == ClassLabel.M300
    assert label_return(ret, pose(), [b], err) == ClassLabel.MINI
    assert label_return(ret, pose(), [a, b], err) == ClassLabel.M300
    assert label_return(ret, pose(), [b, a], err) == ClassLabel.M300
    assert label_return(return_at([0.0, 52.0, 0.0]), pose(), [a, b], err) == ClassLabel.MINI


def test_empty_tracks_unmatched():
    assert label_return(return_at([0.0, 10.0, 0.0]), pose(), [], ZERO_ERR) is None


def test_track_outside_span_skipped():
    tr = static_track([0.0, 30.0, 0.0], t0=0.0, t1=1.0)
    assert label_return(return_at([0.0, 30.0, 0.0], t=5.0), pose(), [tr], ZERO_ERR) is None


def test_non_monotonic_track_rejected():
    with pytest.raises(TrackError):
        TargetTrack([0.0, 1.0, 1.0], np.zeros((3, 3)), M300_SPEC)
    with pytest.raises(TrackError):
        SensorTrack([0.0, 2.0, 1.0], np.zeros((3, 3)), np.zeros(3))


def test_spec_dims_positive():
    with pytest.raises(ValueError):
        TargetSpec(ClassLabel.MINI, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        SensorErrorModel(-0.1, 0.0, 0.0, 1.5)


def test_interpolation_examples():
    tr = TargetTrack([0.0, 1.0], [[0, 0, 0], [2, 0, 0]], M300_SPEC)
    assert interpolate_track(tr, 0.5) == pytest.approx([1, 0, 0])
    assert interpolate_track(tr, 0.25) == pytest.approx([0.5, 0, 0])
    assert interpolate_track(tr, 1.0) == pytest.approx([2, 0, 0])
    with pytest.raises(TrackError):
        interpolate_track(tr, 1.5)


def test_target_dimension_table():
    assert (M300_SPEC.l, M300_SPEC.w, M300_SPEC.h) == (0.81, 0.67, 0.43)
    assert (MINI_SPEC.w, MINI_SPEC.l, MINI_SPEC.h) == (0.289, 0.245, 0.056)
    assert AIRPLANE_SPEC.cls == ClassLabel.AIRPLANE


def test_oracle_agreement_10k():
    res = labeling_agreement(10_000, seed=20240601)
    assert res.agree == res.n == 10_000
    assert 1000 < res.matched < 9000  # both verdicts well represented


@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.floats(0.5, 4.0))
def test_epsilon_monotone(eps, extra, dist):
    tr = static_track([0.0, 40.0, 0.0])
    ret = return_at([dist, 40.0, 0.0])
    lo = label_return(ret, pose(), [tr], SensorErrorModel(0.0, 0.0, 0.0, eps))
    hi = label_return(ret, pose(), [tr], SensorErrorModel(0.0, 0.0, 0.0, eps + extra))
    if lo is not None:
        assert hi == lo


@given(st.lists(st.floats(-500, 500), min_size=3, max_size=3), st.integers(0, 2 ** 16))
def test_translation_invariance(shift, seed):
    rng = np.random.default_rng(seed)
    sensor, yaw, tr, ts, target, world, err = random_pairs(rng, 1)[0]
    shift = np.array(shift)
    ret = return_at(world, sensor, yaw, ts)
    moved = TargetTrack(tr.times, tr.positions + shift, tr.spec)
    assert (label_return(ret, pose(sensor, yaw), [tr], err)
            == label_return(ret, pose(sensor + shift, yaw), [moved], err))


def test_vectorised_equals_per_return(rng):
    pairs = random_pairs(rng, 300)
    tracks = [p[2] for p in pairs[:5]]
    rets = [return_at(p[5], p[0], p[1], p[3]) for p in pairs]
    table = Returns.from_records(rets)
    codes = label_returns(table, np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs]), tracks,
                          ZERO_ERR)
    for i, (sensor, yaw, *_rest) in enumerate(pairs):
        one = label_return(rets[i], pose(sensor, yaw), tracks, ZERO_ERR)
        assert codes[i] == (0 if one is None else int(one))


SQUARE = Corridor(((-10, -10), (10, -10), (10, 10), (-10, 10)), 0.0, 50.0)


def corridor_returns(worlds, sensor=(0.0, 0.0, 0.0), yaw=0.0):
    return Returns.from_records([return_at(w, sensor, yaw) for w in worlds])


def test_corridor_examples():
    sensor = np.array([0.0, -60.0, 10.0])
    worlds = [[0.0, 0.0, 20.0], [30.0, 0.0, 20.0], [0.0, 0.0, 80.0]]
    table = corridor_returns(worlds, sensor)
    n = len(table)
    labels = label_corridor(table, np.tile(sensor, (n, 1)), np.zeros(n), SQUARE, ClassLabel.AIRPLANE)
    assert labels.tolist() == [3, 0, 0]


def test_corridor_leaves_other_labels():
    sensor = np.zeros(3)
    table = corridor_returns([[0.0, 5.0, 1.0], [50.0, 50.0, 1.0]], sensor)
    prior = np.array([1, 5], np.uint8)
    out = label_corridor(table, np.zeros((2, 3)), np.zeros(2), SQUARE, ClassLabel.AIRPLANE, labels=prior)
    assert out.tolist() == [3, 5] and prior.tolist() == [1, 5]


def test_degenerate_corridor():
    with pytest.raises(ValueError):
        Corridor(((0, 0), (1, 1)), 0.0, 1.0)
    with pytest.raises(ValueError):
        Corridor(((0, 0), (1, 0), (0, 1)), 5.0, 1.0)


def reference_pip(x, y, poly):
    # winding-number reference
    wn = 0
    for (x1, y1), (x2, y2) in zip(poly, poly[1:] + poly[:1]):
        cross = (x2 - x1) * (y - y1) - (x - x1) * (y2 - y1)
        if y1 <= y < y2 and cross > 0:
            wn += 1
        elif y2 <= y < y1 and cross < 0:
            wn -= 1
    return wn != 0


def test_point_in_polygon_reference(rng):
    poly = [(0.0, 0.0), (8.0, 1.0), (9.0, 7.0), (4.0, 4.0), (1.0, 8.0)]  # concave
    pts = rng.uniform(-1, 10, (20, 2))
    got = points_in_polygon(pts, poly)
    want = [reference_pip(x, y, poly) for x, y in pts]
    assert got.tolist() == want


def test_sensor_track_pose_interp():
    st_ = SensorTrack([0.0, 1.0], [[0, 0, 0], [10, 0, 0]], [math.pi - 0.1, -math.pi + 0.1])
    xyz, yaw = st_.pose_at(np.array([0.5]))
    assert xyz[0] == pytest.approx([5, 0, 0])
    # yaw interpolates across the wrap, not through zero
    assert abs(abs(yaw[0]) - math.pi) < 1e-9
    with pytest.raises(TrackError):
        st_.pose_at(np.array([2.0]))
