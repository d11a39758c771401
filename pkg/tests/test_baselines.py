import math

import numpy as np
import pytest

from regionwalk import baselines
from regionwalk.errors import ArgumentError


def test_straight_track_zero_turning():
    track = np.column_stack([np.linspace(0, 10, 11), np.linspace(5, 25, 11)])
    p = baselines.fit_levy([track])
    assert p.angle_sigma == pytest.approx(0.0, abs=1e-6)
    assert p.start_headings[0] == pytest.approx(math.atan2(1, 2))


def test_unit_steps_scale():
    track = np.array([[0, 0], [0, 1], [1, 1], [1, 2], [1, 3]], dtype=float)
    assert baselines.fit_levy([track]).step_scale == 1.0


def test_zigzag_turning_angles():
    # (lat, lon): east, north-east, east
    track = np.array([[0, 0], [0, 1], [1, 2], [1, 3]], dtype=float)
    assert np.allclose(baselines.turning_angles(track), [math.pi / 4, -math.pi / 4])
    track = np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=float)  # east, north, west
    assert np.allclose(baselines.turning_angles(track), [math.pi / 2, math.pi / 2])


def test_circular_std():
    assert baselines.circular_std([0.3, 0.3]) == pytest.approx(0.0, abs=1e-7)
    a = np.array([0.1, -0.1])
    assert baselines.circular_std(a) == pytest.approx(math.sqrt(-2 * math.log(math.cos(0.1))))


def test_zero_median_falls_back_to_moving_steps():
    track = np.array([[0, 0], [0, 0], [0, 0], [0, 2], [0, 2]], dtype=float)
    assert baselines.fit_levy([track]).step_scale == 2.0
    with pytest.raises(ArgumentError):
        baselines.fit_levy([np.zeros((4, 2))])


def test_zero_sigma_collinear():
    # small steps keep the walk clear of the coordinate clip
    p = baselines.LevyParams(0.01, 0.0, np.array([[10.0, 10.0]]), np.array([0.7]))
    for t in baselines.levy_generate(p, 30, 5, np.random.default_rng(0), clamp=None):
        d = np.diff(t, axis=0)
        assert np.allclose(np.arctan2(d[:, 0], d[:, 1]), 0.7)


def test_lengths_and_starts(rng, corridor):
    p = baselines.fit_levy(corridor)
    out = baselines.levy_generate(p, corridor.m, 20, rng)
    starts = {tuple(t.coords[0]) for t in corridor.trajectories}
    assert all(len(t) == corridor.m and tuple(t[0]) in starts for t in out)


def test_step_median_matches_half_cauchy(rng):
    p = baselines.LevyParams(0.7, 0.5, np.array([[0.0, 0.0]]))
    # one step per track from the origin, so only steps > 90 deg get clipped
    tracks = baselines.levy_generate(p, 2, 10_000, rng, clamp=None)
    steps = np.array([math.dist(t[0], t[1]) for t in tracks])
    # the median of |Cauchy(0, s)| is s
    assert abs(np.median(steps) - 0.7) <= 0.07


def test_clamp_caps_steps(rng):
    p = baselines.LevyParams(1.0, 0.2, np.array([[0.0, 0.0]]))
    (t,) = baselines.levy_generate(p, 2000, 1, rng, clamp=3.0)
    assert np.hypot(*np.diff(t, axis=0).T).max() <= 3.0 + 1e-9


def test_param_validation():
    with pytest.raises(ArgumentError):
        baselines.LevyParams(0.0, 0.1, np.zeros((1, 2)))
    with pytest.raises(ArgumentError):
        baselines.levy_generate(baselines.LevyParams(1.0, 0.1, np.zeros((1, 2))), 1, 1, np.random.default_rng())
