"""Synthetic migration corridor, a stand-in for real tracking data."""

from __future__ import annotations

import datetime as dt

import numpy as np

from .errors import ArgumentError
from .ingest import Dataset, RawObservation, Trajectory

# (lat, lon) waypoints of the default corridor, south-west to north-east
DEFAULT_CORRIDOR = [
    (51.0, 4.0),
    (52.5, 12.0),
    (55.0, 20.0),
    (56.5, 29.0),
    (60.0, 37.0),
    (64.0, 45.0),
    (67.0, 55.0),
]


def polyline_length(waypoints) -> float:
    w = np.asarray(waypoints, dtype=np.float64)
    return float(np.hypot(*np.diff(w, axis=0).T).sum())


def sinuosity(waypoints) -> float:
    """Path length divided by straight-line start-to-end displacement."""
    w = np.asarray(waypoints, dtype=np.float64)
    return polyline_length(w) / float(np.hypot(*(w[-1] - w[0])))


def along_polyline(waypoints, fractions) -> np.ndarray:
    """Points at the given fractions of total arc length."""
    w = np.asarray(waypoints, dtype=np.float64)
    seg = np.hypot(*np.diff(w, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.clip(np.asarray(fractions, dtype=np.float64), 0.0, 1.0) * cum[-1]
    return np.column_stack([np.interp(s, cum, w[:, 0]), np.interp(s, cum, w[:, 1])])


def corridor_dataset(n: int = 60, m: int = 60, corridor=None, noise: float = 0.3,
                     speed_jitter: float = 0.15, route_spread: float = 1.5, reach_min: float = 1.0,
                     seed: int = 0,
                     start_date: dt.date = dt.date(2021, 3, 1)) -> Dataset:
    """``n`` daily trajectories of length ``m`` along ``corridor``.

    Every subject starts at the first waypoint and advances along the
    polyline at a constant speed scaled by ``U(1 - speed_jitter, 1 + speed_jitter)``
    up to its own destination at arc fraction ``U(reach_min, 1)``, where it
    stays for the remaining days.  Each subject's
    route bows sideways by ``a * sin(pi * s)`` at arc fraction ``s``, with
    ``a ~ Normal(0, route_spread)`` degrees perpendicular to the overall
    heading, so routes share end points but differ mid-way.  Each daily fix
    then gets isotropic Gaussian noise with standard deviation ``noise``.
    """
    if n < 10 or m < 20:
        raise ArgumentError("need n >= 10 and m >= 20")
    if noise < 0 or route_spread < 0 or not 0 <= speed_jitter < 1 or not 0 < reach_min <= 1:
        raise ArgumentError("noise, route_spread >= 0; speed_jitter in [0, 1); reach_min in (0, 1]")
    wp = np.asarray(corridor if corridor is not None else DEFAULT_CORRIDOR, dtype=np.float64)
    if len(wp) < 2:
        raise ArgumentError("corridor needs at least two waypoints")
    rng = np.random.default_rng(seed)
    base = np.linspace(0.0, 1.0, m)
    axis = wp[-1] - wp[0]
    normal = np.array([axis[1], -axis[0]]) / np.hypot(*axis)
    trajs = []
    for i in range(n):
        speed = 1.0 + speed_jitter * rng.uniform(-1.0, 1.0)
        bow = rng.normal(0.0, route_spread) if route_spread > 0 else 0.0
        reach = rng.uniform(reach_min, 1.0) if reach_min < 1 else 1.0
        frac = np.clip(base * speed, 0.0, reach)
        pts = along_polyline(wp, frac) + np.outer(bow * np.sin(np.pi * frac), normal)
        pts = pts + rng.normal(0.0, noise, size=pts.shape) if noise > 0 else pts
        pts[:, 0] = np.clip(pts[:, 0], -90.0, 90.0)
        pts[:, 1] = np.clip(pts[:, 1], -180.0, 180.0)
        trajs.append(Trajectory(f"synth_{i:03d}", pts, start_date))
    end = start_date + dt.timedelta(days=m - 1)
    window = ((start_date.month, start_date.day), (end.month, end.day))
    return Dataset(trajs, m, window)


def to_observations(dataset: Dataset, hour: int = 12) -> list[RawObservation]:
    """Daily fixes as raw observations (one per day at ``hour`` UTC)."""
    out = []
    for t in dataset.trajectories:
        subject = t.id
        for d, (lat, lon) in enumerate(t.coords.tolist()):
            ts = dt.datetime.combine(t.start_date + dt.timedelta(days=d), dt.time(hour), dt.timezone.utc)
            out.append(RawObservation(subject, ts, lat, lon))
    return out
