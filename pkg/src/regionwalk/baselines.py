"""Levy-flight baseline fitted to the training trajectories."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError


@dataclass
class LevyParams:
    step_scale: float
    angle_sigma: float
    start_distribution: np.ndarray  # (n, 2) training start points
    start_headings: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if not self.step_scale > 0:
            raise ArgumentError("step_scale must be positive")
        if self.angle_sigma < 0:
            raise ArgumentError("angle_sigma must be non-negative")


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def headings(coords) -> np.ndarray:
    """Direction of each non-zero step, radians, lon as x and lat as y."""
    d = np.diff(np.asarray(coords, dtype=np.float64), axis=0)
    moving = np.hypot(d[:, 0], d[:, 1]) > 0
    return np.arctan2(d[moving, 0], d[moving, 1])


def turning_angles(coords) -> np.ndarray:
    return _wrap(np.diff(headings(coords)))


def circular_std(angles) -> float:
    angles = np.asarray(angles, dtype=np.float64)
    if len(angles) == 0:
        return 0.0
    R = np.abs(np.exp(1j * angles).mean())
    return float(np.sqrt(-2.0 * np.log(min(max(R, 1e-300), 1.0))))


def fit_levy(dataset) -> LevyParams:
    trajs = [t.coords if hasattr(t, "coords") else np.asarray(t) for t in
             (dataset.trajectories if hasattr(dataset, "trajectories") else dataset)]
    if not trajs or min(len(t) for t in trajs) < 2:
        raise ArgumentError("need trajectories with at least two points")
    steps = np.concatenate([np.hypot(*np.diff(t, axis=0).T) for t in trajs])
    scale = float(np.median(steps))
    if scale == 0:
        # mostly stationary data: fall back to the moving steps
        moving = steps[steps > 0]
        if len(moving) == 0:
            raise ArgumentError("trajectories never move")
        scale = float(np.median(moving))
    turns = np.concatenate([turning_angles(t) for t in trajs])
    first = [headings(t)[:1] for t in trajs]
    return LevyParams(scale, circular_std(turns), np.array([t[0] for t in trajs]),
                      np.concatenate(first) if first else np.zeros(0))


def levy_generate(params: LevyParams, m: int, count: int, rng: np.random.Generator,
                  clamp: float | None = 10.0) -> list[np.ndarray]:
    """``count`` trajectories of ``m`` points.

    Steps are ``|Cauchy(0, step_scale)|`` capped at ``clamp * step_scale``
    (``clamp=None`` disables the cap); headings drift by
    ``Normal(0, angle_sigma)`` each step.  The initial heading is drawn from
    the training start headings when available, else uniformly.
    """
    if m < 2:
        raise ArgumentError("m must be >= 2")
    out = []
    for _ in range(count):
        start = params.start_distribution[int(rng.integers(len(params.start_distribution)))]
        if len(params.start_headings):
            heading = float(params.start_headings[int(rng.integers(len(params.start_headings)))])
        else:
            heading = float(rng.uniform(-np.pi, np.pi))
        pts = np.empty((m, 2))
        pts[0] = start
        for i in range(1, m):
            step = params.step_scale * abs(float(rng.standard_cauchy()))
            if clamp is not None:
                step = min(step, clamp * params.step_scale)
            if i > 1:
                heading += float(rng.normal(0.0, params.angle_sigma)) if params.angle_sigma > 0 else 0.0
            lat = pts[i - 1, 0] + step * np.sin(heading)
            lon = pts[i - 1, 1] + step * np.cos(heading)
            pts[i] = (np.clip(lat, -90.0, 90.0), np.clip(lon, -180.0, 180.0))
        out.append(pts)
    return out
