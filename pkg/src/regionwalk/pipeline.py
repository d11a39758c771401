"""Autoregressive trajectory generation and the duplicate-probability check."""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, GenerationError
from .geo import CellId, Point
from .nn import softmax
from .sampler import sample_point
from .vrn import belief_vector, top_indices

RULES = ("sample_top_y", "argmax")


@dataclass
class GenerationConfig:
    count: int = 256
    m: int = 60
    top_y: int = 5
    seed: int = 0
    next_region_rule: str = "sample_top_y"

    def __post_init__(self):
        if self.count < 1:
            raise ArgumentError("count must be >= 1")
        if self.m < 2:
            raise ArgumentError("m must be >= 2")
        if self.top_y < 1:
            raise ArgumentError("top_y must be >= 1")
        if self.next_region_rule not in RULES:
            raise ArgumentError(f"next_region_rule must be one of {RULES}")


@dataclass
class GeneratedTrajectory:
    region_sequence: list[CellId]
    points: list[Point]
    seed_used: object = None
    truncated: bool = False
    id: str = ""

    @property
    def coords(self) -> np.ndarray:
        return np.array([(p.lat, p.lon) for p in self.points], dtype=np.float64)


def trajectory_rng(seed, index) -> np.random.Generator:
    """Independent stream for trajectory ``index`` of a run seeded with ``seed``."""
    return np.random.default_rng([int(seed), int(index)])


def generate_one(model, dictionary, heatmap, cfg: GenerationConfig, rng: np.random.Generator,
                 seed_used=None) -> GeneratedTrajectory:
    if len(dictionary) == 0:
        raise GenerationError("latent dictionary is empty")
    emb = model.embeddings
    y = min(cfg.top_y, len(model.vocab))

    start_p = model.start_counts / model.start_counts.sum()
    cur = int(np.searchsorted(np.cumsum(start_p), rng.random(), side="right"))
    cur = min(cur, len(model.vocab) - 1)
    belief = emb[cur]
    seq = [cur]
    truncated = False
    for t in range(1, cfg.m):
        cell = model.vocab[cur]
        if cell not in dictionary:
            truncated = True
            seq.append(cur)
            continue
        z = dictionary.sample(cell, rng)
        # decoder was trained with the position of the context cell
        prob = softmax(model.logits(belief, z, _pe(model, t - 1)))
        if cfg.next_region_rule == "argmax":
            nxt = int(np.argmax(prob))
        else:
            top = top_indices(prob, y)
            p = prob[top] / prob[top].sum()
            k = int(np.searchsorted(np.cumsum(p), rng.random(), side="right"))
            nxt = int(top[min(k, len(top) - 1)])
        belief = belief_vector(prob, emb, y)
        seq.append(nxt)
        cur = nxt

    regions = [model.vocab[i] for i in seq]
    points = [sample_point(c, heatmap, rng) for c in regions]
    return GeneratedTrajectory(regions, points, seed_used, truncated)


def _pe(model, step):
    # generation may run longer than the training horizon in normalised mode
    if model.config.pe_mode == "raw":
        return float(step)
    return step / model.m


def generate(model, dictionary, heatmap, cfg: GenerationConfig) -> list[GeneratedTrajectory]:
    out = []
    for i in range(cfg.count):
        g = generate_one(model, dictionary, heatmap, cfg, trajectory_rng(cfg.seed, i), seed_used=[cfg.seed, i])
        g.id = f"gen_{i:04d}"
        out.append(g)
    return out


def duplicate_bound(y: int, m: int, log: bool = False) -> float:
    """Chance that a generated sequence replays a given one, ``(1/y)**m``.

    With ``log=True`` the natural log is returned instead.
    """
    if y < 1 or m < 1:
        raise ArgumentError("y and m must be >= 1")
    if log:
        return -m * math.log(y)
    return (1.0 / y) ** m


def duplicate_rate(generated) -> float:
    """Fraction of trajectories whose region sequence also occurs elsewhere in the set."""
    if not generated:
        raise ArgumentError("empty set")
    keys = [tuple(g.region_sequence) if hasattr(g, "region_sequence") else tuple(g) for g in generated]
    counts = Counter(keys)
    return sum(1 for k in keys if counts[k] > 1) / len(keys)


# -- export -------------------------------------------------------------------

def to_geojson(trajectories, extra_properties=None) -> dict:
    feats = []
    for i, g in enumerate(trajectories):
        coords = g.coords if hasattr(g, "coords") else np.asarray(g)
        props = {"id": getattr(g, "id", "") or f"traj_{i:04d}"}
        if hasattr(g, "seed_used"):
            props["seed"] = g.seed_used
            props["truncated"] = g.truncated
        if hasattr(g, "region_sequence"):
            props["regions"] = [c.address for c in g.region_sequence]
        props.update(extra_properties or {})
        feats.append({
            "type": "Feature",
            "properties": props,
            "geometry": {"type": "LineString", "coordinates": [[float(lon), float(lat)] for lat, lon in coords]},
        })
    return {"type": "FeatureCollection", "features": feats}


def from_geojson(fc: dict) -> list[GeneratedTrajectory]:
    out = []
    for f in fc["features"]:
        props = f.get("properties", {})
        pts = [Point(lat, lon) for lon, lat in f["geometry"]["coordinates"]]
        regions = [CellId.parse(a) for a in props.get("regions", [])]
        out.append(GeneratedTrajectory(regions, pts, props.get("seed"), bool(props.get("truncated", False)),
                                       props.get("id", "")))
    return out


def to_csv(trajectories) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "day_index", "lat", "lon"])
    for i, g in enumerate(trajectories):
        coords = g.coords if hasattr(g, "coords") else np.asarray(g)
        tid = getattr(g, "id", "") or f"traj_{i:04d}"
        for d, (lat, lon) in enumerate(coords.tolist()):
            w.writerow([tid, d, repr(lat), repr(lon)])
    return buf.getvalue()
