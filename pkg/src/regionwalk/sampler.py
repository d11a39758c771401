"""Occupancy sampler: region -> dot (by training-point count) -> point."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import UnknownRegionError
from .geo import MAX_RESOLUTION, CellId, Point, cell_indices, sample_point_in_cell


@dataclass
class Heatmap:
    offset: int
    dots: dict[CellId, list[CellId]]
    counts: dict[CellId, np.ndarray]

    def __contains__(self, region):
        return region in self.dots

    def total(self, region) -> int:
        return int(self.counts[region].sum())


def build_heatmap(network, offset: int = 4) -> Heatmap:
    dots, counts = {}, {}
    for region in network.cells:
        pts = network.points_by_cell[region]
        res = min(region.resolution + offset, MAX_RESOLUTION)
        ix, iy = cell_indices(pts[:, 0], pts[:, 1], res)
        tally = Counter(CellId(res, int(a), int(b)) for a, b in zip(ix.tolist(), iy.tolist()))
        keys = sorted(tally)
        dots[region] = keys
        counts[region] = np.array([tally[k] for k in keys], dtype=np.int64)
    return Heatmap(offset, dots, counts)


def sample_dot(region: CellId, heatmap: Heatmap, rng: np.random.Generator) -> CellId:
    if region not in heatmap:
        raise UnknownRegionError(region.address)
    c = heatmap.counts[region]
    cdf = np.cumsum(c) / c.sum()
    k = int(np.searchsorted(cdf, rng.random(), side="right"))
    return heatmap.dots[region][min(k, len(c) - 1)]


def sample_point(region: CellId, heatmap: Heatmap, rng: np.random.Generator) -> Point:
    # quadtree dots nest inside their region, so the point stays in the region
    return sample_point_in_cell(sample_dot(region, heatmap, rng), rng)


def heatmap_to_dict(h: Heatmap) -> dict:
    return {
        "offset": h.offset,
        "regions": {
            r.address: {d.address: int(n) for d, n in zip(h.dots[r], h.counts[r])} for r in sorted(h.dots)
        },
    }


def heatmap_from_dict(raw: dict) -> Heatmap:
    dots, counts = {}, {}
    for addr, table in raw["regions"].items():
        r = CellId.parse(addr)
        keys = sorted((CellId.parse(a), n) for a, n in table.items())
        dots[r] = [k for k, _ in keys]
        counts[r] = np.array([n for _, n in keys], dtype=np.int64)
    return Heatmap(int(raw["offset"]), dots, counts)


def save_heatmap(h: Heatmap, path):
    with open(path, "w") as fh:
        json.dump(heatmap_to_dict(h), fh)


def load_heatmap(path) -> Heatmap:
    with open(path) as fh:
        return heatmap_from_dict(json.load(fh))
