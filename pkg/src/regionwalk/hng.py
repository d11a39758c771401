"""Hierarchical network generation: split cells until their points fit within
the threshold diameter, then turn trajectories into region sequences."""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import ArgumentError, SchemaError
from .geo import MAX_RESOLUTION, CellId, cell_boundary, cell_indices

log = logging.getLogger(__name__)

NETWORK_FORMAT = "regionwalk-network"


@dataclass
class RegionNetwork:
    cells: list[CellId]
    edges: set[tuple[CellId, CellId]]
    points_by_cell: dict[CellId, np.ndarray]
    initial_zoom: int
    split_threshold_r: float
    max_zoom: int
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.cells = sorted(self.cells)
        self._index = {c: i for i, c in enumerate(self.cells)}

    def index(self, c: CellId) -> int:
        return self._index[c]

    def __contains__(self, c):
        return c in self._index

    @property
    def n_points(self) -> int:
        return sum(len(v) for v in self.points_by_cell.values())

    def out_neighbors(self) -> dict[CellId, list[CellId]]:
        nbrs = defaultdict(list)
        for a, b in sorted(self.edges):
            nbrs[a].append(b)
        return dict(nbrs)

    def locate(self, lat: float, lon: float) -> CellId | None:
        """Network cell covering a (possibly unseen) location, if any."""
        for res in range(self.initial_zoom, self.max_zoom + 1):
            ix, iy = cell_indices(lat, lon, res)
            c = CellId(res, int(ix), int(iy))
            if c in self._index:
                return c
        return None


@dataclass
class RegionSequence:
    trajectory_id: str
    cells: list[CellId]


def diameter(points) -> float:
    """Largest pairwise Euclidean distance (degrees) in an ``(n, 2)`` array."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise ArgumentError("diameter of an empty point set")
    pts = np.unique(pts, axis=0)
    if len(pts) > 64:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            pass  # collinear: fall through to the exact pairwise scan
    best = 0.0
    for start in range(0, len(pts), 512):
        block = pts[start:start + 512]
        d = np.sqrt(((block[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
        best = max(best, float(d.max()))
    return best


def regionalize(dataset, r: float = 1.0, initial_zoom: int = 2, max_zoom: int = 9):
    """Build the region network for ``dataset`` and map each trajectory onto it.

    Any cell whose training points span more than ``r`` degrees is replaced
    by the non-empty children of its next resolution, recursively, until the
    bound holds or ``max_zoom`` is reached.
    """
    trajs = dataset.trajectories if hasattr(dataset, "trajectories") else list(dataset)
    if not trajs:
        raise ArgumentError("cannot regionalize an empty dataset")
    if r <= 0:
        raise ArgumentError("split threshold r must be positive")
    if not 0 <= initial_zoom < max_zoom <= MAX_RESOLUTION:
        raise ArgumentError("need 0 <= initial_zoom < max_zoom <= %d" % MAX_RESOLUTION)

    pts = np.concatenate([t.coords for t in trajs])
    lengths = [len(t.coords) for t in trajs]
    n = len(pts)
    res = np.full(n, initial_zoom, dtype=np.int64)
    ix, iy = cell_indices(pts[:, 0], pts[:, 1], initial_zoom)
    ix, iy = ix.copy(), iy.copy()

    warnings = []
    pending = _group(np.arange(n), res, ix, iy)
    final = {}
    while pending:
        cell, members = pending.pop()
        if len(members) == 1 or diameter(pts[members]) <= r:
            final[cell] = members
            continue
        if cell.resolution >= max_zoom:
            msg = f"{cell.address}: diameter above r={r} at max_zoom={max_zoom}"
            log.warning(msg)
            warnings.append(msg)
            final[cell] = members
            continue
        nr = cell.resolution + 1
        cix, ciy = cell_indices(pts[members, 0], pts[members, 1], nr)
        res[members] = nr
        ix[members] = cix
        iy[members] = ciy
        pending.extend(_group(members, res, ix, iy))

    points_by_cell = {c: pts[np.sort(idx)] for c, idx in final.items()}
    network_cells = sorted(final)

    point_cells = [CellId(int(a), int(b), int(c)) for a, b, c in zip(res.tolist(), ix.tolist(), iy.tolist())]
    sequences = []
    offset = 0
    for t, length in zip(trajs, lengths):
        sequences.append(RegionSequence(t.id, point_cells[offset:offset + length]))
        offset += length

    net = RegionNetwork(network_cells, build_graph(sequences), points_by_cell,
                        initial_zoom, float(r), max_zoom, warnings)
    return net, sequences


def _group(members, res, ix, iy):
    groups = defaultdict(list)
    for i in members.tolist():
        groups[CellId(int(res[i]), int(ix[i]), int(iy[i]))].append(i)
    # reverse-sorted so pop() walks cells in ascending order
    return [(c, np.array(groups[c], dtype=np.int64)) for c in sorted(groups, reverse=True)]


def build_graph(sequences) -> set[tuple[CellId, CellId]]:
    edges = set()
    for s in sequences:
        cells = s.cells if hasattr(s, "cells") else s
        edges.update(zip(cells[:-1], cells[1:]))
    return edges


# -- serialisation ------------------------------------------------------------

def network_to_dict(net: RegionNetwork, sequences=None) -> dict:
    d = {
        "format": NETWORK_FORMAT,
        "version": 1,
        "params": {"r": net.split_threshold_r, "initial_zoom": net.initial_zoom, "max_zoom": net.max_zoom},
        "cells": [
            {"address": c.address, "resolution": c.resolution, "count": len(net.points_by_cell[c]),
             "points": net.points_by_cell[c].tolist()}
            for c in net.cells
        ],
        "edges": [[a.address, b.address] for a, b in sorted(net.edges)],
        "warnings": list(net.warnings),
    }
    if sequences is not None:
        d["sequences"] = [{"id": s.trajectory_id, "cells": [c.address for c in s.cells]} for s in sequences]
    return d


def network_from_dict(d: dict):
    if d.get("format") != NETWORK_FORMAT:
        raise SchemaError("not a network file")
    cells = [CellId.parse(c["address"]) for c in d["cells"]]
    pbc = {c: np.array(e["points"], dtype=np.float64).reshape(-1, 2) for c, e in zip(cells, d["cells"])}
    edges = {(CellId.parse(a), CellId.parse(b)) for a, b in d["edges"]}
    p = d["params"]
    net = RegionNetwork(cells, edges, pbc, int(p["initial_zoom"]), float(p["r"]), int(p["max_zoom"]),
                        list(d.get("warnings", [])))
    seqs = None
    if "sequences" in d:
        seqs = [RegionSequence(s["id"], [CellId.parse(a) for a in s["cells"]]) for s in d["sequences"]]
    return net, seqs


def save_network(net, path, sequences=None):
    with open(path, "w") as fh:
        json.dump(network_to_dict(net, sequences), fh)


def load_network(path):
    with open(path) as fh:
        return network_from_dict(json.load(fh))


def network_geojson(net: RegionNetwork) -> dict:
    feats = []
    for c in net.cells:
        ring = [[v.lon, v.lat] for v in cell_boundary(c).vertices]
        ring.append(ring[0])
        feats.append({
            "type": "Feature",
            "properties": {"address": c.address, "resolution": c.resolution, "count": len(net.points_by_cell[c])},
            "geometry": {"type": "Polygon", "coordinates": [ring]},
        })
    return {"type": "FeatureCollection", "features": feats}
