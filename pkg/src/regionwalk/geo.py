"""Hierarchical spatial cell index and degree-space geometry.

The index is a latitude/longitude quadtree.  Resolution 0 tiles the globe
with 18 x 9 square base cells of 20 degrees; every further resolution splits
each cell into 2 x 2 children, so resolution ``r`` cells measure
``20 / 2**r`` degrees on a side.  Children nest exactly inside their parent.

Addresses look like ``Q<resolution>:<base>.<quadrants>``, e.g. ``Q3:097.302``:
``base`` is the zero-padded base-cell number (row * 18 + column, counted from
the south-west corner) and each quadrant digit ``q = 2 * north + east``
selects a child at the next resolution.  Resolution 0 addresses carry no
quadrant part (``Q0:097``).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import AddressParseError, ArgumentError, ResolutionError

BASE_DEG = 20.0
BASE_COLS = 18
BASE_ROWS = 9
MAX_RESOLUTION = 24

_ADDRESS_RE = re.compile(r"^Q(\d+):(\d{3})(?:\.([0-3]+))?$")


@dataclass(frozen=True)
class Point:
    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ArgumentError(f"non-finite coordinate ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise ArgumentError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ArgumentError(f"longitude {self.lon} outside [-180, 180]")

    def as_tuple(self):
        return (self.lat, self.lon)


@dataclass(frozen=True, order=True)
class CellId:
    """A quadtree cell: integer column ``ix`` and row ``iy`` at ``resolution``."""

    resolution: int
    ix: int
    iy: int

    @property
    def address(self) -> str:
        r = self.resolution
        base = (self.iy >> r) * BASE_COLS + (self.ix >> r)
        digits = "".join(
            str(2 * ((self.iy >> (r - k)) & 1) + ((self.ix >> (r - k)) & 1))
            for k in range(1, r + 1)
        )
        return f"Q{r}:{base:03d}" + (f".{digits}" if digits else "")

    @classmethod
    def parse(cls, address: str) -> "CellId":
        m = _ADDRESS_RE.match(address.strip()) if isinstance(address, str) else None
        if m is None:
            raise AddressParseError(f"malformed cell address {address!r}")
        res = int(m.group(1))
        base = int(m.group(2))
        digits = m.group(3) or ""
        if len(digits) != res or res > MAX_RESOLUTION or base >= BASE_COLS * BASE_ROWS:
            raise AddressParseError(f"malformed cell address {address!r}")
        ix, iy = base % BASE_COLS, base // BASE_COLS
        for d in digits:
            q = int(d)
            ix = 2 * ix + (q & 1)
            iy = 2 * iy + (q >> 1)
        return cls(res, ix, iy)

    def __str__(self):
        return self.address

    @property
    def size(self) -> float:
        """Edge length in degrees."""
        return BASE_DEG / (1 << self.resolution)

    def parent(self) -> "CellId":
        if self.resolution == 0:
            raise ResolutionError("resolution 0 cells have no parent")
        return CellId(self.resolution - 1, self.ix >> 1, self.iy >> 1)

    def ancestor(self, resolution: int) -> "CellId":
        if not 0 <= resolution <= self.resolution:
            raise ResolutionError(f"no ancestor at resolution {resolution}")
        shift = self.resolution - resolution
        return CellId(resolution, self.ix >> shift, self.iy >> shift)

    def children(self) -> list["CellId"]:
        if self.resolution >= MAX_RESOLUTION:
            raise ResolutionError("cell is already at the finest resolution")
        r = self.resolution + 1
        return [CellId(r, 2 * self.ix + (q & 1), 2 * self.iy + (q >> 1)) for q in range(4)]

    def bounds(self) -> tuple[float, float, float, float]:
        """(lat_min, lat_max, lon_min, lon_max)."""
        s = self.size
        return (-90.0 + self.iy * s, -90.0 + (self.iy + 1) * s,
                -180.0 + self.ix * s, -180.0 + (self.ix + 1) * s)

    def center(self) -> Point:
        lat0, lat1, lon0, lon1 = self.bounds()
        return Point((lat0 + lat1) / 2, (lon0 + lon1) / 2)


@dataclass(frozen=True)
class CellBoundary:
    vertices: tuple[Point, ...]

    def contains(self, p: Point, tol: float = 1e-9) -> bool:
        return point_in_polygon(p, self.vertices, tol)

    def diameter(self) -> float:
        v = self.vertices
        return max(euclidean_deg(a, b) for a in v for b in v)

    def centroid(self) -> Point:
        """Area centroid of the polygon (shoelace formula, lon as x)."""
        xs = [v.lon for v in self.vertices]
        ys = [v.lat for v in self.vertices]
        n = len(xs)
        a = cx = cy = 0.0
        for i in range(n):
            j = (i + 1) % n
            cross = xs[i] * ys[j] - xs[j] * ys[i]
            a += cross
            cx += (xs[i] + xs[j]) * cross
            cy += (ys[i] + ys[j]) * cross
        a *= 0.5
        return Point(cy / (6 * a), cx / (6 * a))


def _check_resolution(resolution):
    if not isinstance(resolution, (int, np.integer)) or not 0 <= resolution <= MAX_RESOLUTION:
        raise ResolutionError(f"resolution {resolution!r} outside [0, {MAX_RESOLUTION}]")


def cell_indices(lat, lon, resolution: int):
    """Vectorised column/row lookup; returns integer arrays ``(ix, iy)``."""
    _check_resolution(resolution)
    lat = np.asarray(lat, dtype=np.float64)
    lon = np.asarray(lon, dtype=np.float64)
    scale = float(1 << resolution)
    # divide first, then scale by a power of two: keeps every resolution
    # consistent with its parent bit-for-bit
    ix = np.floor((lon + 180.0) / BASE_DEG * scale).astype(np.int64)
    iy = np.floor((lat + 90.0) / BASE_DEG * scale).astype(np.int64)
    ix = np.clip(ix, 0, BASE_COLS * (1 << resolution) - 1)
    iy = np.clip(iy, 0, BASE_ROWS * (1 << resolution) - 1)
    return ix, iy


def cell_of(p: Point, resolution: int) -> CellId:
    ix, iy = cell_indices(p.lat, p.lon, resolution)
    return CellId(int(resolution), int(ix), int(iy))


def cells_of(coords, resolution: int) -> list[CellId]:
    """Cells for an ``(n, 2)`` array of ``(lat, lon)`` rows."""
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    ix, iy = cell_indices(coords[:, 0], coords[:, 1], resolution)
    r = int(resolution)
    return [CellId(r, int(a), int(b)) for a, b in zip(ix.tolist(), iy.tolist())]


def cell_boundary(c: CellId | str) -> CellBoundary:
    if isinstance(c, str):
        c = CellId.parse(c)
    lat0, lat1, lon0, lon1 = c.bounds()
    return CellBoundary((Point(lat0, lon0), Point(lat0, lon1), Point(lat1, lon1), Point(lat1, lon0)))


def point_in_polygon(p: Point, vertices, tol: float = 1e-9) -> bool:
    """Even-odd ray cast; points within ``tol`` of an edge count as inside."""
    x, y = p.lon, p.lat
    n = len(vertices)
    inside = False
    for i in range(n):
        a, b = vertices[i], vertices[(i + 1) % n]
        if _segment_distance(x, y, a.lon, a.lat, b.lon, b.lat) <= tol:
            return True
        if (a.lat > y) != (b.lat > y):
            xint = a.lon + (y - a.lat) * (b.lon - a.lon) / (b.lat - a.lat)
            if x < xint:
                inside = not inside
    return inside


def _segment_distance(px, py, ax, ay, bx, by):
    dx, dy = bx - ax, by - ay
    denom = dx * dx + dy * dy
    t = 0.0 if denom == 0 else max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / denom))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def euclidean_deg(a: Point, b: Point) -> float:
    return math.hypot(a.lat - b.lat, a.lon - b.lon)


def haversine_km(a: Point, b: Point) -> float:
    """Great-circle distance; offered for reporting only."""
    la1, la2 = math.radians(a.lat), math.radians(b.lat)
    dla = la2 - la1
    dlo = math.radians(b.lon - a.lon)
    h = math.sin(dla / 2) ** 2 + math.cos(la1) * math.cos(la2) * math.sin(dlo / 2) ** 2
    return 2 * 6371.0088 * math.asin(min(1.0, math.sqrt(h)))


def sample_point_in_cell(c: CellId, rng: np.random.Generator) -> Point:
    """Uniform point inside ``c`` by rejection over the cell's bounding box."""
    lat0, lat1, lon0, lon1 = c.bounds()
    lat1 = min(lat1, 90.0)
    lon1 = min(lon1, 180.0)
    while True:
        lat = lat0 + (lat1 - lat0) * rng.random()
        lon = lon0 + (lon1 - lon0) * rng.random()
        ix, iy = cell_indices(lat, lon, c.resolution)
        if int(ix) == c.ix and int(iy) == c.iy:
            return Point(float(lat), float(lon))
