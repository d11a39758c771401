"""Path-similarity, coverage and likeness metrics.

All distances are Euclidean in raw degree space.  Trajectories are
``(n, 2)`` arrays of (lat, lon).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ArgumentError, MetricUnavailableError

KINDS = ("hausdorff", "dtw", "fde", "embed_sim")


def _arr(a):
    a = np.asarray(a.coords if hasattr(a, "coords") else a, dtype=np.float64).reshape(-1, 2)
    if len(a) == 0:
        raise ArgumentError("empty trajectory")
    return a


def _pairwise(a, b):
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))


def hausdorff(a, b) -> float:
    d = _pairwise(_arr(a), _arr(b))
    return float(max(d.min(1).max(), d.min(0).max()))


def dtw(a, b) -> float:
    """Unconstrained DTW with Euclidean local cost; both endpoints aligned."""
    c = _pairwise(_arr(a), _arr(b))
    n, k = c.shape
    acc = np.full((n + 1, k + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        row, prev = acc[i], acc[i - 1]
        ci = c[i - 1]
        for j in range(1, k + 1):
            row[j] = ci[j - 1] + min(prev[j - 1], prev[j], row[j - 1])
    return float(acc[n, k])


def fde(a, b) -> float:
    a, b = _arr(a), _arr(b)
    return float(math.hypot(*(a[-1] - b[-1])))


# -- batched distance matrices --------------------------------------------------

def _stack(trajs):
    arrs = [_arr(t) for t in trajs]
    lengths = {len(a) for a in arrs}
    return (np.stack(arrs) if len(lengths) == 1 else None), arrs


def distance_matrix(generated, test, kind: str, location_embeddings=None) -> np.ndarray:
    """``(len(generated), len(test))`` matrix of ``kind`` values."""
    if kind not in KINDS:
        raise ArgumentError(f"unknown metric {kind!r}")
    if kind == "embed_sim":
        if location_embeddings is None:
            raise MetricUnavailableError("no location embeddings supplied")
        ga = np.array([location_embeddings.trajectory_vector(t) for t in generated])
        ta = np.array([location_embeddings.trajectory_vector(t) for t in test])
        return _cosine(ga[:, None, :], ta[None, :, :])
    G, garrs = _stack(generated)
    T, tarrs = _stack(test)
    if kind == "fde":
        gl = np.array([a[-1] for a in garrs])
        tl = np.array([a[-1] for a in tarrs])
        return _pairwise(gl, tl)
    if G is None or T is None:
        fn = hausdorff if kind == "hausdorff" else dtw
        return np.array([[fn(g, t) for t in tarrs] for g in garrs])
    out = np.empty((len(G), len(T)))
    for s in range(0, len(G), 32):
        # (g, T, n, k) local costs
        c = np.sqrt(((G[s:s + 32, None, :, None, :] - T[None, :, None, :, :]) ** 2).sum(-1))
        if kind == "hausdorff":
            out[s:s + 32] = np.maximum(c.min(3).max(2), c.min(2).max(2))
        else:
            out[s:s + 32] = _dtw_batch(c)
    return out


def _dtw_batch(c):
    """Same recurrence as :func:`dtw`, vectorised over the leading axes."""
    *lead, n, k = c.shape
    acc = np.full((*lead, n + 1, k + 1), np.inf)
    acc[..., 0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, k + 1):
            best = np.minimum(np.minimum(acc[..., i - 1, j - 1], acc[..., i - 1, j]), acc[..., i, j - 1])
            acc[..., i, j] = c[..., i - 1, j - 1] + best
    return acc[..., n, k]


def nearest_match_report(generated, test, kind: str, location_embeddings=None):
    """Mean best-match value over ``generated`` and the fraction of ``test``
    trajectories that are somebody's best match.  Ties pick the lowest test index."""
    if not generated or not test:
        raise ArgumentError("both sets must be non-empty")
    d = distance_matrix(generated, test, kind, location_embeddings)
    best = d.argmax(1) if kind == "embed_sim" else d.argmin(1)
    values = d[np.arange(len(d)), best]
    return float(values.mean()), len(set(best.tolist())) / len(test)


# -- k-means and likeness -------------------------------------------------------

def kmeans(points, k: int, seed: int = 0, max_iter: int = 100):
    """Lloyd's algorithm; returns ``(centroids, assignments)``.

    Initial centroids are the first ``k`` distinct points of a seeded
    shuffle.  A cluster that empties is reseeded at the point farthest from
    its current centroid.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if k < 1 or len(pts) < k:
        raise ArgumentError(f"need at least k={k} points, got {len(pts)}")
    order = np.random.default_rng(seed).permutation(len(pts))
    chosen, seen = [], set()
    for i in order:
        key = tuple(pts[i])
        if key not in seen:
            seen.add(key)
            chosen.append(i)
            if len(chosen) == k:
                break
    if len(chosen) < k:
        raise ArgumentError(f"only {len(chosen)} distinct points for k={k}")
    cent = pts[chosen].copy()
    assign = None
    for _ in range(max_iter):
        d = _pairwise(pts, cent)
        new = d.argmin(1)
        for c in range(k):
            if not np.any(new == c):
                far = int(d[np.arange(len(pts)), new].argmax())
                new[far] = c
                d[far] = np.inf
                d[far, c] = 0.0
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        cent = np.array([pts[assign == c].mean(0) for c in range(k)])
    return cent, assign


def assign_clusters(points, centroids):
    return _pairwise(np.asarray(points, dtype=np.float64).reshape(-1, 2), centroids).argmin(1)


def pearson(a, b):
    """Pearson r, or None when a vector has zero variance (unless a == b)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.array_equal(a, b):
        return 1.0
    da, db = a - a.mean(), b - b.mean()
    denom = math.sqrt(float((da * da).sum()) * float((db * db).sum()))
    if denom == 0:
        return None
    return float(np.clip((da * db).sum() / denom, -1.0, 1.0))


def chi_squared(counts_test, counts_gen) -> float:
    e = np.asarray(counts_test, dtype=np.float64)
    g = np.asarray(counts_gen, dtype=np.float64)
    if g.sum() == 0:
        raise ArgumentError("generated histogram is empty")
    g = g * (e.sum() / g.sum())
    return float(((g - e) ** 2 / np.maximum(e, 1.0)).sum())


def likeness(test_points, gen_points, k: int, seed: int = 0):
    """``(r_coeff, chi2, counts_test, counts_gen)`` from a k-means fit on the test points.

    ``r_coeff`` is None when the correlation is undefined.
    """
    test_points = np.asarray(test_points, dtype=np.float64).reshape(-1, 2)
    gen_points = np.asarray(gen_points, dtype=np.float64).reshape(-1, 2)
    cent, test_assign = kmeans(test_points, k, seed)
    counts_test = np.bincount(test_assign, minlength=k)
    counts_gen = np.bincount(assign_clusters(gen_points, cent), minlength=k)
    return pearson(counts_test, counts_gen), chi_squared(counts_test, counts_gen), counts_test, counts_gen


# -- location-embedding similarity ---------------------------------------------

def _cosine(a, b):
    num = (a * b).sum(-1)
    den = np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


class LocationEmbeddings:
    """Externally computed vectors on a set of grid locations.

    Lookup snaps each query point to its nearest grid location; a query more
    than ``max_distance`` degrees from any grid location is uncovered.
    """

    def __init__(self, coords, vectors, max_distance: float = 1.0):
        self.coords = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
        self.vectors = np.asarray(vectors, dtype=np.float64)
        if len(self.coords) != len(self.vectors) or len(self.coords) == 0:
            raise ArgumentError("coords and vectors must be non-empty and aligned")
        self.max_distance = max_distance
        self._tree = cKDTree(self.coords)

    @classmethod
    def from_csv(cls, text, max_distance: float = 1.0) -> "LocationEmbeddings":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        try:
            float(rows[0][0])
        except ValueError:
            rows = rows[1:]  # header
        data = np.array([[float(x) for x in r] for r in rows], dtype=np.float64)
        return cls(data[:, :2], data[:, 2:], max_distance)

    def lookup(self, points) -> np.ndarray:
        pts = _arr(points)
        dist, idx = self._tree.query(pts)
        if np.any(dist > self.max_distance):
            raise MetricUnavailableError("location embeddings do not cover every point")
        return self.vectors[idx]

    def trajectory_vector(self, traj) -> np.ndarray:
        return self.lookup(traj).mean(0)


def embed_similarity(traj_a, traj_b, location_embeddings: LocationEmbeddings) -> float:
    va = location_embeddings.trajectory_vector(traj_a)
    vb = location_embeddings.trajectory_vector(traj_b)
    return float(_cosine(va, vb))


# -- report -------------------------------------------------------------------

@dataclass
class EvalReport:
    metrics: dict = field(default_factory=dict)  # kind -> {"value": float, "coverage": float}
    r_coeff: float | None = None
    chi2: float = 0.0
    k_used: int = 0
    counts_test: list = field(default_factory=list)
    counts_gen: list = field(default_factory=list)
    n_generated: int = 0
    n_test: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "EvalReport":
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def evaluate(generated, test, k: int, seed: int = 0, location_embeddings=None,
             kinds=("hausdorff", "dtw", "fde")) -> EvalReport:
    gen = [_arr(g) for g in generated]
    tst = [_arr(t) for t in test]
    report = EvalReport(k_used=k, n_generated=len(gen), n_test=len(tst))
    kinds = list(kinds)
    if location_embeddings is not None and "embed_sim" not in kinds:
        kinds.append("embed_sim")
    for kind in kinds:
        try:
            value, cov = nearest_match_report(gen, tst, kind, location_embeddings)
        except MetricUnavailableError:
            continue
        report.metrics[kind] = {"value": value, "coverage": cov}
    r, chi2, ct, cg = likeness(np.concatenate(tst), np.concatenate(gen), k, seed)
    report.r_coeff = r
    report.chi2 = chi2
    report.counts_test = ct.tolist()
    report.counts_gen = cg.tolist()
    return report


def results_table(rows) -> str:
    """Plain-text table; ``rows`` is a list of ``(label, EvalReport)``."""
    kinds = [k for k in KINDS if any(k in rep.metrics for _, rep in rows)]
    head = ["method"]
    for k in kinds:
        head += [k, "cov"]
    head += ["r-Coeff", "chi2"]
    lines = [head]
    for label, rep in rows:
        line = [label]
        for k in kinds:
            m = rep.metrics.get(k)
            line += [f"{m['value']:.3f}", f"{m['coverage']:.2f}"] if m else ["-", "-"]
        line += ["n/a" if rep.r_coeff is None else f"{rep.r_coeff:.2f}", f"{rep.chi2:.1f}"]
        lines.append(line)
    widths = [max(len(r[i]) for r in lines) for i in range(len(head))]
    out = []
    for n, r in enumerate(lines):
        out.append("  ".join(s.ljust(w) for s, w in zip(r, widths)).rstrip())
        if n == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out)
