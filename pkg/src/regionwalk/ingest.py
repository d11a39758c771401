"""Movebank-style CSV parsing, daily regularisation and fold splitting."""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import (ArgumentError, EmptyDatasetError, EmptyInputError,
                     RowValidationError, SchemaError)
from .geo import Point

log = logging.getLogger(__name__)

DEFAULT_COLUMNS = {
    "id": "individual-local-identifier",
    "time": "timestamp",
    "lat": "location-lat",
    "lon": "location-long",
}

DATASET_FORMAT = "regionwalk-dataset"


@dataclass(frozen=True)
class RawObservation:
    subject_id: str
    timestamp: dt.datetime
    lat: float
    lon: float


@dataclass
class Trajectory:
    """One subject-season; ``coords`` is an ``(m, 2)`` array of (lat, lon)."""

    id: str
    coords: np.ndarray
    start_date: dt.date

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64).reshape(-1, 2)

    @property
    def points(self) -> list[Point]:
        return [Point(float(a), float(b)) for a, b in self.coords]

    def __len__(self):
        return len(self.coords)


@dataclass
class Dataset:
    trajectories: list[Trajectory]
    m: int
    clip_window: tuple[tuple[int, int], tuple[int, int]]
    bounding_area: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.bounding_area and self.trajectories:
            self.bounding_area = bounding_area(self.trajectories)

    @property
    def ids(self) -> list[str]:
        return [t.id for t in self.trajectories]

    def subset(self, ids) -> "Dataset":
        wanted = set(ids)
        keep = [t for t in self.trajectories if t.id in wanted]
        return Dataset(keep, self.m, self.clip_window)

    def all_points(self) -> np.ndarray:
        return np.concatenate([t.coords for t in self.trajectories])


@dataclass(frozen=True)
class FoldSplit:
    fold_index: int
    train: list[str]
    test: list[str]


def bounding_area(trajectories) -> dict:
    pts = np.concatenate([t.coords for t in trajectories])
    return {
        "min_lat": float(pts[:, 0].min()), "max_lat": float(pts[:, 0].max()),
        "min_lon": float(pts[:, 1].min()), "max_lon": float(pts[:, 1].max()),
    }


def parse_timestamp(text: str) -> dt.datetime:
    """ISO-like timestamp; naive values are taken as UTC."""
    s = text.strip()
    if s.endswith("Z"):
        s = s[:-1] + "+00:00"
    t = dt.datetime.fromisoformat(s)
    if t.tzinfo is None:
        return t.replace(tzinfo=dt.timezone.utc)
    return t.astimezone(dt.timezone.utc)


def parse_csv(data, column_map=None, on_error="raise") -> list[RawObservation]:
    """Parse a CSV export into observations, in file order.

    ``on_error="raise"`` stops at the first bad row with a
    :class:`RowValidationError`; ``"skip"`` logs each bad row (with its line
    number) and carries on.  Skipped rows are also available afterwards in
    ``parse_csv.last_errors``.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    if not data.strip():
        raise EmptyInputError("empty CSV input")
    cols = dict(DEFAULT_COLUMNS)
    cols.update(column_map or {})
    reader = csv.DictReader(io.StringIO(data, newline=""))
    header = reader.fieldnames or []
    missing = [c for c in cols.values() if c not in header]
    if missing:
        raise SchemaError(f"missing column(s): {', '.join(missing)}")

    out = []
    errors = []
    for row in reader:
        line = reader.line_num
        try:
            out.append(_row_to_observation(row, cols, line))
        except RowValidationError as e:
            if on_error == "raise":
                raise
            log.warning("skipping %s", e)
            errors.append(e)
    parse_csv.last_errors = errors
    return out


parse_csv.last_errors = []


def _row_to_observation(row, cols, line) -> RawObservation:
    sid = (row.get(cols["id"]) or "").strip()
    if not sid:
        raise RowValidationError(line, "empty subject id")
    try:
        ts = parse_timestamp(row[cols["time"]])
    except (ValueError, TypeError) as e:
        raise RowValidationError(line, f"bad timestamp {row.get(cols['time'])!r}") from e
    try:
        lat = float(row[cols["lat"]])
        lon = float(row[cols["lon"]])
        Point(lat, lon)
    except (ValueError, TypeError) as e:
        raise RowValidationError(line, f"bad coordinate: {e}") from e
    return RawObservation(sid, ts, lat, lon)


def write_csv(observations, column_map=None) -> str:
    cols = dict(DEFAULT_COLUMNS)
    cols.update(column_map or {})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([cols["id"], cols["time"], cols["lat"], cols["lon"]])
    for o in observations:
        w.writerow([o.subject_id, o.timestamp.strftime("%Y-%m-%d %H:%M:%S"), repr(o.lat), repr(o.lon)])
    return buf.getvalue()


# -- daily regularisation -----------------------------------------------------

def _is_feb29(d: dt.date) -> bool:
    return d.month == 2 and d.day == 29


def season_days(start_md, end_md, year: int) -> list[dt.date]:
    """Calendar days of the season starting in ``year``; Feb 29 is skipped so
    every season has the same length."""
    start = dt.date(year, *start_md)
    end_year = year if tuple(end_md) >= tuple(start_md) else year + 1
    end = dt.date(end_year, *end_md)
    days = []
    d = start
    while d <= end:
        if not _is_feb29(d):
            days.append(d)
        d += dt.timedelta(days=1)
    return days


def check_window(clip_window):
    start_md, end_md = tuple(clip_window[0]), tuple(clip_window[1])
    for md in (start_md, end_md):
        try:
            dt.date(2001, *md)
        except (TypeError, ValueError) as e:
            raise ArgumentError(f"bad clip-window month/day {md!r} (Feb 29 is not allowed)") from e
    return start_md, end_md


def window_length(clip_window) -> int:
    start_md, end_md = check_window(clip_window)
    return len(season_days(start_md, end_md, 2001))


def _season_of(d: dt.date, start_md, end_md):
    """Season start year for a date, or None if the date is outside the window."""
    md = (d.month, d.day)
    year = d.year if md >= tuple(start_md) else d.year - 1
    days_end_year = year if tuple(end_md) >= tuple(start_md) else year + 1
    end = dt.date(days_end_year, *end_md)
    if dt.date(year, *start_md) <= d <= end and not _is_feb29(d):
        return year
    return None


def regularize(observations, clip_window=((3, 1), (9, 1)), max_gap_days=7,
               min_coverage=0.8) -> Dataset:
    """Turn raw observations into equal-length daily trajectories.

    Each subject is split per season (the clip window anchored at its start
    month-day), keeps the first fix of every UTC day, and is dropped when
    fewer than ``min_coverage`` of the window's days were observed or when a
    gap longer than ``max_gap_days`` remains.  Shorter gaps are filled by
    linear interpolation; leading/trailing gaps repeat the nearest fix.
    """
    if not observations:
        raise EmptyInputError("no observations")
    start_md, end_md = check_window(clip_window)
    m = window_length((start_md, end_md))

    # (subject, season) -> {date: (lat, lon)}; first fix of each UTC day wins
    daily = defaultdict(dict)
    for obs in sorted(observations, key=lambda o: o.timestamp):
        d = obs.timestamp.astimezone(dt.timezone.utc).date()
        season = _season_of(d, start_md, end_md)
        if season is None:
            continue
        daily[(obs.subject_id, season)].setdefault(d, (obs.lat, obs.lon))

    trajectories = []
    for (sid, season) in sorted(daily):
        days = season_days(start_md, end_md, season)
        fixes = daily[(sid, season)]
        observed = np.array([d in fixes for d in days])
        coverage = observed.mean()
        if coverage < min_coverage:
            log.info("dropping %s/%d: coverage %.2f < %.2f", sid, season, coverage, min_coverage)
            continue
        coords = np.full((m, 2), np.nan)
        for i, d in enumerate(days):
            if d in fixes:
                coords[i] = fixes[d]
        if _longest_gap(observed) > max_gap_days:
            log.info("dropping %s/%d: gap longer than %d days", sid, season, max_gap_days)
            continue
        trajectories.append(Trajectory(f"{sid}_{season}", _fill_gaps(coords, observed), days[0]))

    if not trajectories:
        raise EmptyDatasetError("no trajectory survived regularisation")
    return Dataset(trajectories, m, (start_md, end_md))


def _longest_gap(observed) -> int:
    longest = run = 0
    for ok in observed:
        run = 0 if ok else run + 1
        longest = max(longest, run)
    return longest


def _fill_gaps(coords, observed):
    idx = np.flatnonzero(observed)
    steps = np.arange(len(coords))
    out = np.empty_like(coords)
    # np.interp holds the end values constant outside [idx[0], idx[-1]]
    for j in range(2):
        out[:, j] = np.interp(steps, idx, coords[idx, j])
    return out


def kfold(dataset: Dataset, folds: int = 5, seed: int = 0) -> list[FoldSplit]:
    ids = dataset.ids
    if folds < 2:
        raise ArgumentError("need at least 2 folds")
    if len(ids) < folds:
        raise ArgumentError(f"{len(ids)} trajectories cannot fill {folds} folds")
    order = np.random.default_rng(seed).permutation(len(ids))
    chunks = np.array_split(order, folds)
    splits = []
    for f, chunk in enumerate(chunks):
        test = {ids[i] for i in chunk}
        splits.append(FoldSplit(f, [i for i in ids if i not in test], [i for i in ids if i in test]))
    return splits


# -- serialisation ------------------------------------------------------------

def dataset_to_dict(ds: Dataset) -> dict:
    return {
        "format": DATASET_FORMAT,
        "version": 1,
        "m": ds.m,
        "clip_window": [list(ds.clip_window[0]), list(ds.clip_window[1])],
        "bounding_area": ds.bounding_area,
        "trajectories": [
            {"id": t.id, "start_date": t.start_date.isoformat(), "points": t.coords.tolist()}
            for t in ds.trajectories
        ],
    }


def dataset_from_dict(d: dict) -> Dataset:
    if d.get("format") != DATASET_FORMAT:
        raise SchemaError("not a dataset file")
    trajs = [Trajectory(t["id"], np.array(t["points"], dtype=np.float64),
                        dt.date.fromisoformat(t["start_date"])) for t in d["trajectories"]]
    cw = d["clip_window"]
    return Dataset(trajs, int(d["m"]), (tuple(cw[0]), tuple(cw[1])), d.get("bounding_area") or {})


def save_dataset(ds: Dataset, path) -> None:
    with open(path, "w") as fh:
        json.dump(dataset_to_dict(ds), fh)


def load_dataset(path) -> Dataset:
    with open(path) as fh:
        return dataset_from_dict(json.load(fh))


def dataset_geojson(ds: Dataset) -> dict:
    return {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "properties": {"id": t.id, "start_date": t.start_date.isoformat()},
                "geometry": {"type": "LineString", "coordinates": [[lon, lat] for lat, lon in t.coords.tolist()]},
            }
            for t in ds.trajectories
        ],
    }
