"""Reading observation files, monthly blocking and track windowing.

Input files are CSV with a header ``time,value`` and optional ``lat,lon``
columns. Times are ISO-8601 (UTC assumed when no offset is given) or plain
numbers, read as days since 1970-01-01. Internally every time stamp is a
float number of days since that epoch.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from math import asin, cos, radians, sin, sqrt

import numpy as np

from .errors import DataError
from .series import TimeSeries

EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class RawRecord:
    time: float
    value: float
    lat: float | None = None
    lon: float | None = None

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise DataError("record value must be finite")
        if self.lat is not None and not -90.0 <= self.lat <= 90.0:
            raise DataError(f"latitude {self.lat} outside [-90, 90]")
        if self.lon is not None and not -180.0 <= self.lon < 180.0:
            raise DataError(f"longitude {self.lon} outside [-180, 180)")

    @property
    def datetime(self) -> datetime:
        return EPOCH + timedelta(days=self.time)

    @property
    def has_position(self) -> bool:
        return self.lat is not None and self.lon is not None


def parse_time(text: str) -> float:
    """ISO-8601 or numeric time stamp to days since the epoch."""
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return (dt - EPOCH).total_seconds() / 86400.0


def format_time(days: float) -> str:
    return (EPOCH + timedelta(days=days)).strftime("%Y-%m-%dT%H:%M:%SZ")


def read_timeseries(path) -> list[RawRecord]:
    """Parse a ``time,value[,lat,lon]`` CSV file into time-ordered records."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        cols = [h.strip().lower() for h in header]
        if "time" not in cols or "value" not in cols:
            raise DataError(f"{path}: header must contain 'time' and 'value'")
        it, iv = cols.index("time"), cols.index("value")
        spatial = "lat" in cols and "lon" in cols
        ila, ilo = (cols.index("lat"), cols.index("lon")) if spatial else (None, None)
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                t = parse_time(row[it])
                v = float(row[iv])
                lat = float(row[ila]) if spatial else None
                lon = float(row[ilo]) if spatial else None
                records.append(RawRecord(t, v, lat, lon))
            except (ValueError, IndexError, DataError) as exc:
                raise DataError(f"{path}, line {lineno}: {exc}") from exc
    times = np.array([r.time for r in records])
    if np.any(np.diff(times) < 0):
        warnings.warn(f"{path}: records were not in time order and have been sorted")
        order = np.argsort(times, kind="stable")
        records = [records[k] for k in order]
        times = times[order]
    n_dup = int(np.count_nonzero(np.diff(times) == 0))
    if n_dup:
        warnings.warn(f"{path}: {n_dup} duplicate time stamps")
    return records


def records_to_series(records, relative: bool = False) -> TimeSeries:
    """Single-block series; ``relative`` shifts times to start at zero."""
    if not records:
        raise DataError("no records")
    t = np.array([r.time for r in records])
    v = np.array([r.value for r in records])
    if relative:
        t = t - t[0]
    return TimeSeries(t, v)


def monthly_blocks(records, month: int) -> tuple[TimeSeries, list[int]]:
    """One block per year for the records falling in calendar ``month``.

    Times become days since the start of that month; the returned list holds
    the year of each block.
    """
    if not 1 <= int(month) <= 12:
        raise DataError("month must be in 1..12")
    times, values, ids, years = [], [], [], []
    for r in records:
        dt = r.datetime
        if dt.month != month:
            continue
        start = datetime(dt.year, month, 1, tzinfo=timezone.utc)
        if not years or years[-1] != dt.year:
            years.append(dt.year)
        times.append((dt - start).total_seconds() / 86400.0)
        values.append(r.value)
        ids.append(len(years) - 1)
    if not values:
        warnings.warn(f"no records in month {month}")
        return TimeSeries(np.zeros(0), np.zeros(0), np.zeros(0, dtype=np.int64)), []
    return TimeSeries(np.array(times), np.array(values), np.array(ids)), years


@dataclass(frozen=True)
class WindowSpec:
    lat: float
    lon: float
    half_width: float = 1.5
    track_gap_minutes: float = 30.0

    def __post_init__(self):
        if not self.half_width > 0:
            raise DataError("half_width must be positive")
        if not self.track_gap_minutes > 0:
            raise DataError("track_gap_minutes must be positive")


def haversine_km(lat1, lon1, lat2, lon2) -> float:
    p1, p2 = radians(lat1), radians(lat2)
    dp, dl = p2 - p1, radians(lon2 - lon1)
    h = sin(dp / 2) ** 2 + cos(p1) * cos(p2) * sin(dl / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * asin(min(1.0, sqrt(h)))


def _lon_offset(lon: float, centre: float) -> float:
    return (lon - centre + 180.0) % 360.0 - 180.0


def window_extract(records, w: WindowSpec) -> list[RawRecord]:
    """Nearest in-box record of every track segment.

    Records are split into segments wherever consecutive time stamps are
    more than ``track_gap_minutes`` apart. For each segment with records
    inside the box, the one closest (great circle) to the centre is kept;
    on a tie the earlier record wins.
    """
    if any(not r.has_position for r in records):
        raise DataError("window extraction needs lat/lon on every record")
    gap = w.track_gap_minutes / 1440.0
    out = []
    best, best_d, last_t = None, np.inf, None
    for r in records:
        if last_t is not None and r.time - last_t > gap:
            if best is not None:
                out.append(best)
            best, best_d = None, np.inf
        last_t = r.time
        if abs(r.lat - w.lat) <= w.half_width and abs(_lon_offset(r.lon, w.lon)) <= w.half_width:
            d = haversine_km(r.lat, r.lon, w.lat, w.lon)
            if d < best_d:
                best, best_d = r, d
    if best is not None:
        out.append(best)
    if not out:
        warnings.warn(f"no track intersects the box around ({w.lat}, {w.lon})")
    return out


def write_csv(path, header, columns) -> None:
    """Write equal-length numeric columns with 17 significant digits."""
    cols = [np.asarray(c, dtype=float) for c in columns]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join("%.17g" % v for v in row) + "\n")


def write_series_csv(path, series: TimeSeries) -> None:
    if series.block_ids is None:
        write_csv(path, ["time", "value"], [series.times, series.values])
    else:
        write_csv(path, ["time", "value", "block"], [series.times, series.values, series.block_ids])
