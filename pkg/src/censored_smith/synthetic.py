"""Synthetic observation files in the formats read by :mod:`censored_smith.io`.

Used by the tests and the CLI examples in place of real buoy or altimeter
records.
"""

from __future__ import annotations

from datetime import datetime, timezone

import numpy as np

from .distributions import GevMargin
from .io import EPOCH, RawRecord, format_time
from .rng import generator, spawn
from .simulation import simulate_smith


def december_records(
    n_years: int = 21,
    first_year: int = 1990,
    margin: GevMargin = GevMargin(3.0, 1.0, 0.05),
    nu: float = 0.8,
    gap_lo: float = 0.05,
    gap_hi: float = 1.0,
    seed=0,
) -> list[RawRecord]:
    """Irregularly sampled December records, one independent block per year.

    Gaps between observations are uniform on ``(gap_lo, gap_hi)`` days.
    """
    s_times, s_values = spawn(seed, 2)
    rng = generator(s_times)
    times, ids, offsets = [], [], []
    for k in range(n_years):
        start = (datetime(first_year + k, 12, 1, tzinfo=timezone.utc) - EPOCH).total_seconds() / 86400.0
        t = np.cumsum(rng.uniform(gap_lo, gap_hi, size=int(62 / (gap_lo + gap_hi)) + 8))
        t = t[t < 31.0]
        times.append(t)
        ids.append(np.full(t.size, k))
        offsets.append(np.full(t.size, start))
    t = np.concatenate(times)
    sim = simulate_smith(t, margin, nu, s_values, block_ids=np.concatenate(ids))
    abs_t = t + np.concatenate(offsets)
    return [RawRecord(float(a), float(v)) for a, v in zip(abs_t, sim.values)]


def track_records(
    lat_range=(40.0, 46.0),
    lon_range=(-10.0, -4.0),
    n_days: float = 3 * 365.0,
    revisit_hours: float = 10.0,
    margin: GevMargin = GevMargin(3.0, 1.0, 0.0),
    nu: float = 1.0,
    seed=0,
) -> list[RawRecord]:
    """Straight satellite passes over a box, one sample per 6 km along track.

    All passes share one Smith-process value per pass (the sea state is
    treated as uniform over the box), perturbed by small measurement noise.
    """
    s_geo, s_values = spawn(seed, 2)
    rng = generator(s_geo)
    pass_times = np.arange(0.0, n_days, revisit_hours / 24.0) + rng.uniform(0, 0.1, 1)
    sim = simulate_smith(pass_times, margin, nu, s_values)
    lat0, lat1 = lat_range
    lon0, lon1 = lon_range
    out = []
    step_deg = 6.0 / 111.0
    n_pts = int((lat1 - lat0) / step_deg)
    for t0, v in zip(pass_times, sim.values):
        lon_a = rng.uniform(lon0, lon1)
        lon_b = rng.uniform(lon0, lon1)
        frac = np.linspace(0.0, 1.0, n_pts)
        lats = lat0 + (lat1 - lat0) * frac
        lons = lon_a + (lon_b - lon_a) * frac
        noise = rng.normal(0.0, 0.05, n_pts)
        ts = t0 + frac * (n_pts * 1.0 / 86400.0)
        out.extend(RawRecord(float(t), float(v + e), float(la), float(lo)) for t, e, la, lo in zip(ts, noise, lats, lons))
    return out


def write_records(path, records) -> None:
    spatial = bool(records) and records[0].has_position
    with open(path, "w") as fh:
        fh.write("time,value,lat,lon\n" if spatial else "time,value\n")
        for r in records:
            row = [format_time(r.time), "%.17g" % r.value]
            if spatial:
                row += ["%.6f" % r.lat, "%.6f" % r.lon]
            fh.write(",".join(row) + "\n")
