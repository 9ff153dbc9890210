"""Simulation of the Smith process, censoring, sampling schemes and the
reference time-series models used for validation.

Storm construction
------------------
On unit-Frechet margins the process is

    Z(t) = max_i  zeta_i / (nu sqrt(2 pi)) * exp(-(s_i - t)^2 / (2 nu^2))

over a Poisson process with intensity ``zeta^-2 dzeta ds``. In rescaled time
``s / nu`` and with ``w = zeta / (nu sqrt(2 pi))`` the storm peaks ``w`` of a
stretch of length ``l`` are ``l / (sqrt(2 pi) Gamma_j)`` for cumulative unit
exponentials ``Gamma_j``, i.e. they arrive in decreasing order.

The rescaled line around the sampling instants is cut into pieces that are
simulated independently. A piece stops as soon as its next storm peak is
below the smallest current value of ``Z`` among the instants it can reach,
which makes the result exact on the requested instants (up to the kernel
truncation at ``window_pad`` standard deviations). Instants that are more
than ``2 * CAP`` rescaled units from every neighbour get an exact unit-Frechet
draw directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from math import ceil, pi, sqrt

import numpy as np
from scipy.signal import lfilter

from .distributions import GevMargin, from_frechet
from .errors import ConfigError, ResolutionError
from .likelihood import CensoredSample
from .rng import generator, hash_uniform, seed_key, spawn
from .series import TimeSeries

DEFAULT_PAD = 6.0
PIECE_LENGTH = 4.0
_SQRT_2PI = sqrt(2.0 * pi)
_MAX_SCATTER = 1 << 22


@dataclass(frozen=True)
class PoissonPointConfig:
    window_pad: float = DEFAULT_PAD
    # cap on the storms generated for a single piece of the time axis
    max_points: int = 10**6

    def __post_init__(self):
        if self.window_pad < 4:
            raise ConfigError("window_pad must be at least 4")
        if not self.max_points >= 1:
            raise ConfigError("max_points must be positive")

    @property
    def reach(self) -> float:
        return max(2.0 * DEFAULT_PAD, self.window_pad)


class SchemeKind(str, Enum):
    REGULAR = "regular"
    UNIFORM_GAPS = "uniform_gaps"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class SamplingScheme:
    """Where the process is observed.

    ``horizon`` is a length in days; ``n`` a number of observations. Regular
    and uniform-gap schemes start at time 0. A scheme without either only
    describes the sampling pattern (e.g. for return-level simulations).
    """

    kind: SchemeKind = SchemeKind.REGULAR
    step: float = 1.0
    lo: float = 0.0
    hi: float = 2.0
    times: tuple | None = None
    horizon: float | None = None
    n: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SchemeKind(self.kind))
        if self.kind is SchemeKind.REGULAR and not self.step > 0:
            raise ConfigError("regular step must be positive")
        if self.kind is SchemeKind.UNIFORM_GAPS and not (0 <= self.lo < self.hi):
            raise ConfigError("uniform gaps need 0 <= lo < hi")
        if self.kind is SchemeKind.EXPLICIT:
            if self.times is None:
                raise ConfigError("explicit scheme needs times")
            t = np.asarray(self.times, dtype=float)
            if np.any(np.diff(t) <= 0):
                raise ConfigError("explicit times must be strictly increasing")

    @classmethod
    def regular(cls, step=1.0, horizon=None, n=None):
        return cls(SchemeKind.REGULAR, step=step, horizon=horizon, n=n)

    @classmethod
    def uniform_gaps(cls, lo=0.0, hi=2.0, horizon=None, n=None):
        return cls(SchemeKind.UNIFORM_GAPS, lo=lo, hi=hi, horizon=horizon, n=n)

    @classmethod
    def explicit(cls, times):
        return cls(SchemeKind.EXPLICIT, times=tuple(float(t) for t in times))

    def with_horizon(self, horizon: float) -> "SamplingScheme":
        return SamplingScheme(self.kind, self.step, self.lo, self.hi, self.times, horizon, None)


def make_times(scheme: SamplingScheme, seed=None) -> np.ndarray:
    if scheme.kind is SchemeKind.EXPLICIT:
        return np.asarray(scheme.times, dtype=float)
    if scheme.horizon is None and scheme.n is None:
        raise ConfigError("scheme needs a horizon (days) or a count")
    if scheme.kind is SchemeKind.REGULAR:
        if scheme.n is not None:
            n = int(scheme.n)
        else:
            n = int(ceil(scheme.horizon / scheme.step - 1e-9))
        return np.arange(n) * scheme.step
    rng = generator(seed)
    mean_gap = 0.5 * (scheme.lo + scheme.hi)
    if scheme.n is not None:
        gaps = scheme.lo + (scheme.hi - scheme.lo) * (1.0 - rng.random(int(scheme.n) - 1))
        return np.concatenate([[0.0], np.cumsum(gaps)])
    chunks, last = [np.zeros(1)], 0.0
    while last < scheme.horizon:
        m = int(1.2 * (scheme.horizon - last) / mean_gap) + 16
        gaps = scheme.lo + (scheme.hi - scheme.lo) * (1.0 - rng.random(m))
        t = last + np.cumsum(gaps)
        chunks.append(t)
        last = t[-1]
    t = np.concatenate(chunks)
    return t[t < scheme.horizon]


# --------------------------------------------------------------------------
# Smith process


def _expand_ranges(lo: np.ndarray, hi: np.ndarray):
    """Flattened ``concat(arange(lo[k], hi[k]))`` and the owner index of each entry."""
    counts = hi - lo
    owner = np.repeat(np.arange(lo.size), counts)
    offsets = np.arange(owner.size) - np.repeat(np.cumsum(counts) - counts, counts)
    return lo[owner] + offsets, owner


def _pieces(s: np.ndarray, reach: float):
    """Split the rescaled axis around non-isolated instants into pieces.

    Returns piece bounds and a mask of isolated instants.
    """
    n = s.size
    gap_break = np.diff(s) > 2.0 * reach
    starts = np.concatenate([[0], np.flatnonzero(gap_break) + 1])
    stops = np.concatenate([starts[1:], [n]])
    isolated = np.zeros(n, dtype=bool)
    lefts, rights = [], []
    single = stops - starts == 1
    isolated[starts[single]] = True
    for a, b in zip(starts[~single], stops[~single]):
        lo_edge = s[a] - reach
        hi_edge = s[b - 1] + reach
        k = int(ceil((hi_edge - lo_edge) / PIECE_LENGTH))
        edges = np.linspace(lo_edge, hi_edge, k + 1)
        lefts.append(edges[:-1])
        rights.append(edges[1:])
    if lefts:
        return np.concatenate(lefts), np.concatenate(rights), isolated
    return np.zeros(0), np.zeros(0), isolated


def simulate_frechet(times, nu: float, seed, config: PoissonPointConfig | None = None) -> np.ndarray:
    """Unit-Frechet Smith process at strictly increasing ``times`` (days)."""
    config = config or PoissonPointConfig()
    times = np.asarray(times, dtype=float)
    if not nu > 0:
        raise ConfigError("nu must be positive")
    if times.size == 0:
        return np.zeros(0)
    if np.any(np.diff(times) <= 0):
        raise ConfigError("times must be strictly increasing")
    key = seed_key(seed)
    pad, reach = config.window_pad, config.reach
    s = times / nu
    z = np.zeros(s.size)

    left, right, isolated = _pieces(s, reach)
    iso = np.flatnonzero(isolated)
    z[iso] = -1.0 / np.log(hash_uniform(key, iso, 0, 2))

    length = right - left
    lo = np.searchsorted(s, left - pad, side="left")
    hi = np.searchsorted(s, right + pad, side="right")
    keep = hi > lo
    piece_id = np.flatnonzero(keep)
    left, length, lo, hi = left[keep], length[keep], lo[keep], hi[keep]

    n_pieces = piece_id.size
    gamma = np.zeros(n_pieces)
    count = np.zeros(n_pieces, dtype=np.int64)
    threshold = np.zeros(n_pieces)
    active = np.arange(n_pieces)
    z_ext = np.append(z, np.inf)
    batch = 4
    while active.size:
        rows_per_chunk = max(1, _MAX_SCATTER // (batch * 8))
        for c0 in range(0, active.size, rows_per_chunk):
            rows = active[c0 : c0 + rows_per_chunk]
            j = count[rows, None] + np.arange(batch)[None, :]
            cell = piece_id[rows, None]
            g = gamma[rows, None] + np.cumsum(-np.log(hash_uniform(key, cell, j, 0)), axis=1)
            w = length[rows, None] / (_SQRT_2PI * g)
            pos = left[rows, None] + length[rows, None] * hash_uniform(key, cell, j, 1)
            gamma[rows] = g[:, -1]
            useful = w >= threshold[rows, None]
            w, pos = w[useful], pos[useful]
            _scatter(z_ext, s, w, pos, pad)
        count[active] += batch
        if np.any(count[active] > config.max_points):
            raise ResolutionError("storm cap reached; raise max_points or window_pad")
        bounds = np.empty(2 * active.size, dtype=np.int64)
        bounds[0::2] = lo[active]
        bounds[1::2] = hi[active]
        threshold[active] = np.minimum.reduceat(z_ext, bounds)[0::2]
        next_peak = length[active] / (_SQRT_2PI * gamma[active])
        active = active[next_peak >= threshold[active]]
        batch = min(batch * 2, 1024)
    return z_ext[:-1]


def _scatter(z_ext, s, w, pos, pad):
    if w.size == 0:
        return
    a = np.searchsorted(s, pos - pad, side="left")
    b = np.searchsorted(s, pos + pad, side="right")
    counts = b - a
    total = int(counts.sum())
    n_split = max(1, -(-total // _MAX_SCATTER))
    for part in np.array_split(np.arange(w.size), n_split):
        idx, owner = _expand_ranges(a[part], b[part])
        if idx.size == 0:
            continue
        d = pos[part][owner] - s[idx]
        vals = w[part][owner] * np.exp(-0.5 * d * d)
        np.maximum.at(z_ext, idx, vals)


def _separate_blocks(times: np.ndarray, block_ids: np.ndarray, nu: float, reach: float) -> np.ndarray:
    """Shift blocks apart so that storms never span two blocks."""
    first = np.ones(times.size, dtype=bool)
    first[1:] = block_ids[1:] != block_ids[:-1]
    gap = 2.5 * reach * nu + 1.0
    starts = np.flatnonzero(first)
    shifted = times.copy()
    offset = 0.0
    for k, a in enumerate(starts):
        b = starts[k + 1] if k + 1 < starts.size else times.size
        shifted[a:b] = times[a:b] - times[a] + offset
        offset = shifted[b - 1] + gap
    return shifted


def simulate_smith(
    times,
    margin: GevMargin,
    nu: float,
    seed,
    block_ids=None,
    config: PoissonPointConfig | None = None,
) -> TimeSeries:
    """Smith process with GEV margin at ``times``; blocks are independent."""
    config = config or PoissonPointConfig()
    times = np.asarray(times, dtype=float)
    grid = times
    if block_ids is not None:
        block_ids = np.asarray(block_ids, dtype=np.int64)
        grid = _separate_blocks(times, block_ids, nu, config.reach)
    z = simulate_frechet(grid, nu, seed, config)
    return TimeSeries(times, from_frechet(z, margin), block_ids)


def apply_censoring(series: TimeSeries, u: float) -> CensoredSample:
    return CensoredSample(series.times, np.maximum(series.values, u), u, series.block_ids)


# --------------------------------------------------------------------------
# Reference models


class ReferenceKind(str, Enum):
    IID = "iid"
    AR1 = "ar1"
    LOGARMAX = "logarmax"
    OU = "ou"


@dataclass(frozen=True)
class ReferenceModelSpec:
    kind: ReferenceKind
    alpha: float = field(default=0.2)

    def __post_init__(self):
        object.__setattr__(self, "kind", ReferenceKind(self.kind))
        a = self.alpha
        if self.kind is ReferenceKind.AR1 and not -1 < a < 1:
            raise ConfigError("AR(1) needs |alpha| < 1")
        if self.kind is ReferenceKind.LOGARMAX and not 0 < a < 1:
            raise ConfigError("logARMAX needs 0 < alpha < 1")
        if self.kind is ReferenceKind.OU and not a > 0:
            raise ConfigError("OU needs alpha > 0")


def simulate_reference(spec: ReferenceModelSpec, scheme: SamplingScheme, seed) -> TimeSeries:
    """IID N(0,1), stationary AR(1), log-ARMAX(1) or exactly discretised OU."""
    seed_times, seed_values = spawn(seed, 2)
    times = make_times(scheme, seed_times)
    n = times.size
    rng = generator(seed_values)
    a = spec.alpha
    if spec.kind is ReferenceKind.IID:
        x = rng.standard_normal(n)
    elif spec.kind is ReferenceKind.AR1:
        eps = rng.standard_normal(n)
        eps[1:] *= sqrt(1.0 - a * a)
        x = lfilter([1.0], [1.0, -a], eps)
    elif spec.kind is ReferenceKind.LOGARMAX:
        frechet = -1.0 / np.log(rng.random(n + 1))
        u = np.empty(n)
        prev = frechet[0]
        shrink = 1.0 - a
        for k in range(n):
            prev = max(shrink * prev, a * frechet[k + 1])
            u[k] = prev
        x = np.log(u)
    else:
        eps = rng.standard_normal(n)
        x = np.empty(n)
        x[0] = eps[0]
        rho = np.exp(-a * np.diff(times))
        scale = np.sqrt(-np.expm1(-2.0 * a * np.diff(times)))
        for k in range(1, n):
            x[k] = rho[k - 1] * x[k - 1] + scale[k - 1] * eps[k]
    return TimeSeries(times, x)
