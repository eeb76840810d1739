"""Direct simulation: orbit clouds, Birkhoff averages, correlations, CLT checks.

Statistical orbits carry a seeded counter-based dither of amplitude 2**-48
per step.  Degree-2 affine branches are exact in binary floating point, so a
raw float64 orbit of such a map collapses onto dyadic fixed points once the
mantissa is exhausted; the dither keeps injecting entropy at the resolution
floor (the standard pseudo-orbit regularization) while leaving every
observable statistic unchanged at all accessible scales.  Geometric
operations (itineraries, refinements) never use it.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.stats

from . import kernels
from .errors import DegenerateObservableError
from .sampling import DITHER_EPS, uniform_stream
from .transfer import GridDensity

__all__ = [
    "Observable",
    "coord_x",
    "coord_y",
    "cos2pix",
    "indicator",
    "grid_sampled",
    "as_observable",
    "CloudResult",
    "CorrelationSeries",
    "CltReport",
    "push_cloud",
    "birkhoff_average",
    "correlation_series",
    "clt_diagnostic",
]


@dataclass(frozen=True)
class Observable:
    """A named bounded observable on the square, vectorized over points."""

    name: str
    fn: callable

    def __call__(self, x, y):
        return self.fn(np.asarray(x, dtype=float), np.asarray(y, dtype=float))


coord_x = Observable("coord_x", lambda x, y: x)
coord_y = Observable("coord_y", lambda x, y: y)
cos2pix = Observable("cos2pix", lambda x, y: np.cos(2.0 * np.pi * x))


def indicator(xlo, xhi, ylo, yhi):
    def fn(x, y):
        return ((x >= xlo) & (x < xhi) & (y >= ylo) & (y < yhi)).astype(float)

    return Observable(f"indicator[{xlo},{xhi})x[{ylo},{yhi})", fn)


def grid_sampled(density):
    return Observable(f"grid_sampled(m={density.resolution})", density.evaluate)


def as_observable(obj):
    if isinstance(obj, Observable):
        return obj
    if callable(obj):
        return Observable("custom", lambda x, y: np.asarray(obj(x, y), dtype=float))
    raise TypeError("observable must be an Observable or a callable f(x, y)")


_BUILTINS = {"coord_x": coord_x, "coord_y": coord_y, "cos2pix": cos2pix}


def builtin_observable(name):
    try:
        return _BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown observable {name!r}; builtins: {sorted(_BUILTINS)}") from None


# -- orbit plumbing -------------------------------------------------------------


def _advance(ghm, x, y, steps, seed, t_offset=0, dither=DITHER_EPS):
    """Advance a cloud in place with the seeded dither; returns boundary hits."""
    if ghm.table is not None:
        return kernels.advance_cloud(
            *ghm.table, x, y, steps, seed=seed, dither=dither, t_offset=t_offset
        )
    n = x.shape[0]
    hits = 0
    for t in range(1, steps + 1):
        nx, ny = ghm.step(x, y)
        if dither > 0.0:
            k = np.uint64(2) * (np.uint64(t_offset + t) * np.uint64(n) + np.arange(n, dtype=np.uint64))
            nx += (uniform_stream(seed, k) - 0.5) * dither
            ny += (uniform_stream(seed, k + np.uint64(1)) - 0.5) * dither
        np.clip(nx, 0.0, 1.0, out=nx)
        np.clip(ny, 0.0, 1.0, out=ny)
        x[:] = nx
        y[:] = ny
    return hits


def _orbit(ghm, z, steps, seed, dither=DITHER_EPS):
    if ghm.table is not None:
        return kernels.orbit(*ghm.table, float(z[0]), float(z[1]), steps, seed=seed, dither=dither)
    x = np.array([float(z[0])])
    y = np.array([float(z[1])])
    xs = np.empty(steps + 1)
    ys = np.empty(steps + 1)
    xs[0], ys[0] = x[0], y[0]
    for t in range(steps):
        _advance(ghm, x, y, 1, seed, t_offset=t, dither=dither)
        xs[t + 1], ys[t + 1] = x[0], y[0]
    return xs, ys


def _histogram(x, y, m):
    ix = np.clip((x * m).astype(np.int64), 0, m - 1)
    iy = np.clip((y * m).astype(np.int64), 0, m - 1)
    counts = np.bincount(ix * m + iy, minlength=m * m)
    return GridDensity.from_counts(m, counts)


# -- operations ------------------------------------------------------------------


@dataclass(frozen=True)
class CloudResult:
    density: GridDensity
    snapshots: dict
    boundary_hits: int


def push_cloud(ghm, num_points, iterations, seed, m, snapshot_steps=()):
    """Advance a uniform cloud and histogram it on an m-by-m grid.

    Returns the final histogram plus one snapshot histogram per requested
    step.  Points landing exactly on a strip boundary are nudged into the
    lower branch by 1e-12 and counted in ``boundary_hits``.
    """
    if num_points < 1000:
        raise ValueError("need at least 1000 points")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    rng = np.random.default_rng(seed)
    x = rng.random(num_points)
    y = rng.random(num_points)
    marks = sorted({int(s) for s in snapshot_steps})
    if any(s < 0 or s > iterations for s in marks):
        raise ValueError("snapshot steps must lie in [0, iterations]")
    snaps = {}
    hits = 0
    done = 0
    if 0 in marks:
        snaps[0] = _histogram(x, y, m)
    for s in [t for t in marks if t > 0] + [iterations]:
        if s > done:
            hits += _advance(ghm, x, y, s - done, seed, t_offset=done)
            done = s
        if s in marks:
            snaps[s] = _histogram(x, y, m)
    return CloudResult(density=_histogram(x, y, m), snapshots=snaps, boundary_hits=hits)


def _seed_from_point(z):
    b = np.float64(z[0]).tobytes() + np.float64(z[1]).tobytes()
    return int.from_bytes(b, "little") & 0xFFFFFFFFFFFFFFFF


def birkhoff_average(ghm, f, z, n, seed=None):
    """Time average of an observable over the first n orbit points.

    The dither seed defaults to a hash of the starting point, so repeated
    calls are reproducible without an explicit seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    f = as_observable(f)
    if seed is None:
        seed = _seed_from_point(z)
    xs, ys = _orbit(ghm, z, n - 1, seed)
    return float(np.mean(f(xs, ys)))


@dataclass(frozen=True)
class CorrelationSeries:
    """Empirical autocovariance sequence along one long orbit."""

    lags: np.ndarray
    values: np.ndarray
    fitted_rate: float
    noise_floor: float

    @property
    def variance(self):
        return float(self.values[0])


def correlation_series(ghm, f, g, n_max, orbit_len, burn_in=1000, seed=0):
    """C(n) = time average of f * (g after n steps) minus the product of means.

    Computed along a single burn-in-discarded orbit; the exponential rate is
    the least-squares slope of log |C(n)| over the initial lags exceeding the
    Monte Carlo noise floor 3 / sqrt(orbit_len), reported only when at least
    4 lags qualify.
    """
    if orbit_len < 100 * n_max:
        raise ValueError("orbit_len must be at least 100 * n_max")
    f = as_observable(f)
    g = as_observable(g)
    xs, ys = _orbit(ghm, _start_point(seed), burn_in + orbit_len - 1, seed)
    xs = xs[burn_in:]
    ys = ys[burn_in:]
    fs = np.asarray(f(xs, ys), dtype=float)
    gs = np.asarray(g(xs, ys), dtype=float)
    if float(np.var(fs)) < 1e-12 or float(np.var(gs)) < 1e-12:
        raise DegenerateObservableError("observable variance below 1e-12 along the orbit")
    fc = fs - fs.mean()
    gc = gs - gs.mean()
    L = fs.size
    lags = np.arange(n_max + 1)
    vals = np.empty(n_max + 1)
    for n in lags:
        vals[n] = float(np.dot(fc[: L - n], gc[n:]) / (L - n))
    floor = 3.0 / math.sqrt(orbit_len)
    keep = 0
    while keep <= n_max and abs(vals[keep]) > floor:
        keep += 1
    rate = None
    if keep >= 4:
        slope = np.polyfit(lags[:keep], np.log(np.abs(vals[:keep])), 1)[0]
        rate = float(-slope)
    return CorrelationSeries(lags=lags, values=vals, fitted_rate=rate, noise_floor=floor)


def _start_point(seed):
    rng = np.random.default_rng(seed)
    return tuple(rng.random(2))


@dataclass(frozen=True)
class CltReport:
    ks_statistic: float
    mean: float
    variance: float

    def to_dict(self):
        return {"ks_statistic": self.ks_statistic, "mean": self.mean, "variance": self.variance}


def clt_diagnostic(ghm, f, block_len, samples, seed=0):
    """Kolmogorov-Smirnov distance of normalized Birkhoff sums to a fitted normal.

    Draws independent uniform starts, forms centered block sums scaled by
    1/sqrt(block_len), and compares their empirical distribution to a normal
    with the sample's mean and standard deviation.
    """
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    if block_len < 100:
        raise ValueError("block_len must be >= 100")
    f = as_observable(f)
    rng = np.random.default_rng(seed)
    x = rng.random(samples)
    y = rng.random(samples)
    sums = np.zeros(samples)
    for t in range(block_len):
        sums += f(x, y)
        _advance(ghm, x, y, 1, seed, t_offset=t)
    averages = sums / block_len
    w = math.sqrt(block_len) * (averages - averages.mean())
    var = float(w.var())
    if var < 1e-12:
        raise DegenerateObservableError("block sums have (numerically) zero variance")
    ks = scipy.stats.kstest(w, "norm", args=(float(w.mean()), float(w.std())))
    return CltReport(ks_statistic=float(ks.statistic), mean=float(w.mean()), variance=var)
