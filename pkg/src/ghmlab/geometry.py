"""Polyline graphs, curvilinear strips, and bracketing root solves.

Strips are the basic geometric currency of the package: a vertical strip is
the region between two graphs ``x = g(y)`` over the full height of the unit
square, a horizontal strip the region between two graphs ``y = g(x)`` over the
full width.  Boundaries are stored as sampled polylines on a shared parameter
grid; for affine maps the sampled graphs are exact (lines map to lines).
"""

from dataclasses import dataclass, field

import numpy as np

#: Default membership / root tolerance for geometric predicates.
GEOM_TOL = 1e-12

#: Area tolerance for covering / disjointness checks.
AREA_TOL = 1e-9

_BASE_GRID_POW = 6
_MAX_GRID_POW = 14


def param_grid(level):
    """Uniform parameter grid for refinement depth ``level`` (1-based).

    Starts at 2**6 intervals and doubles per level, capped at 2**14.
    """
    n = 2 ** min(_BASE_GRID_POW + max(level - 1, 0), _MAX_GRID_POW)
    return np.linspace(0.0, 1.0, n + 1)


@dataclass(frozen=True, eq=False)
class StripRegion:
    """A curvilinear strip bounded by two graph polylines.

    For ``orientation == "vertical"`` the parameter is y and the boundaries
    are left/right x-values; for ``"horizontal"`` the parameter is x and the
    boundaries are bottom/top y-values.  ``lower <= upper`` pointwise.
    """

    orientation: str
    param: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    empty: bool = field(default=False)

    def __post_init__(self):
        if self.orientation not in ("vertical", "horizontal"):
            raise ValueError(f"bad orientation {self.orientation!r}")
        if not self.empty:
            if self.param.shape != self.lower.shape or self.param.shape != self.upper.shape:
                raise ValueError("boundary arrays must share the parameter grid")
            if np.any(self.upper < self.lower - GEOM_TOL):
                raise ValueError("strip boundaries cross")

    @classmethod
    def empty_region(cls, orientation):
        z = np.zeros(2)
        return cls(orientation, np.array([0.0, 1.0]), z, z, empty=True)

    @classmethod
    def vertical_interval(cls, lo, hi, grid=None):
        """Straight vertical strip [lo, hi] x [0, 1]."""
        t = param_grid(1) if grid is None else grid
        return cls("vertical", t, np.full_like(t, float(lo)), np.full_like(t, float(hi)))

    @classmethod
    def horizontal_graphs(cls, xs, bottom, top):
        return cls("horizontal", xs, bottom, top)

    @property
    def width(self):
        """Maximum extent transverse to the strip direction."""
        if self.empty:
            return 0.0
        return float(np.max(self.upper - self.lower))

    def lower_at(self, t):
        return np.interp(t, self.param, self.lower)

    def upper_at(self, t):
        return np.interp(t, self.param, self.upper)

    def interval_bounds(self):
        """(lo, hi) when both boundaries are straight, else None."""
        if self.empty:
            return None
        if np.ptp(self.lower) <= GEOM_TOL and np.ptp(self.upper) <= GEOM_TOL:
            return float(self.lower[0]), float(self.upper[0])
        return None

    def contains(self, x, y, tol=GEOM_TOL):
        """Closed-set membership for points (vectorized)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.empty:
            return np.zeros(np.broadcast(x, y).shape, dtype=bool)
        if self.orientation == "vertical":
            t, u = y, x
        else:
            t, u = x, y
        inside_t = (t >= -tol) & (t <= 1.0 + tol)
        lo = np.interp(t, self.param, self.lower)
        hi = np.interp(t, self.param, self.upper)
        return inside_t & (u >= lo - tol) & (u <= hi + tol)

    def midline(self):
        """Midline polyline as an (N, 2) array of (x, y) vertices."""
        mid = 0.5 * (self.lower + self.upper)
        if self.orientation == "vertical":
            return np.column_stack([mid, self.param])
        return np.column_stack([self.param, mid])

    def max_boundary_slope(self):
        """Largest |d(boundary)/d(param)| over both boundary polylines."""
        if self.empty:
            return 0.0
        dt = np.diff(self.param)
        s1 = np.abs(np.diff(self.lower) / dt)
        s2 = np.abs(np.diff(self.upper) / dt)
        return float(max(s1.max(initial=0.0), s2.max(initial=0.0)))

    def area(self):
        """Area enclosed between the two boundaries (trapezoid rule)."""
        if self.empty:
            return 0.0
        return float(np.trapezoid(self.upper - self.lower, self.param))

    def contains_strip(self, other, tol=AREA_TOL):
        """Whether ``other`` nests inside this strip, up to ``tol``."""
        if other.empty:
            return True
        lo = np.interp(other.param, self.param, self.lower)
        hi = np.interp(other.param, self.param, self.upper)
        return bool(np.all(other.lower >= lo - tol) and np.all(other.upper <= hi + tol))


def bisect_monotone(phi, lo, hi, iters=60):
    """Vectorized bisection for a sign change of ``phi`` on [lo, hi].

    ``phi`` maps an array of abscissae to an array of values and must be
    monotone on each bracket.  Roots land within ``(hi - lo) * 2**-iters``.
    Brackets without a sign change (roots at or just beyond an endpoint,
    which bracket construction can produce at rounding scale) resolve to the
    endpoint with the smaller residual.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    a = lo.copy()
    b = hi.copy()
    fa = phi(a)
    fb = phi(b)
    no_change = (fa > 0) == (fb > 0)
    endpoint = np.where(np.abs(fa) <= np.abs(fb), lo, hi)
    for _ in range(iters):
        mid = 0.5 * (a + b)
        fm = phi(mid)
        same = (fm > 0) == (fa > 0)
        a = np.where(same, mid, a)
        fa = np.where(same, fm, fa)
        b = np.where(same, b, mid)
    return np.where(no_change, endpoint, 0.5 * (a + b))


def graph_distance(p_param, p_vals, q_param, q_vals):
    """Sup distance between two graphs over the overlap of their parameters."""
    t = np.union1d(p_param, q_param)
    pv = np.interp(t, p_param, p_vals)
    qv = np.interp(t, q_param, q_vals)
    return float(np.max(np.abs(pv - qv)))


def polyline_hausdorff(p, q, cap=2048):
    """Symmetric Hausdorff distance between two (N, 2) polylines.

    Vertex-sampled; polylines longer than ``cap`` are decimated first.
    """
    def thin(a):
        if len(a) > cap:
            idx = np.linspace(0, len(a) - 1, cap).round().astype(int)
            return a[idx]
        return a

    p = thin(np.asarray(p, dtype=float))
    q = thin(np.asarray(q, dtype=float))
    d2 = ((p[:, None, :] - q[None, :, :]) ** 2).sum(axis=2)
    forward = np.sqrt(d2.min(axis=1)).max()
    backward = np.sqrt(d2.min(axis=0)).max()
    return float(max(forward, backward))


def overlap_length(lo1, hi1, lo2, hi2):
    """Pointwise overlap of two interval families (vectorized)."""
    return np.maximum(0.0, np.minimum(hi1, hi2) - np.maximum(lo1, lo2))
