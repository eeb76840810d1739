"""Words, nested strip refinement, manifolds, attractor cells, itineraries.

Vertical strips refine backward (pull the previous strip through a branch
inverse), horizontal strips refine forward (push the previous strip through a
branch restricted to its domain).  Cone invariance keeps every refined
boundary a graph with slope below k, so boundaries stay representable as
polyline graphs on a uniform parameter grid that doubles per level.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyStripError, OrbitBoundaryError, OverlapError, UnknownSymbolError
from .geometry import GEOM_TOL, StripRegion, bisect_monotone, param_grid

__all__ = [
    "Word",
    "ChartApprox",
    "refine_strip",
    "manifold_approx",
    "attractor_cells",
    "itinerary",
    "straightening_chart",
]


@dataclass(frozen=True)
class Word:
    """A finite symbol sequence over branch ids.

    ``orientation`` selects the refinement direction: "stable" words name
    nested vertical strips, "unstable" words nested horizontal strips.
    ``boundary_steps`` records orbit steps that landed on a strip boundary
    when the word came from an itinerary (empty otherwise).
    """

    symbols: tuple
    orientation: str = "stable"
    boundary_steps: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        if len(self.symbols) < 1:
            raise ValueError("a word needs at least one symbol")
        if self.orientation not in ("stable", "unstable"):
            raise ValueError(f"bad orientation {self.orientation!r}")

    def __len__(self):
        return len(self.symbols)

    def extended(self, depth):
        """Periodic extension (or truncation) to exactly ``depth`` symbols."""
        reps = -(-depth // len(self.symbols))
        return Word((self.symbols * reps)[:depth], self.orientation)


def _check_symbols(ghm, symbols):
    for s in symbols:
        if s not in ghm._by_id:
            raise UnknownSymbolError(f"branch id {s} not in map (ids {ghm.branch_ids})")


def _pullback_vertical(branch, inner, level):
    """Preimage of a vertical strip (clipped to the branch image) under one branch."""
    ys = param_grid(level)
    lo_b = branch.domain.lower_at(ys)
    hi_b = branch.domain.upper_at(ys)

    def solve(graph_vals):
        def phi(x):
            X, Y = branch.forward(x, ys)
            return X - np.interp(Y, inner.param, graph_vals)

        return bisect_monotone(phi, lo_b, hi_b)

    g1 = solve(inner.lower)
    g2 = solve(inner.upper)
    lower = np.minimum(g1, g2)
    upper = np.maximum(g1, g2)
    if np.all(upper - lower <= -GEOM_TOL):
        return StripRegion.empty_region("vertical")
    return StripRegion("vertical", ys, lower, upper)


def _pushforward_horizontal(branch, inner, level):
    """Image of (branch domain intersected with a horizontal strip) under the branch."""
    xs = param_grid(level)

    def curve_entry_exit(graph_vals):
        def psi(bound_attr):
            def f(x):
                y = np.interp(x, inner.param, graph_vals)
                return x - getattr(branch.domain, bound_attr)(y)

            return f

        enter = bisect_monotone(psi("lower_at"), np.zeros(1), np.ones(1))[0]
        exit_ = bisect_monotone(psi("upper_at"), np.zeros(1), np.ones(1))[0]
        return min(enter, exit_), max(enter, exit_)

    def solve(graph_vals):
        a, b = curve_entry_exit(graph_vals)
        lo = np.full_like(xs, a)
        hi = np.full_like(xs, b)

        def phi(x):
            y = np.interp(x, inner.param, graph_vals)
            X, _ = branch.forward(x, y)
            return X - xs

        roots = bisect_monotone(phi, lo, hi)
        y = np.interp(roots, inner.param, graph_vals)
        _, Y = branch.forward(roots, y)
        return Y

    g1 = solve(inner.lower)
    g2 = solve(inner.upper)
    lower = np.minimum(g1, g2)
    upper = np.maximum(g1, g2)
    if np.all(upper - lower <= -GEOM_TOL):
        return StripRegion.empty_region("horizontal")
    return StripRegion("horizontal", xs, lower, upper)


def refine_strip(ghm, word):
    """The nested strip named by a word.

    Stable words [a_1..a_n] produce the vertical strip of points whose
    forward itinerary starts a_1, ..., a_n (pullback recursion); unstable
    words produce the horizontal strip of points whose backward branch
    history reads a_1, ..., a_n (pushforward recursion).  Returns an empty
    region marker only when a refinement degenerates, which cannot happen for
    maps whose images span the full width.
    """
    if not isinstance(word, Word):
        raise TypeError("refine_strip expects a Word")
    _check_symbols(ghm, word.symbols)
    syms = word.symbols
    n = len(syms)
    if word.orientation == "stable":
        region = ghm.branch(syms[-1]).domain
        for j in range(n - 2, -1, -1):
            level = n - j
            region = _pullback_vertical(ghm.branch(syms[j]), region, level)
            if region.empty:
                return region
        return region
    region = ghm.branch(syms[-1]).image
    for j in range(n - 2, -1, -1):
        level = n - j
        region = _pushforward_horizontal(ghm.branch(syms[j]), region, level)
        if region.empty:
            return region
    return region


def manifold_approx(ghm, word, depth):
    """Midline polyline of the depth-n refined strip (approximate manifold).

    Words shorter than ``depth`` are extended periodically.  Successive
    depths converge at the strip width-contraction rate.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    w = word if isinstance(word, Word) else Word(tuple(word), "stable")
    strip = refine_strip(ghm, w.extended(depth))
    if strip.empty:
        raise EmptyStripError(f"word {w.symbols} refines to an empty strip at depth {depth}")
    return strip.midline()


def _mark_cells_generic(ghm, mask, sub):
    m = mask.shape[0]
    occ = np.argwhere(mask)
    out = np.zeros_like(mask)
    if occ.size == 0:
        return out
    offs = np.arange(sub) * (1.0 / (sub - 1) if sub > 1 else 0.0)
    ox, oy = np.meshgrid(offs, offs, indexing="ij")
    ox = ox.ravel()
    oy = oy.ravel()
    chunk = max(1, 1_000_000 // (sub * sub))
    for s in range(0, occ.shape[0], chunk):
        cells = occ[s : s + chunk]
        px = ((cells[:, 0:1] + ox[None, :]) / m).ravel()
        py = ((cells[:, 1:2] + oy[None, :]) / m).ravel()
        nx, ny = ghm.step(px, py)
        dx = np.clip((nx * m).astype(np.int64), 0, m - 1)
        dy = np.clip((ny * m).astype(np.int64), 0, m - 1)
        out[dx, dy] = True
    return out


def attractor_cells(ghm, depth, resolution, sub=9):
    """Grid cells meeting the depth-th forward image of the square.

    Standard cell-mapping sweep: start from every cell, repeatedly mark the
    destination cells of an inclusive sub-lattice per occupied cell, and
    intersect with the previous generation (images of the square nest, so the
    cell sets are antitone in depth).  Returns an (m, m) boolean mask.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    m = int(resolution)
    mask = np.ones((m, m), dtype=bool)
    for _ in range(depth):
        if ghm.table is not None:
            from . import kernels

            marked = kernels.mark_cells(*ghm.table, mask, sub=sub)
        else:
            marked = _mark_cells_generic(ghm, mask, sub)
        mask = marked & mask
    return mask


def itinerary(ghm, z, n, strict=False):
    """Forward itinerary of a point, using the lower-branch boundary tie rule.

    Steps whose point lies within 1e-12 of a domain boundary are recorded in
    the returned word's ``boundary_steps``; with ``strict=True`` the first
    such step raises OrbitBoundaryError instead.  The orbit here is the pure
    map, with no statistical dither.
    """
    if n < 1:
        raise ValueError("need at least one symbol")
    x, y = float(z[0]), float(z[1])
    symbols = []
    flagged = []
    for step in range(n):
        idx, on_boundary = ghm.branch_index_scalar((x, y))
        if idx is None:
            raise OrbitBoundaryError(step)
        # interior-of-square check is not a strip-boundary hit; re-check x only
        b = ghm.branches[idx]
        lo = float(b.domain.lower_at(y))
        hi = float(b.domain.upper_at(y))
        near_strip_edge = min(abs(x - lo), abs(x - hi)) <= GEOM_TOL and not (
            abs(x) <= GEOM_TOL and idx == 0
        ) and not (abs(x - 1.0) <= GEOM_TOL and idx == ghm.n_branches - 1)
        if near_strip_edge:
            if strict:
                raise OrbitBoundaryError(step)
            flagged.append(step)
        symbols.append(b.id)
        fx, fy = b.forward(x, y)
        x, y = float(fx), float(fy)
    return Word(tuple(symbols), "stable", boundary_steps=tuple(flagged))


@dataclass(frozen=True)
class ChartApprox:
    """Approximate straightening-chart leaf through a base point (x, 1)."""

    base_x: float
    polyline: np.ndarray
    slope_sup: float
    derivative_band: tuple
    delta0: float


def straightening_chart(ghm, x, depth):
    """Stable-leaf polyline through (x, 1) with its arclength-derivative band.

    Defined through the stable foliation, so the map must be non-overlapping.
    The leaf is interpolated inside the depth-n vertical strip containing the
    base point at the same relative transverse position, which converges at
    the strip width rate.  Reports the largest graph slope and the empirical
    derivative bound delta0 with sup ||(chart leaf)'|| inside
    [1/(1+delta0), 1+delta0].
    """
    if ghm.overlap_flag:
        raise OverlapError("the straightening chart needs a non-overlapping map")
    if depth < 2:
        raise ValueError("depth must be >= 2")
    x = float(x)
    word = itinerary(ghm, (x, 1.0), depth)
    strip = refine_strip(ghm, Word(word.symbols, "stable"))
    lo1 = float(strip.lower_at(1.0))
    hi1 = float(strip.upper_at(1.0))
    s = 0.5 if hi1 - lo1 <= GEOM_TOL else min(max((x - lo1) / (hi1 - lo1), 0.0), 1.0)
    leaf = strip.lower + s * (strip.upper - strip.lower)
    t = strip.param
    slopes = np.gradient(leaf, t)
    band = np.hypot(slopes, 1.0)
    delta0 = float(np.max(band) - 1.0)
    return ChartApprox(
        base_x=x,
        polyline=np.column_stack([leaf, t]),
        slope_sup=float(np.max(np.abs(slopes))),
        derivative_band=(float(np.min(band)), float(np.max(band))),
        delta0=delta0,
    )
