"""Horseshoe map construction, evaluation, and axiom validation.

A generalized horseshoe map of the unit square S sends closed curvilinear
vertical strips (full height, graph boundaries with slope below k) onto
horizontal strips (full width, graph boundaries with slope below k) by a
diffeomorphism per strip, with uniform cone hyperbolicity in the maximum
norm: unstable cone vectors expand by at least lambda under the differential
and stable cone vectors expand by at least lambda under its inverse.
"""

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    GeometryInfeasibleError,
    InvariantViolation,
    SchemaError,
    SingularPointError,
)
from .geometry import AREA_TOL, GEOM_TOL, StripRegion, overlap_length, param_grid
from .sampling import halton

__all__ = [
    "AffineBranch",
    "SmoothBranch",
    "GhmMap",
    "ConeReport",
    "build_affine_family",
    "max_feasible_angle_scale",
    "load_map_spec",
    "save_map_spec",
    "differential",
    "preimages",
    "validate_hyperbolicity",
    "estimate_distortion",
    "single_branch_map",
    "smooth_perturbation",
]


def _edge_image_graphs(branch, xs):
    """Image bottom/top graphs over the x-grid, from the domain's y-edges."""
    graphs = []
    for y_edge in (0.0, 1.0):
        lo = float(branch.domain.lower_at(y_edge))
        hi = float(branch.domain.upper_at(y_edge))
        t = np.linspace(lo, hi, 1025)
        X, Y = branch.forward(t, np.full_like(t, y_edge))
        order = np.argsort(X)
        graphs.append(np.interp(xs, X[order], Y[order]))
    g0, g1 = graphs
    if np.mean(g0) <= np.mean(g1):
        return g0, g1
    return g1, g0


@dataclass(frozen=True, eq=False)
class AffineBranch:
    """One affine branch: z maps to ``linear @ z + offset`` on its domain."""

    id: int
    domain: StripRegion
    linear: np.ndarray
    offset: np.ndarray

    is_affine = True

    def __post_init__(self):
        object.__setattr__(self, "linear", np.asarray(self.linear, dtype=float).reshape(2, 2))
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=float).reshape(2))

    @cached_property
    def det(self):
        return float(np.linalg.det(self.linear))

    @cached_property
    def inv_linear(self):
        return np.linalg.inv(self.linear)

    @cached_property
    def inv_offset(self):
        return -self.inv_linear @ self.offset

    @cached_property
    def image(self):
        xs = param_grid(1)
        bottom, top = _edge_image_graphs(self, xs)
        return StripRegion("horizontal", xs, bottom, top)

    def forward(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        a, c = self.linear, self.offset
        return a[0, 0] * x + a[0, 1] * y + c[0], a[1, 0] * x + a[1, 1] * y + c[1]

    def inverse(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        b, d = self.inv_linear, self.inv_offset
        return b[0, 0] * X + b[0, 1] * Y + d[0], b[1, 0] * X + b[1, 1] * Y + d[1]

    def diff_at(self, x, y):
        return self.linear

    def diff_batch(self, x, y):
        n = np.broadcast(np.asarray(x), np.asarray(y)).size
        return np.broadcast_to(self.linear, (n, 2, 2))


@dataclass(frozen=True, eq=False)
class SmoothBranch:
    """A non-affine branch given by callables (test-fixture interface).

    ``fwd`` and ``inv`` accept coordinate arrays, ``dfwd`` accepts a scalar
    point and returns the 2x2 differential.  Smooth branches are not part of
    the serialized wire format.
    """

    id: int
    domain: StripRegion
    fwd: callable
    dfwd: callable
    inv: callable

    is_affine = False

    @cached_property
    def image(self):
        xs = param_grid(1)
        bottom, top = _edge_image_graphs(self, xs)
        return StripRegion("horizontal", xs, bottom, top)

    def forward(self, x, y):
        return self.fwd(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def inverse(self, X, Y):
        return self.inv(np.asarray(X, dtype=float), np.asarray(Y, dtype=float))

    def diff_at(self, x, y):
        return np.asarray(self.dfwd(float(x), float(y)), dtype=float).reshape(2, 2)

    def diff_batch(self, x, y):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.empty((x.size, 2, 2))
        for i in range(x.size):
            out[i] = self.diff_at(x[i], y[i])
        return out


class GhmMap:
    """A finite generalized horseshoe map with global cone constants (k, lam).

    Branches are kept sorted left to right; ids must increase in the same
    order so that "lower-indexed branch" is unambiguous in tie rules.
    Instances are immutable after construction and safe to share across
    threads.
    """

    def __init__(self, branches, k, lam, validate=True):
        branches = sorted(branches, key=lambda b: float(np.mean(b.domain.lower + b.domain.upper)))
        self.branches = tuple(branches)
        self.k = float(k)
        self.lam = float(lam)
        self._by_id = {b.id: b for b in self.branches}
        if len(self._by_id) != len(self.branches):
            raise InvariantViolation("ID", "branch ids must be unique")
        self.table = self._build_table()
        self.overlap_flag = self._compute_overlap()
        if validate:
            self._validate()

    # -- construction helpers -------------------------------------------------

    def _build_table(self):
        if not all(b.is_affine for b in self.branches):
            return None
        intervals = [b.domain.interval_bounds() for b in self.branches]
        if any(iv is None for iv in intervals):
            return None
        lo = np.array([iv[0] for iv in intervals])
        hi = np.array([iv[1] for iv in intervals])
        if abs(lo[0]) > AREA_TOL or abs(hi[-1] - 1.0) > AREA_TOL:
            return None
        if np.any(np.abs(hi[:-1] - lo[1:]) > AREA_TOL):
            return None
        breaks = np.ascontiguousarray(hi[:-1])
        A = np.ascontiguousarray(np.stack([b.linear for b in self.branches]))
        c = np.ascontiguousarray(np.stack([b.offset for b in self.branches]))
        return breaks, A, c

    def _compute_overlap(self):
        xs = param_grid(2)
        bots = [b.image.lower_at(xs) for b in self.branches]
        tops = [b.image.upper_at(xs) for b in self.branches]
        for i in range(len(self.branches)):
            for j in range(i + 1, len(self.branches)):
                ov = overlap_length(bots[i], tops[i], bots[j], tops[j])
                if float(np.trapezoid(ov, xs)) > AREA_TOL:
                    return True
        return False

    def _validate(self):
        if not self.branches:
            raise InvariantViolation("GHM2", "a map needs at least one branch")
        if not (0.0 < self.k < 1.0):
            raise InvariantViolation("K", f"cone aperture k={self.k} must lie in (0, 1)")
        if not (self.lam > 1.0):
            raise InvariantViolation("H2", f"expansion constant lambda={self.lam} must exceed 1")
        ys = param_grid(1)
        prev_hi = np.zeros_like(ys)
        prev_id = None
        for b in self.branches:
            if b.id <= 0:
                raise InvariantViolation("ID", "branch ids must be positive integers")
            if prev_id is not None and b.id <= prev_id:
                raise InvariantViolation("ID", "branch ids must increase left to right")
            prev_id = b.id
            if b.domain.max_boundary_slope() >= self.k:
                raise InvariantViolation(
                    "SLOPE", f"branch {b.id} domain boundary slope exceeds k={self.k}"
                )
            if b.image.max_boundary_slope() >= self.k:
                raise InvariantViolation(
                    "SLOPE", f"branch {b.id} image boundary slope exceeds k={self.k}"
                )
            lo = b.domain.lower_at(ys)
            hi = b.domain.upper_at(ys)
            ov = float(np.trapezoid(np.maximum(0.0, prev_hi - lo), ys))
            gap = float(np.trapezoid(np.maximum(0.0, lo - prev_hi), ys))
            if ov > AREA_TOL:
                raise InvariantViolation("GHM1", f"branch {b.id} domain overlaps its left neighbour")
            if gap > AREA_TOL:
                raise InvariantViolation("GHM2", f"gap of area {gap:.3g} before branch {b.id}")
            prev_hi = hi
            if np.any(b.image.lower < -AREA_TOL) or np.any(b.image.upper > 1.0 + AREA_TOL):
                raise InvariantViolation("IMAGE", f"branch {b.id} image leaves the unit square")
            self._check_injectivity(b)
        closing_gap = float(np.trapezoid(np.maximum(0.0, 1.0 - prev_hi), ys))
        if closing_gap > AREA_TOL:
            raise InvariantViolation("GHM2", f"domains leave a gap of area {closing_gap:.3g} at x=1")
        self._check_spanning()

    def _check_injectivity(self, branch):
        pts = halton(128, 2)
        y = pts[:, 1]
        lo = branch.domain.lower_at(y)
        hi = branch.domain.upper_at(y)
        x = lo + pts[:, 0] * (hi - lo)
        X, Y = branch.forward(x, y)
        bx, by = branch.inverse(X, Y)
        err = max(np.max(np.abs(bx - x)), np.max(np.abs(by - y)))
        if err > 1e-10:
            raise InvariantViolation(
                "INVERSE", f"branch {branch.id} inverse mismatch {err:.3g} on sampled points"
            )

    def _check_spanning(self):
        # Images must span the full width: domain-boundary images pin to x in {0, 1}.
        ys = np.linspace(0.0, 1.0, 64)
        for b in self.branches:
            for side in ("lower", "upper"):
                g = getattr(b.domain, side)
                gx = np.interp(ys, b.domain.param, g)
                X, _ = b.forward(gx, ys)
                d = np.minimum(np.abs(X), np.abs(X - 1.0))
                if np.max(d) > 1e-6:
                    raise InvariantViolation(
                        "IMAGE", f"branch {b.id} image does not span the full width"
                    )

    # -- evaluation ------------------------------------------------------------

    @property
    def n_branches(self):
        return len(self.branches)

    @property
    def branch_ids(self):
        return tuple(b.id for b in self.branches)

    def branch(self, branch_id):
        try:
            return self._by_id[branch_id]
        except KeyError:
            raise KeyError(f"no branch with id {branch_id}") from None

    def locate(self, x, y):
        """0-based branch position per point, boundary points to the lower index."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.table is not None:
            return np.searchsorted(self.table[0], x, side="left")
        idx = np.full(np.broadcast(x, y).shape, -1, dtype=np.int64)
        for i in reversed(range(self.n_branches)):
            idx = np.where(self.branches[i].domain.contains(x, y), i, idx)
        return idx

    def step(self, x, y):
        """One forward step for point batches (pure, no dither)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.table is not None:
            from . import kernels

            return kernels.step_points(*self.table, x, y)
        idx = self.locate(x, y)
        nx = np.empty_like(x)
        ny = np.empty_like(y)
        for i, b in enumerate(self.branches):
            sel = idx == i
            if np.any(sel):
                nx[sel], ny[sel] = b.forward(x[sel], y[sel])
        return nx, ny

    def branch_index_scalar(self, z, tol=GEOM_TOL):
        """(position, on_boundary) for one point; position is None outside S."""
        x, y = float(z[0]), float(z[1])
        if not (-tol <= x <= 1.0 + tol and -tol <= y <= 1.0 + tol):
            return None, False
        for i, b in enumerate(self.branches):
            lo = float(b.domain.lower_at(y))
            hi = float(b.domain.upper_at(y))
            if lo - tol <= x <= hi + tol:
                on_boundary = (
                    abs(x - lo) <= tol
                    or abs(x - hi) <= tol
                    or y <= tol
                    or y >= 1.0 - tol
                )
                return i, on_boundary
        return None, False

    def preimage_list(self, z, tol=GEOM_TOL):
        """All (branch, point) pairs with branch.forward(point) == z."""
        zx, zy = float(z[0]), float(z[1])
        out = []
        for b in self.branches:
            px, py = b.inverse(zx, zy)
            px, py = float(px), float(py)
            if not b.domain.contains(px, py, tol=tol):
                continue
            fx, fy = b.forward(px, py)
            if max(abs(float(fx) - zx), abs(float(fy) - zy)) <= 1e-9:
                out.append((b, (px, py)))
        return out

    @property
    def is_nonoverlapping(self):
        return not self.overlap_flag

    def __repr__(self):
        return (
            f"GhmMap(n={self.n_branches}, k={self.k:.4g}, lam={self.lam:.4g}, "
            f"overlap={self.overlap_flag})"
        )


# -- family constructor --------------------------------------------------------


def max_feasible_angle_scale(n, lambda_c, layout="spread"):
    """Largest angle damping factor keeping every branch image inside S.

    For the spread layout the binding constraint is tan(alpha_n) <= 1 - lambda_c;
    for the stack layout the images must still stack within unit height.  The
    returned value is shrunk by a relative 1e-12 so downstream feasibility
    checks hold with strict floating-point margins.
    """
    theta = math.asin(1.0 - lambda_c)
    if layout == "spread":
        s = math.atan(1.0 - lambda_c) / theta
        return min(1.0, s) * (1.0 - 1e-12)
    if layout == "stack":
        def excess(s):
            tans = [math.tan(s * (i / n) * theta) for i in range(1, n + 1)]
            return n * lambda_c + sum(tans) - 1.0

        if excess(0.0) > 0.0:
            raise GeometryInfeasibleError(
                f"stack layout infeasible even at angle 0 (n*lambda_c = {n * lambda_c:.3g} > 1)"
            )
        if excess(1.0) <= 0.0:
            return 1.0
        lo, hi = 0.0, 1.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if excess(mid) <= 0.0:
                lo = mid
            else:
                hi = mid
        return lo * (1.0 - 1e-12)
    raise ValueError(f"unknown layout {layout!r}")


def build_affine_family(n, lambda_c, angle_scale=0.0, layout="stack", k=None):
    """Build the n-branch affine family with sheared branch images.

    Branch i acts on the vertical strip S_i = [(i-1)/n, i/n] x [0, 1] as
    z -> L_i (z - o_i) + t_i with L_i = [[n, 0], [n tan(a_i), lambda_c]] and
    o_i the lower-left corner of S_i, so the horizontal stretch is n, the
    vertical contraction is lambda_c, and the unstable direction of branch i
    makes angle a_i = angle_scale * (i/n) * asin(1 - lambda_c) with the
    horizontal.  ``layout`` places the sheared images: "stack" tiles them
    bottom to top (disjoint, baker-like), "spread" spaces lower edges
    linearly across the available height (overlapping in general).

    Raises GeometryInfeasibleError when some image would leave the square,
    i.e. when tau_i + tan(a_i) + lambda_c > 1 for some branch.
    """
    n = int(n)
    if n < 2:
        raise ValueError("need at least two branches")
    if not (0.0 < lambda_c < 1.0):
        raise ValueError("contraction lambda_c must lie in (0, 1)")
    if angle_scale == "max":
        angle_scale = max_feasible_angle_scale(n, lambda_c, layout)
    if not (0.0 <= angle_scale <= 1.0):
        raise ValueError("angle_scale must lie in [0, 1]")
    if layout not in ("stack", "spread"):
        raise ValueError(f"unknown layout {layout!r}")

    theta = math.asin(1.0 - lambda_c)
    alphas = [angle_scale * (i / n) * theta for i in range(1, n + 1)]
    tans = [math.tan(a) for a in alphas]

    taus = []
    for i in range(1, n + 1):
        if layout == "stack":
            taus.append(sum(lambda_c + tans[j] for j in range(i - 1)))
        else:
            taus.append((1.0 - lambda_c - tans[i - 1]) * (i - 1) / (n - 1))
    for i in range(n):
        if taus[i] + tans[i] + lambda_c > 1.0 + 1e-9 or taus[i] < -1e-9:
            raise GeometryInfeasibleError(
                f"branch {i + 1} image exits the square: "
                f"tau={taus[i]:.6g}, tan(alpha)={tans[i]:.6g}, lambda_c={lambda_c}"
            )

    tan_max = max(tans)
    if k is None:
        k = max(0.5, min(0.9, 1.05 * tan_max / (1.0 - lambda_c / n)))
    lam = min(float(n), (1.0 - k * tan_max) / lambda_c)

    branches = []
    for i in range(1, n + 1):
        tan_i = tans[i - 1]
        L = np.array([[float(n), 0.0], [n * tan_i, lambda_c]])
        ox = (i - 1) / n
        # offset c folds the corner anchoring: F(z) = L z + c with c = t - L o
        c = np.array([-L[0, 0] * ox, taus[i - 1] - L[1, 0] * ox])
        dom = StripRegion.vertical_interval((i - 1) / n, i / n)
        branches.append(AffineBranch(id=i, domain=dom, linear=L, offset=c))
    return GhmMap(branches, k=k, lam=lam)


# -- wire format -----------------------------------------------------------------


def _domain_from_entry(entry):
    if "domain_left" in entry or "domain_right" in entry:
        try:
            left = np.asarray(entry["domain_left"], dtype=float)
            right = np.asarray(entry["domain_right"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad curvilinear domain: {exc}") from exc
        if left.ndim != 2 or left.shape[1] != 2 or right.ndim != 2 or right.shape[1] != 2:
            raise SchemaError("domain polylines must be [[y, x], ...] pairs")
        t = param_grid(1)
        lo = np.interp(t, left[:, 0], left[:, 1])
        hi = np.interp(t, right[:, 0], right[:, 1])
        return StripRegion("vertical", t, lo, hi)
    try:
        lo, hi = (float(v) for v in entry["domain_x"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"branch entry needs a domain_x interval: {exc}") from exc
    return StripRegion.vertical_interval(lo, hi)


def load_map_spec(source):
    """Build a validated map from a JSON document (dict, path, or JSON text).

    Raises SchemaError for structural problems and InvariantViolation (naming
    the failed axiom) when the described map is not a horseshoe map.
    """
    if isinstance(source, dict):
        doc = source
    else:
        text = None
        try:
            with open(source, "r", encoding="utf8") as fh:
                text = fh.read()
        except (OSError, TypeError):
            text = source
        try:
            doc = json.loads(text)
        except (TypeError, json.JSONDecodeError) as exc:
            raise SchemaError(f"not a JSON map document: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("map document must be a JSON object")
    try:
        k = float(doc["k"])
        lam = float(doc["lambda"])
        entries = doc["branches"]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"missing or malformed top-level field: {exc}") from exc
    if not isinstance(entries, list) or not entries:
        raise SchemaError("branches must be a non-empty list")
    branches = []
    for entry in entries:
        if not isinstance(entry, dict):
            raise SchemaError("each branch must be an object")
        try:
            bid = int(entry["id"])
            linear = np.asarray(entry["linear"], dtype=float).reshape(2, 2)
            translation = np.asarray(entry["translation"], dtype=float).reshape(2)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed branch entry: {exc}") from exc
        dom = _domain_from_entry(entry)
        branches.append(AffineBranch(id=bid, domain=dom, linear=linear, offset=translation))
    return GhmMap(branches, k=k, lam=lam)


def save_map_spec(ghm):
    """Serialize an affine map with straight domains to the wire schema."""
    entries = []
    for b in ghm.branches:
        if not b.is_affine:
            raise SchemaError("smooth branches are not serializable")
        iv = b.domain.interval_bounds()
        if iv is None:
            raise SchemaError("curvilinear-domain maps are not serialized by this writer")
        entries.append(
            {
                "id": b.id,
                "domain_x": [iv[0], iv[1]],
                "linear": [[b.linear[0, 0], b.linear[0, 1]], [b.linear[1, 0], b.linear[1, 1]]],
                "translation": [b.offset[0], b.offset[1]],
            }
        )
    return {"k": ghm.k, "lambda": ghm.lam, "branches": entries}


# -- pointwise operations ----------------------------------------------------------


def differential(ghm, z):
    """Branch differential at an interior point.

    Returns ``{"branch": id, "matrix": DF, "det": |det DF|}`` and raises
    SingularPointError when z sits on a strip boundary or outside all domains.
    """
    idx, on_boundary = ghm.branch_index_scalar(z)
    if idx is None:
        raise SingularPointError(f"point {tuple(z)} lies outside every branch domain")
    if on_boundary:
        raise SingularPointError(f"point {tuple(z)} lies on the singular set")
    b = ghm.branches[idx]
    D = np.array(b.diff_at(z[0], z[1]), dtype=float)
    return {"branch": b.id, "matrix": D, "det": abs(float(np.linalg.det(D)))}


def preimages(ghm, z):
    """All one-step preimages of z, one per branch whose image contains it.

    Each entry is ``{"branch": id, "point": (x, y), "det": |det DF(point)|}``
    with the forward image matching z to 1e-12.  Points on shared image
    boundaries are reported by both adjacent branches (closed strips).
    """
    out = []
    for b, (px, py) in ghm.preimage_list(z):
        D = b.diff_at(px, py)
        out.append({"branch": b.id, "point": (px, py), "det": abs(float(np.linalg.det(D)))})
    return out


# -- axiom checks -------------------------------------------------------------------


@dataclass(frozen=True)
class ConeReport:
    """Sampled hyperbolicity audit of a map."""

    samples_checked: int
    h1_violations: int
    h2_violations: int
    ratio_violations: int
    rc1_bound: float
    worst_margin: float

    @property
    def ok(self):
        return self.h1_violations == 0 and self.h2_violations == 0 and self.ratio_violations == 0

    def to_dict(self):
        return {
            "samples_checked": self.samples_checked,
            "h1_violations": self.h1_violations,
            "h2_violations": self.h2_violations,
            "ratio_violations": self.ratio_violations,
            "rc1_bound": self.rc1_bound,
            "worst_margin": self.worst_margin,
        }


def _second_derivative_bound(branch, pts_x, pts_y, h=1e-5):
    if branch.is_affine:
        return 0.0
    best = 0.0
    for x, y in zip(pts_x, pts_y, strict=True):
        d0 = branch.diff_at(x, y)
        for dx, dy in ((h, 0.0), (0.0, h)):
            xx = min(max(x + dx, 0.0), 1.0)
            yy = min(max(y + dy, 0.0), 1.0)
            d1 = branch.diff_at(xx, yy)
            step = math.hypot(xx - x, yy - y)
            if step > 0:
                best = max(best, float(np.max(np.abs(d1 - d0))) / step)
    return best


def validate_hyperbolicity(ghm, samples, seed=0):
    """Check cone invariance, max-norm expansion, and derivative ratios.

    Samples quasi-random points per branch and sweeps a deterministic fan of
    cone boundary/interior vectors through the differential.  Violations are
    counted, never raised; ``rc1_bound`` estimates the uniform second
    derivative bound via finite differences (0 for affine branches).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    k, lam = ghm.k, ghm.lam
    rel = 1.0 - 1e-9
    fan = np.linspace(-1.0, 1.0, 9)
    h1 = h2 = ratio = 0
    worst = math.inf
    rc1 = 0.0
    rng = np.random.default_rng(seed)
    for b in ghm.branches:
        pts = (halton(samples, 2) + rng.random(2)) % 1.0
        y = pts[:, 1]
        lo = b.domain.lower_at(y)
        hi = b.domain.upper_at(y)
        x = lo + (1e-9 + pts[:, 0] * (1.0 - 2e-9)) * (hi - lo)
        D = b.diff_batch(x, y)
        det = D[:, 0, 0] * D[:, 1, 1] - D[:, 0, 1] * D[:, 1, 0]
        inv = np.empty_like(D)
        inv[:, 0, 0] = D[:, 1, 1] / det
        inv[:, 0, 1] = -D[:, 0, 1] / det
        inv[:, 1, 0] = -D[:, 1, 0] / det
        inv[:, 1, 1] = D[:, 0, 0] / det
        for s in fan:
            # unstable fan v = (1, s k), max norm 1
            v1 = D[:, 0, 0] + D[:, 0, 1] * (s * k)
            v2 = D[:, 1, 0] + D[:, 1, 1] * (s * k)
            h1 += int(np.count_nonzero(np.abs(v2) > k * np.abs(v1) + 1e-9))
            growth = np.maximum(np.abs(v1), np.abs(v2))
            h2 += int(np.count_nonzero(growth < lam * rel))
            worst = min(worst, float(np.min(growth)))
            # stable fan w = (s k, 1), max norm 1, pulled through the inverse
            w1 = inv[:, 0, 0] * (s * k) + inv[:, 0, 1]
            w2 = inv[:, 1, 0] * (s * k) + inv[:, 1, 1]
            h1 += int(np.count_nonzero(np.abs(w1) > k * np.abs(w2) + 1e-9))
            shrink = np.maximum(np.abs(w1), np.abs(w2))
            h2 += int(np.count_nonzero(shrink < lam * rel))
            worst = min(worst, float(np.min(shrink)))
        ax = np.abs(D[:, 0, 0])
        r1 = np.abs(D[:, 0, 1]) / ax
        r2 = np.abs(D[:, 1, 0]) / ax
        r3 = np.abs(D[:, 1, 1]) / ax
        ratio += int(np.count_nonzero(r1 > k + 1e-9))
        ratio += int(np.count_nonzero(r2 > k + 1e-9))
        ratio += int(np.count_nonzero(r3 > 1.0 / lam**2 + k**2 + 1e-9))
        nsub = min(samples, 128)
        rc1 = max(rc1, _second_derivative_bound(b, x[:nsub], y[:nsub]))
    return ConeReport(
        samples_checked=samples * ghm.n_branches,
        h1_violations=h1,
        h2_violations=h2,
        ratio_violations=ratio,
        rc1_bound=rc1,
        worst_margin=worst - lam,
    )


def estimate_distortion(ghm, word, pairs, seed=0):
    """Bounded-distortion constants along a refined strip.

    Samples point pairs on the midline of the strip named by ``word`` (an
    approximate stable leaf), compares n-step Jacobians, and normalizes the
    deviation by the leaf distance between the points.  Also estimates the
    constant sandwiching directional-by-full Jacobian ratios against
    reciprocal unstable growth.  Both distortion suprema vanish identically
    for affine maps.
    """
    from .symbolic import Word, refine_strip

    if not isinstance(word, Word):
        word = Word(tuple(word), "stable")
    strip = refine_strip(ghm, word)
    if strip.empty:
        from .errors import EmptyStripError

        raise EmptyStripError(f"word {word.symbols} refines to an empty strip")
    n = len(word.symbols)
    t = strip.param
    mid = 0.5 * (strip.lower + strip.upper)
    slopes = np.gradient(mid, t)
    arc = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(mid), np.diff(t)))])

    rng = np.random.default_rng(seed)
    ts = rng.random((pairs, 2))

    def jacobians(tv):
        xv = np.interp(tv, t, mid)
        yv = tv.copy()
        vslope = np.interp(tv, t, slopes)
        vx = vslope / np.hypot(vslope, 1.0)
        vy = 1.0 / np.hypot(vslope, 1.0)
        jac_full = np.ones_like(tv)
        vcur = np.stack([vx, vy], axis=1)
        for _ in range(n):
            idx = ghm.locate(xv, yv)
            newx = np.empty_like(xv)
            newy = np.empty_like(yv)
            for i, b in enumerate(ghm.branches):
                sel = idx == i
                if not np.any(sel):
                    continue
                D = b.diff_batch(xv[sel], yv[sel])
                vcur[sel] = np.einsum("nij,nj->ni", D, vcur[sel])
                jac_full[sel] *= np.abs(D[:, 0, 0] * D[:, 1, 1] - D[:, 0, 1] * D[:, 1, 0])
                newx[sel], newy[sel] = b.forward(xv[sel], yv[sel])
            xv, yv = newx, newy
        jac_dir = np.hypot(vcur[:, 0], vcur[:, 1])
        return jac_dir, jac_full

    jd1, jf1 = jacobians(ts[:, 0])
    jd2, jf2 = jacobians(ts[:, 1])
    d_w = np.abs(np.interp(ts[:, 0], t, arc) - np.interp(ts[:, 1], t, arc))
    ok = d_w > 1e-9
    stable_sup = float(np.max(np.abs(jd1[ok] / jd2[ok] - 1.0) / d_w[ok], initial=0.0))
    jac_sup = float(np.max(np.abs(jf1[ok] / jf2[ok] - 1.0) / d_w[ok], initial=0.0))

    # sandwich constant for directional/full Jacobian ratios against 1/unstable growth
    sandwich = 1.0
    for s in np.linspace(-1.0, 1.0, 5):
        wv = np.array([1.0, s * ghm.k])
        wv = wv / np.linalg.norm(wv)
        xv = np.interp(ts[:, 0], t, mid)
        yv = ts[:, 0].copy()
        wcur = np.tile(wv, (pairs, 1))
        for _ in range(n):
            idx = ghm.locate(xv, yv)
            newx = np.empty_like(xv)
            newy = np.empty_like(yv)
            for i, b in enumerate(ghm.branches):
                sel = idx == i
                if not np.any(sel):
                    continue
                D = b.diff_batch(xv[sel], yv[sel])
                wcur[sel] = np.einsum("nij,nj->ni", D, wcur[sel])
                newx[sel], newy[sel] = b.forward(xv[sel], yv[sel])
            xv, yv = newx, newy
        jac_w = np.hypot(wcur[:, 0], wcur[:, 1])
        rho = jd1 * jac_w / jf1
        sandwich = max(sandwich, float(np.max(np.maximum(rho, 1.0 / rho))))
    return {
        "jac_ratio_sup": jac_sup,
        "stable_dir_ratio_sup": stable_sup,
        "sandwich_constant": sandwich,
    }


# -- synthetic fixtures ---------------------------------------------------------------


def single_branch_map(linear, offset=(0.0, 0.0), k=0.5, lam=2.0):
    """One affine branch on the whole square, skipping axiom validation.

    Intended for exercising projection/expansion arithmetic with hand-checkable
    differentials; the result is generally not a horseshoe map.
    """
    dom = StripRegion.vertical_interval(0.0, 1.0)
    b = AffineBranch(id=1, domain=dom, linear=np.asarray(linear, float), offset=np.asarray(offset, float))
    return GhmMap([b], k=k, lam=lam, validate=False)


def smooth_perturbation(base, amplitude):
    """Post-compose each branch with a smooth height reparametrization (fixture).

    The perturbation (X, Y) -> (X, Y + a (Y^2 - Y) / 2) fixes the horizontal
    coordinate and bends the vertical one with a Y-dependent derivative
    1 + a (Y - 1/2), so Jacobians genuinely vary along stable leaves (giving
    the distortion estimators something nonzero to measure) while the inverse
    stays closed form.
    """
    a = float(amplitude)
    if not (0.0 < a < 1.0):
        raise ValueError("amplitude must lie in (0, 1)")

    def q(Y):
        return Y + a * (Y * Y - Y) / 2.0

    def q_inv(Q):
        b = 1.0 - a / 2.0
        return (-b + np.sqrt(b * b + 2.0 * a * Q)) / a

    def make(branch):
        lin = branch.linear.copy()
        off = branch.offset.copy()
        inv_lin = branch.inv_linear.copy()
        inv_off = branch.inv_offset.copy()

        def fwd(x, y):
            X = lin[0, 0] * x + lin[0, 1] * y + off[0]
            Y = lin[1, 0] * x + lin[1, 1] * y + off[1]
            return X, q(Y)

        def inv(X, Q):
            Y = q_inv(Q)
            return (
                inv_lin[0, 0] * X + inv_lin[0, 1] * Y + inv_off[0],
                inv_lin[1, 0] * X + inv_lin[1, 1] * Y + inv_off[1],
            )

        def dfwd(x, y):
            Y = lin[1, 0] * x + lin[1, 1] * y + off[1]
            post = np.array([[1.0, 0.0], [0.0, 1.0 + a * (Y - 0.5)]])
            return post @ lin

        return SmoothBranch(id=branch.id, domain=branch.domain, fwd=fwd, dfwd=dfwd, inv=inv)

    branches = [make(b) for b in base.branches]
    return GhmMap(branches, k=base.k, lam=base.lam, validate=False)
