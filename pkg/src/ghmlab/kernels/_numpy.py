"""Pure NumPy kernel backend.

Implements the same contract as the compiled backend in ``_core.pyx``.  Both
backends perform the identical sequence of IEEE operations per point, so
results agree bit for bit; the compiled backend only changes the loop order
(point-major instead of step-major) and removes interpreter overhead.

A "map table" is the triple ``(breaks, A, c)`` describing a finite affine map
with straight vertical branch domains tiling [0, 1]:

* ``breaks``: (n-1,) interior domain breakpoints, increasing,
* ``A``: (n, 2, 2) branch linear parts,
* ``c``: (n, 2) branch offsets, so branch i sends z to ``A[i] @ z + c[i]``.

Points exactly on a breakpoint belong to the lower-indexed branch.
"""

import numpy as np

from ..sampling import DITHER_EPS, mix64, seed_base

_BOUNDARY_NUDGE = 1e-12
_INV53 = 1.0 / 9007199254740992.0

name = "numpy"
compiled = False


def locate(breaks, x):
    """Branch index per point (boundary points go to the lower branch)."""
    return np.searchsorted(breaks, np.asarray(x, dtype=float), side="left")


def step_points(breaks, A, c, x, y):
    """One forward step of a point batch. Returns new (x, y) arrays."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    i = np.searchsorted(breaks, x, side="left")
    nx = A[i, 0, 0] * x + A[i, 0, 1] * y + c[i, 0]
    ny = A[i, 1, 0] * x + A[i, 1, 1] * y + c[i, 1]
    return nx, ny


def _dither_pair(base, counters):
    h = mix64(base + counters)
    ux = (h >> np.uint64(11)).astype(np.float64) * _INV53
    h2 = mix64(base + counters + np.uint64(1))
    uy = (h2 >> np.uint64(11)).astype(np.float64) * _INV53
    return ux, uy


def advance_cloud(breaks, A, c, x, y, steps, seed=0, dither=0.0, t_offset=0):
    """Advance a point cloud ``steps`` steps in place; returns boundary hits.

    Per step and point the op order is: locate, affine step, exact-boundary
    nudge (counted), seeded dither, clamp to the unit square.  The dither
    counter is ``2 * ((t_offset + t) * N + p)`` for step t (1-based) and point
    p, so segmented advancement reproduces a single longer run exactly.
    """
    n_pts = x.shape[0]
    base = seed_base(seed)
    p_idx = np.arange(n_pts, dtype=np.uint64)
    hits = 0
    for t in range(1, steps + 1):
        i = np.searchsorted(breaks, x, side="left")
        nx = A[i, 0, 0] * x + A[i, 0, 1] * y + c[i, 0]
        ny = A[i, 1, 0] * x + A[i, 1, 1] * y + c[i, 1]
        for b in breaks:
            on_b = nx == b
            nhit = int(np.count_nonzero(on_b))
            if nhit:
                hits += nhit
                nx[on_b] -= _BOUNDARY_NUDGE
        if dither > 0.0:
            k = np.uint64(2) * (np.uint64(t_offset + t) * np.uint64(n_pts) + p_idx)
            ux, uy = _dither_pair(base, k)
            nx += (ux - 0.5) * dither
            ny += (uy - 0.5) * dither
        np.clip(nx, 0.0, 1.0, out=nx)
        np.clip(ny, 0.0, 1.0, out=ny)
        x[:] = nx
        y[:] = ny
    return hits


_U64 = 0xFFFFFFFFFFFFFFFF


def _mix64_int(k):
    # Python-int mirror of sampling.mix64, exact on 64-bit lanes.
    z = (k + 0x9E3779B97F4A7C15) & _U64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
    return z ^ (z >> 31)


def orbit(breaks, A, c, x0, y0, steps, seed=0, dither=DITHER_EPS):
    """Single forward orbit; returns coordinate arrays of length steps + 1.

    Bit-identical to ``advance_cloud`` applied to a one-point cloud with the
    positions recorded after every step.  This is the sequential hot loop;
    the scalar Python version here exists as the fallback and is roughly two
    orders of magnitude slower than the compiled backend.
    """
    from bisect import bisect_left

    n_br = A.shape[0]
    bl = [float(b) for b in breaks]
    a00 = [float(A[i, 0, 0]) for i in range(n_br)]
    a01 = [float(A[i, 0, 1]) for i in range(n_br)]
    a10 = [float(A[i, 1, 0]) for i in range(n_br)]
    a11 = [float(A[i, 1, 1]) for i in range(n_br)]
    c0 = [float(c[i, 0]) for i in range(n_br)]
    c1 = [float(c[i, 1]) for i in range(n_br)]
    base = int(seed_base(seed))

    xs = np.empty(steps + 1)
    ys = np.empty(steps + 1)
    x = float(x0)
    y = float(y0)
    xs[0] = x
    ys[0] = y
    for t in range(1, steps + 1):
        i = bisect_left(bl, x)
        nx = a00[i] * x + a01[i] * y + c0[i]
        ny = a10[i] * x + a11[i] * y + c1[i]
        for b in bl:
            if nx == b:
                nx -= _BOUNDARY_NUDGE
        if dither > 0.0:
            k = 2 * t
            ux = (_mix64_int((base + k) & _U64) >> 11) * _INV53
            uy = (_mix64_int((base + k + 1) & _U64) >> 11) * _INV53
            nx += (ux - 0.5) * dither
            ny += (uy - 0.5) * dither
        if nx < 0.0:
            nx = 0.0
        elif nx > 1.0:
            nx = 1.0
        if ny < 0.0:
            ny = 0.0
        elif ny > 1.0:
            ny = 1.0
        x = nx
        y = ny
        xs[t] = x
        ys[t] = y
    return xs, ys


def mark_cells(breaks, A, c, mask, sub=9):
    """One cell-image step: cells reachable from occupied cells, intersected.

    Each occupied cell of the (m, m) boolean mask is sampled on an inclusive
    ``sub`` x ``sub`` lattice; destination cells of the samples are marked.
    The result is intersected with the input mask's forward-invariant
    envelope semantics by the caller; here we just return the marked set.
    """
    m = mask.shape[0]
    occ = np.argwhere(mask)
    out = np.zeros_like(mask)
    if occ.size == 0:
        return out
    # a * (1 / (sub - 1)) matches the compiled backend's lattice exactly
    offs = np.arange(sub) * (1.0 / (sub - 1) if sub > 1 else 0.0)
    ox, oy = np.meshgrid(offs, offs, indexing="ij")
    ox = ox.ravel()
    oy = oy.ravel()
    chunk = max(1, 2_000_000 // (sub * sub))
    for s in range(0, occ.shape[0], chunk):
        cells = occ[s : s + chunk]
        px = ((cells[:, 0:1] + ox[None, :]) / m).ravel()
        py = ((cells[:, 1:2] + oy[None, :]) / m).ravel()
        nx, ny = step_points(breaks, A, c, px, py)
        dx = np.clip((nx * m).astype(np.int64), 0, m - 1)
        dy = np.clip((ny * m).astype(np.int64), 0, m - 1)
        out[dx, dy] = True
    return out
