# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel backend.

Mirrors ``_numpy`` operation for operation: the same branch lookup, the same
affine step, the same boundary nudge, the same counter-based dither, in the
same per-point order.  Only the loop nesting differs (point-major here), so
outputs are bit-identical across backends.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef unsigned long long u64

cdef double _BOUNDARY_NUDGE = 1e-12
cdef double _INV53 = 1.0 / 9007199254740992.0

name = "compiled"
compiled = True


cdef inline u64 _mix64(u64 k) noexcept nogil:
    cdef u64 z = k + 0x9E3779B97F4A7C15ULL
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _unit(u64 base, u64 k) noexcept nogil:
    return <double> (_mix64(base + k) >> 11) * _INV53


cdef inline Py_ssize_t _locate(const double* breaks, Py_ssize_t nb, double x) noexcept nogil:
    # bisect_left semantics: first index whose break is >= x.
    cdef Py_ssize_t i = 0
    while i < nb and breaks[i] < x:
        i += 1
    return i


def locate(breaks, x):
    """Branch index per point (boundary points go to the lower branch)."""
    cdef double[::1] br = np.ascontiguousarray(breaks, dtype=np.float64)
    xs = np.ascontiguousarray(np.atleast_1d(np.asarray(x, dtype=np.float64)))
    cdef double[::1] xv = xs
    out = np.empty(xs.shape[0], dtype=np.int64)
    cdef long long[::1] ov = out
    cdef Py_ssize_t nb = br.shape[0]
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t p
    with nogil:
        for p in range(n):
            ov[p] = _locate(&br[0] if nb else NULL, nb, xv[p])
    if np.ndim(x) == 0:
        return out[0]
    return out


def step_points(breaks, A, c, x, y):
    """One forward step of a point batch. Returns new (x, y) arrays."""
    cdef double[::1] br = np.ascontiguousarray(breaks, dtype=np.float64)
    cdef double[:, :, ::1] Av = np.ascontiguousarray(A, dtype=np.float64)
    cdef double[:, ::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    xs = np.ascontiguousarray(x, dtype=np.float64)
    ys = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] xv = xs
    cdef double[::1] yv = ys
    nx = np.empty_like(xs)
    ny = np.empty_like(ys)
    cdef double[::1] nxv = nx
    cdef double[::1] nyv = ny
    cdef Py_ssize_t nb = br.shape[0]
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t p, i
    with nogil:
        for p in range(n):
            i = _locate(&br[0] if nb else NULL, nb, xv[p])
            nxv[p] = Av[i, 0, 0] * xv[p] + Av[i, 0, 1] * yv[p] + cv[i, 0]
            nyv[p] = Av[i, 1, 0] * xv[p] + Av[i, 1, 1] * yv[p] + cv[i, 1]
    return nx, ny


def advance_cloud(breaks, A, c, x, y, steps, seed=0, dither=0.0, t_offset=0):
    """Advance a point cloud in place; returns the boundary-hit count."""
    cdef double[::1] br = np.ascontiguousarray(breaks, dtype=np.float64)
    cdef double[:, :, ::1] Av = np.ascontiguousarray(A, dtype=np.float64)
    cdef double[:, ::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef double[::1] xv = x
    cdef double[::1] yv = y
    cdef Py_ssize_t nb = br.shape[0]
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t nsteps = steps
    cdef u64 base = <u64> int(_seed_base_int(seed))
    cdef u64 toff = <u64> int(t_offset)
    cdef u64 nn = <u64> n
    cdef double dith = dither
    cdef long long hits = 0
    cdef Py_ssize_t p, j, i, tt
    cdef u64 k
    cdef double px, py, nx, ny, ux, uy
    with nogil:
        for p in range(n):
            px = xv[p]
            py = yv[p]
            for tt in range(1, nsteps + 1):
                i = _locate(&br[0] if nb else NULL, nb, px)
                nx = Av[i, 0, 0] * px + Av[i, 0, 1] * py + cv[i, 0]
                ny = Av[i, 1, 0] * px + Av[i, 1, 1] * py + cv[i, 1]
                for j in range(nb):
                    if nx == br[j]:
                        hits += 1
                        nx -= _BOUNDARY_NUDGE
                if dith > 0.0:
                    k = 2 * ((toff + <u64> tt) * nn + <u64> p)
                    ux = _unit(base, k)
                    uy = _unit(base, k + 1)
                    nx += (ux - 0.5) * dith
                    ny += (uy - 0.5) * dith
                if nx < 0.0:
                    nx = 0.0
                elif nx > 1.0:
                    nx = 1.0
                if ny < 0.0:
                    ny = 0.0
                elif ny > 1.0:
                    ny = 1.0
                px = nx
                py = ny
            xv[p] = px
            yv[p] = py
    return int(hits)


def orbit(breaks, A, c, x0, y0, steps, seed=0, dither=2.0 ** -48):
    """Single forward orbit; returns coordinate arrays of length steps + 1."""
    cdef double[::1] br = np.ascontiguousarray(breaks, dtype=np.float64)
    cdef double[:, :, ::1] Av = np.ascontiguousarray(A, dtype=np.float64)
    cdef double[:, ::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef Py_ssize_t nb = br.shape[0]
    cdef Py_ssize_t nsteps = steps
    xs = np.empty(nsteps + 1)
    ys = np.empty(nsteps + 1)
    cdef double[::1] xsv = xs
    cdef double[::1] ysv = ys
    cdef u64 base = <u64> int(_seed_base_int(seed))
    cdef double dith = dither
    cdef double px = x0, py = y0
    cdef double nx, ny, ux, uy
    cdef Py_ssize_t i, j, tt
    cdef u64 k
    xsv[0] = px
    ysv[0] = py
    with nogil:
        for tt in range(1, nsteps + 1):
            i = _locate(&br[0] if nb else NULL, nb, px)
            nx = Av[i, 0, 0] * px + Av[i, 0, 1] * py + cv[i, 0]
            ny = Av[i, 1, 0] * px + Av[i, 1, 1] * py + cv[i, 1]
            for j in range(nb):
                if nx == br[j]:
                    nx -= _BOUNDARY_NUDGE
            if dith > 0.0:
                k = 2 * <u64> tt
                ux = _unit(base, k)
                uy = _unit(base, k + 1)
                nx += (ux - 0.5) * dith
                ny += (uy - 0.5) * dith
            if nx < 0.0:
                nx = 0.0
            elif nx > 1.0:
                nx = 1.0
            if ny < 0.0:
                ny = 0.0
            elif ny > 1.0:
                ny = 1.0
            px = nx
            py = ny
            xsv[tt] = px
            ysv[tt] = py
    return xs, ys


def mark_cells(breaks, A, c, mask, sub=9):
    """Destination cells of an inclusive sub-lattice over occupied cells."""
    cdef double[::1] br = np.ascontiguousarray(breaks, dtype=np.float64)
    cdef double[:, :, ::1] Av = np.ascontiguousarray(A, dtype=np.float64)
    cdef double[:, ::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    occ = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef unsigned char[:, ::1] ov = occ
    cdef Py_ssize_t m = occ.shape[0]
    out = np.zeros((m, m), dtype=np.uint8)
    cdef unsigned char[:, ::1] res = out
    cdef Py_ssize_t nb = br.shape[0]
    cdef Py_ssize_t nsub = sub
    cdef Py_ssize_t ix, iy, a, b, i, dx, dy
    cdef double px, py, nx, ny, inv
    inv = 1.0 / (nsub - 1) if nsub > 1 else 0.0
    with nogil:
        for ix in range(m):
            for iy in range(m):
                if not ov[ix, iy]:
                    continue
                for a in range(nsub):
                    for b in range(nsub):
                        px = (ix + a * inv) / m
                        py = (iy + b * inv) / m
                        i = _locate(&br[0] if nb else NULL, nb, px)
                        nx = Av[i, 0, 0] * px + Av[i, 0, 1] * py + cv[i, 0]
                        ny = Av[i, 1, 0] * px + Av[i, 1, 1] * py + cv[i, 1]
                        dx = <Py_ssize_t> (nx * m)
                        dy = <Py_ssize_t> (ny * m)
                        if dx < 0:
                            dx = 0
                        elif dx > m - 1:
                            dx = m - 1
                        if dy < 0:
                            dy = 0
                        elif dy > m - 1:
                            dy = m - 1
                        res[dx, dy] = 1
    return out.astype(bool)


def _seed_base_int(seed):
    z = (int(seed) & 0xFFFFFFFFFFFFFFFF) + 0x9E3779B97F4A7C15
    z &= 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)
