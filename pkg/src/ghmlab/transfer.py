"""Transfer operator: preimage sums, Ulam discretization, spectra, Sobolev norms.

The transfer operator pushes densities forward: pointwise it sums density
values over one-step preimages weighted by reciprocal Jacobians.  Its Ulam
discretization replaces the operator by the cell-to-cell mass-transport
matrix of a uniform grid, whose left fixed vector approximates the physical
measure's density.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg

from .errors import NonConvergenceError, SingularPointError, UniquenessError
from .geometry import GEOM_TOL
from .sampling import halton

__all__ = [
    "GridDensity",
    "UlamMatrix",
    "SpectralReport",
    "apply_transfer",
    "transfer_quadrature",
    "grid_quadrature",
    "ulam_matrix",
    "stationary_density",
    "spectral_gap",
    "sobolev_seminorm",
    "half_square_indicator",
]


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Piecewise-constant density on an m-by-m grid.

    ``values[ix, iy]`` is the density on cell [ix/m, (ix+1)/m) x [iy/m,
    (iy+1)/m); values are nonnegative with mean 1 (unit total mass).
    """

    resolution: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        m = self.resolution
        if v.shape != (m, m):
            raise ValueError(f"values must be ({m}, {m})")
        if np.min(v) < -1e-12:
            raise ValueError("density values must be nonnegative")
        mean = float(v.mean())
        if abs(mean - 1.0) > 1e-9:
            raise ValueError(f"density mean {mean} must be 1 within 1e-9")
        object.__setattr__(self, "values", v)

    @classmethod
    def uniform(cls, m):
        return cls(m, np.ones((m, m)))

    @classmethod
    def from_masses(cls, m, mass):
        """From a flat vector of cell masses (index ix * m + iy), total 1."""
        mass = np.asarray(mass, dtype=float)
        return cls(m, mass.reshape(m, m) * (m * m) / mass.sum())

    @classmethod
    def from_counts(cls, m, counts):
        return cls.from_masses(m, np.asarray(counts, dtype=float).ravel())

    def mass_vector(self):
        m = self.resolution
        return self.values.ravel() / (m * m)

    def evaluate(self, x, y):
        m = self.resolution
        ix = np.clip((np.asarray(x, dtype=float) * m).astype(np.int64), 0, m - 1)
        iy = np.clip((np.asarray(y, dtype=float) * m).astype(np.int64), 0, m - 1)
        return self.values[ix, iy]

    def l1_distance(self, other):
        """Integral of |difference| over the square."""
        if other.resolution != self.resolution:
            raise ValueError("resolutions differ")
        return float(np.abs(self.values - other.values).mean())


def half_square_indicator(m):
    """Normalized indicator density of the left half square (m even)."""
    if m % 2:
        raise ValueError("m must be even")
    v = np.zeros((m, m))
    v[: m // 2, :] = 2.0
    return GridDensity(m, v)


@dataclass(frozen=True, eq=False)
class UlamMatrix:
    """Sparse cell-transition matrix: entry (i, j) is the fraction of cell i's
    mass sent to cell j.  Rows sum to 1 (branch domains tile the square)."""

    resolution: int
    matrix: sp.csr_matrix

    def __post_init__(self):
        m2 = self.resolution**2
        if self.matrix.shape != (m2, m2):
            raise ValueError("matrix shape does not match the resolution")
        data = self.matrix.data
        if data.size and (data.min() < -1e-12 or data.max() > 1.0 + 1e-12):
            raise ValueError("transition fractions must lie in [0, 1]")
        rs = self.row_sums
        if np.max(np.abs(rs - 1.0)) > 1e-9:
            raise ValueError("rows must sum to 1 within 1e-9 (escaped mass)")

    @property
    def row_sums(self):
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    @classmethod
    def from_dense(cls, arr):
        arr = np.asarray(arr, dtype=float)
        m = int(round(np.sqrt(arr.shape[0])))
        return cls(m, sp.csr_matrix(arr))

    def push(self, density):
        """One Ulam step of a GridDensity."""
        mass = density.mass_vector()
        new = self.matrix.T @ mass
        return GridDensity.from_masses(self.resolution, new)


@dataclass(frozen=True)
class SpectralReport:
    leading_eigenvalue: float
    second_modulus: float
    gap: float
    iterations: int
    residual: float

    def to_dict(self):
        return {
            "leading_eigenvalue": self.leading_eigenvalue,
            "second_modulus": self.second_modulus,
            "gap": self.gap,
            "iterations": self.iterations,
            "residual": self.residual,
        }


# -- pointwise operator ----------------------------------------------------------


def _as_density_callable(h):
    if isinstance(h, GridDensity):
        return h.evaluate
    if callable(h):
        return h
    raise TypeError("h must be a GridDensity or a callable h(x, y)")


def _on_image_boundary(ghm, z, tol=GEOM_TOL):
    zx, zy = float(z[0]), float(z[1])
    for b in ghm.branches:
        bot = float(b.image.lower_at(zx))
        top = float(b.image.upper_at(zx))
        if abs(zy - bot) <= tol or abs(zy - top) <= tol:
            return True
    return False


def apply_transfer(ghm, h, z, power=1):
    """Evaluate the power-th transfer iterate of a density at a point.

    Enumerates the depth-``power`` preimage tree depth first, accumulating
    reciprocal Jacobians along each root path.  Points whose tree touches an
    image-strip boundary (within 1e-12) sit on the singular set of the
    iterated operator and raise SingularPointError; points with no preimage
    contribute nothing.
    """
    if power < 1:
        raise ValueError("power must be >= 1")
    hf = _as_density_callable(h)

    def rec(pt, depth):
        if depth == 0:
            return float(hf(pt[0], pt[1]))
        if _on_image_boundary(ghm, pt):
            raise SingularPointError(
                f"point {pt} lies on an image-strip boundary (singular set of the iterate)"
            )
        total = 0.0
        for b, (px, py) in ghm.preimage_list(pt):
            D = b.diff_at(px, py)
            jac = abs(float(np.linalg.det(D)))
            total += rec((px, py), depth - 1) / jac
        return total

    return rec((float(z[0]), float(z[1])), power)


def grid_quadrature(f, m):
    """Midpoint quadrature of a callable over the unit square."""
    t = (np.arange(m) + 0.5) / m
    X, Y = np.meshgrid(t, t, indexing="ij")
    return float(np.mean(f(X, Y)))


def transfer_quadrature(ghm, h, m, power=1):
    """Midpoint quadrature of the transfer iterate on an m-by-m grid."""
    t = (np.arange(m) + 0.5) / m
    total = 0.0
    for x in t:
        for y in t:
            total += apply_transfer(ghm, h, (x, y), power)
    return total / (m * m)


# -- Ulam discretization -----------------------------------------------------------


def ulam_matrix(ghm, m, samples_per_cell=256, seed=0):
    """Estimate the Ulam matrix by shifted-Halton sampling per cell.

    Each cell receives the same base Halton pattern under a per-cell seeded
    rotation; destination tallies are normalized by the sample count, so every
    row sums to 1 exactly up to division rounding.  Powers of two for
    ``samples_per_cell`` make dyadic destination splits exact.
    """
    if m < 2:
        raise ValueError("resolution must be >= 2")
    if samples_per_cell < 16:
        raise ValueError("need at least 16 samples per cell")
    base = halton(samples_per_cell, dims=2)
    rng = np.random.default_rng(seed)
    shifts = rng.random((m * m, 2))
    m2 = m * m
    chunk = max(1, 2_000_000 // samples_per_cell)
    keys = []
    counts = []
    cells = np.arange(m2)
    for s in range(0, m2, chunk):
        cc = cells[s : s + chunk]
        frac = (base[None, :, :] + shifts[cc][:, None, :]) % 1.0
        ix = (cc // m).astype(np.float64)
        iy = (cc % m).astype(np.float64)
        px = ((ix[:, None] + frac[:, :, 0]) / m).ravel()
        py = ((iy[:, None] + frac[:, :, 1]) / m).ravel()
        nx, ny = ghm.step(px, py)
        dx = np.clip((nx * m).astype(np.int64), 0, m - 1)
        dy = np.clip((ny * m).astype(np.int64), 0, m - 1)
        dest = dx * m + dy
        src = np.repeat(cc, samples_per_cell)
        pair = src.astype(np.int64) * m2 + dest
        uniq, cnt = np.unique(pair, return_counts=True)
        keys.append(uniq)
        counts.append(cnt)
    keys = np.concatenate(keys)
    counts = np.concatenate(counts)
    rows = keys // m2
    cols = keys % m2
    data = counts.astype(float) / samples_per_cell
    P = sp.coo_matrix((data, (rows, cols)), shape=(m2, m2)).tocsr()
    return UlamMatrix(m, P)


def _fixed_mass(PT, mass0, tol, max_iter):
    mass = mass0 / mass0.sum()
    for it in range(1, max_iter + 1):
        new = PT @ mass
        residual = float(np.abs(new - mass).sum())
        total = new.sum()
        if total <= 0:
            raise NonConvergenceError("mass vanished during power iteration")
        mass = new / total
        if residual <= tol:
            return mass, it, residual
    raise NonConvergenceError(
        f"power iteration residual {residual:.3g} above tol {tol:.3g} after {max_iter} iterations"
    )


def stationary_density(P, tol=1e-10, max_iter=100_000, check_uniqueness=True):
    """Left fixed vector of the Ulam matrix by power iteration.

    Starts from the uniform density; the residual is the L1 mass change per
    step.  With ``check_uniqueness`` the iteration is repeated from three
    seeded random starts and the fixed points must agree within 100 * tol in
    L1, otherwise UniquenessError is raised (reducible chains).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    m = P.resolution
    PT = P.matrix.T.tocsr()
    mass, iterations, residual = _fixed_mass(PT, np.ones(m * m), tol, max_iter)
    if check_uniqueness:
        rng = np.random.default_rng(0xC0FFEE)
        others = []
        for _ in range(3):
            start = rng.random(m * m) + 1e-3
            other, _, _ = _fixed_mass(PT, start, tol, max_iter)
            others.append(other)
        worst = max(float(np.abs(mass - o).sum()) for o in others)
        if worst > max(100.0 * tol, 1e-10):
            raise UniquenessError(
                f"fixed densities from independent starts differ by {worst:.3g} in L1"
            )
    return GridDensity.from_masses(m, mass)


def _modulus_power(apply_op, v0, tol, max_iter, window=32, warmup=256):
    """Modulus of the dominant eigenvalue of an operator via power iteration.

    Tracks the cumulative geometric mean of growth factors after a warmup,
    which converges for complex pairs and defective blocks alike (their
    oscillation in the running mean decays like 1/iterations).
    """
    v = v0 / np.linalg.norm(v0)
    log_acc = 0.0
    count = 0
    est_prev = None
    residual = np.inf
    for it in range(1, max_iter + 1):
        w = apply_op(v)
        r = float(np.linalg.norm(w))
        if r <= 1e-300:
            return 0.0, it, 0.0
        v = w / r
        if it <= warmup:
            continue
        log_acc += np.log(r)
        count += 1
        if count % window == 0:
            est = float(np.exp(log_acc / count))
            if est_prev is not None:
                residual = abs(est - est_prev) / max(est, 1e-300)
                if residual <= tol:
                    return est, it, residual
            est_prev = est
    raise NonConvergenceError(
        f"modulus estimate residual {residual:.3g} above tol {tol:.3g} after {max_iter} iterations"
    )


def spectral_gap(P, num_eigs=2, tol=1e-6, max_iter=100_000):
    """Leading eigenvalue and second-largest modulus of the Ulam matrix.

    Both are estimated by power iteration (the second after deflating the
    fixed density), tracking windowed geometric means of growth factors so
    complex pairs and defective blocks still yield the modulus.  For small
    matrices a dense eigensolve cross-checks the result and a disagreement
    beyond 0.02 emits a warning.
    """
    if num_eigs < 2:
        raise ValueError("num_eigs must be >= 2")
    m = P.resolution
    dim = m * m
    PT = P.matrix.T.tocsr()

    lead, it_lead, res_lead = _modulus_power(lambda v: PT @ v, np.ones(dim), tol, max_iter)

    fixed, _, _ = _fixed_mass(PT, np.ones(dim), min(tol, 1e-10), max_iter)
    h = fixed / fixed.sum()

    rng = np.random.default_rng(0x5EED)
    v0 = rng.standard_normal(dim)
    v0 -= h * v0.sum()

    def deflated(v):
        w = PT @ v
        return w - h * w.sum()

    second, it2, res2 = _modulus_power(deflated, v0, tol, max_iter)

    if dim <= 1024:
        eigs = np.linalg.eigvals(P.matrix.toarray())
        mods = np.sort(np.abs(eigs))[::-1]
        dense_second = float(mods[1]) if mods.size > 1 else 0.0
        if abs(dense_second - second) > 0.02:
            warnings.warn(
                f"power-iteration second modulus {second:.4f} disagrees with dense "
                f"solve {dense_second:.4f}",
                RuntimeWarning,
                stacklevel=2,
            )
    return SpectralReport(
        leading_eigenvalue=lead,
        second_modulus=second,
        gap=1.0 - second,
        iterations=it_lead + it2,
        residual=max(res_lead, res2),
    )


# -- Sobolev diagnostic ---------------------------------------------------------------


def sobolev_seminorm(h, mu):
    """Discrete Sobolev seminorm: sum of (1 + |xi|^2)^mu |h_hat(xi)|^2.

    The transform is normalized so the uniform density has seminorm 1.
    Exponents below 1/2 are the regime in which indicator-like densities stay
    bounded under grid refinement; larger values are accepted as an
    out-of-regime diagnostic.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    m = h.resolution
    fhat = np.fft.fft2(h.values) / (m * m)
    k = np.fft.fftfreq(m, d=1.0 / m)
    weight = (1.0 + k[:, None] ** 2 + k[None, :] ** 2) ** mu
    return float(np.sum(weight * np.abs(fhat) ** 2))
