"""Seeded low-discrepancy point sets and counter-based uniform streams.

The counter-based stream is the single source of truth for every stochastic
perturbation applied inside orbit kernels.  Both kernel backends (compiled and
pure NumPy) evaluate exactly the same integer mixing function, so results are
bit-identical regardless of which backend is active and of how work is split
into segments.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_A = np.uint64(0xBF58476D1CE4E5B9)
_MIX_B = np.uint64(0x94D049BB133111EB)
_U64_MASK = 0xFFFFFFFFFFFFFFFF
_INV53 = 1.0 / 9007199254740992.0  # 2**-53

#: Amplitude of the per-step orbit dither, see :func:`ghmlab.kernels.orbit`.
DITHER_EPS = 2.0 ** -48


def mix64(k):
    """SplitMix64 finalizer: a bijective avalanche mix of uint64 values."""
    arr = np.asarray(k, dtype=np.uint64)
    z = np.atleast_1d(arr) + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX_A
    z = (z ^ (z >> np.uint64(27))) * _MIX_B
    z = z ^ (z >> np.uint64(31))
    return z[0] if arr.ndim == 0 else z


def seed_base(seed):
    """Mixed 64-bit base value for a user seed (any Python int)."""
    return mix64(np.uint64(int(seed) & _U64_MASK))


def uniform_stream(seed, counters):
    """Uniforms in [0, 1) indexed by 64-bit counters.

    ``uniform_stream(s, k)`` is a pure function of ``(s, k)``; splitting a
    computation over counter ranges cannot change any value.
    """
    h = mix64(seed_base(seed) + np.asarray(counters, dtype=np.uint64))
    return (h >> np.uint64(11)).astype(np.float64) * _INV53


def radical_inverse(index, base):
    """Van der Corput radical inverse of integer indices in the given base."""
    idx = np.asarray(index, dtype=np.int64)
    x = np.zeros(idx.shape, dtype=np.float64)
    denom = 1.0
    k = idx.copy()
    while np.any(k > 0):
        denom *= base
        x += (k % base) / denom
        k //= base
    return x


def halton(n, dims=2, start=0):
    """First ``n`` points of the Halton sequence in ``dims`` dimensions.

    Bases are the first primes.  For ``n`` a power of two the first coordinate
    is exactly the lattice ``{0, 1/n, ..., (n-1)/n}`` (in bit-reversed order),
    which several tally-exactness properties rely on.
    """
    primes = (2, 3, 5, 7, 11, 13)
    if dims > len(primes):
        raise ValueError(f"at most {len(primes)} dimensions supported")
    idx = np.arange(start, start + n, dtype=np.int64)
    out = np.empty((n, dims))
    for d in range(dims):
        out[:, d] = radical_inverse(idx, primes[d])
    return out


def shifted_cell_points(m, samples_per_cell, seed):
    """Per-cell shifted-Halton sample points for an m-by-m grid.

    Returns an ``(m*m, samples_per_cell, 2)`` array of points in the unit
    square, where block ``c`` contains points inside cell
    ``(c // m, c % m)``.  Every cell uses the same base Halton pattern under
    its own Cranley-Patterson rotation, so structurally identical cells see
    identical sample layouts (up to the seeded shift).
    """
    base = halton(samples_per_cell, dims=2)
    rng = np.random.default_rng(seed)
    shifts = rng.random((m * m, 2))
    frac = (base[None, :, :] + shifts[:, None, :]) % 1.0
    cells = np.arange(m * m)
    ix = (cells // m).astype(np.float64)
    iy = (cells % m).astype(np.float64)
    pts = np.empty((m * m, samples_per_cell, 2))
    pts[:, :, 0] = (ix[:, None] + frac[:, :, 0]) / m
    pts[:, :, 1] = (iy[:, None] + frac[:, :, 1]) / m
    return pts
