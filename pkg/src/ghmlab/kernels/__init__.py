"""Hot kernels with a compiled core and a pure NumPy fallback.

The compiled extension (``ghmlab.kernels._core``, built from Cython) is
selected automatically at import when present; otherwise the NumPy
implementation in ``_numpy`` is used.  Both backends are bit-compatible, so
switching them never changes results, only speed.  Set the environment
variable ``GHMLAB_FORCE_FALLBACK=1`` (before import) or call
:func:`set_backend` to pin a backend explicitly.
"""

import os

from . import _numpy

try:
    from . import _core
except ImportError:  # extension not built; fall back silently
    _core = None

HAVE_COMPILED = _core is not None

if HAVE_COMPILED and not os.environ.get("GHMLAB_FORCE_FALLBACK"):
    _active = _core
else:
    _active = _numpy


def available_backends():
    names = ["numpy"]
    if HAVE_COMPILED:
        names.append("compiled")
    return tuple(names)


def backend_name():
    return _active.name


def set_backend(name):
    """Select the active backend by name ("compiled" or "numpy")."""
    global _active
    if name == "numpy":
        _active = _numpy
    elif name == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled kernels are not built")
        _active = _core
    else:
        raise ValueError(f"unknown backend {name!r}")


def get_backend(name=None):
    """Return a backend module (the active one when ``name`` is None)."""
    if name is None:
        return _active
    if name == "numpy":
        return _numpy
    if name == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled kernels are not built")
        return _core
    raise ValueError(f"unknown backend {name!r}")


def locate(breaks, x):
    return _active.locate(breaks, x)


def step_points(breaks, A, c, x, y):
    return _active.step_points(breaks, A, c, x, y)


def advance_cloud(breaks, A, c, x, y, steps, seed=0, dither=0.0, t_offset=0):
    return _active.advance_cloud(breaks, A, c, x, y, steps, seed=seed, dither=dither, t_offset=t_offset)


def orbit(breaks, A, c, x0, y0, steps, seed=0, dither=2.0 ** -48):
    return _active.orbit(breaks, A, c, x0, y0, steps, seed=seed, dither=dither)


def mark_cells(breaks, A, c, mask, sub=9):
    return _active.mark_cells(breaks, A, c, mask, sub=sub)
