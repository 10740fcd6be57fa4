"""Hot-kernel backend selection.

The package ships a compiled Cython extension (:mod:`._core`) for the inner
integration loops that dominate scan and contour runtimes, plus a pure
NumPy fallback (:mod:`.pyfallback`) with identical entry points and
semantics.  The compiled backend is used when importable; set the
environment variable ``SHOCKTUBE_FORCE_PYTHON=1`` to force the fallback
(used by the benchmark and the parity tests).

Backend API (both modules):

- poly_profile(...)      profile IVP on [0,1] with positivity events
- poly_variational(...)  profile co-integrated with d(Psi) variations
- poly_d0(...)           profile co-integrated with zero-frequency system
- local_profile(...)     local-model steady IVP (either direction)
- local_d0(...)          local-model zero-frequency value on [xL, xR]
- frame_evolve(...)      Drury orthonormal-frame integration of the
                         linearized eigenvalue system
"""

import os

from . import pyfallback

try:
    from . import _core

    HAVE_COMPILED = True
except ImportError:
    _core = None
    HAVE_COMPILED = False


def force_python():
    return os.environ.get("SHOCKTUBE_FORCE_PYTHON", "") not in ("", "0")


def get_backend():
    if HAVE_COMPILED and not force_python():
        return _core
    return pyfallback


def backend_name():
    return "compiled" if get_backend() is not pyfallback else "python"
