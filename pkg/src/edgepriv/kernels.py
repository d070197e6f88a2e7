"""Backend selection for the hot loops.

The compiled Cython module is used when it was built; otherwise the numpy
fallback is used. Setting ``EDGEPRIV_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _fallback

BACKENDS = {"python": _fallback}

try:
    from . import _kernels
except ImportError:  # extension not built
    _kernels = None
else:
    BACKENDS["cython"] = _kernels

if _kernels is not None and not os.environ.get("EDGEPRIV_PURE_PYTHON"):
    BACKEND = "cython"
else:
    BACKEND = "python"

_active = BACKENDS[BACKEND]
rk4_affine = _active.rk4_affine
iterate_linear = _active.iterate_linear


def get_backend(name):
    """Return the kernel module registered under ``name`` ("cython" or "python")."""
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available; have {sorted(BACKENDS)}") from None
