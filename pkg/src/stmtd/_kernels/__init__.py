"""Numerical kernels with a compiled core and a pure-Python fallback.

The compiled extension ``_core`` is used when it is importable; setting the
environment variable ``STMTD_PURE_PYTHON=1`` forces the fallback.
"""

import importlib
import os

from . import _fallback

OPTIMAL = _fallback.OPTIMAL
INFEASIBLE = _fallback.INFEASIBLE
ITERATION_LIMIT = _fallback.ITERATION_LIMIT


def load_backend(name: str):
    """Return the kernel module called ``"compiled"`` or ``"python"``."""
    if name == "python":
        return _fallback
    if name == "compiled":
        return importlib.import_module(f"{__name__}._core")
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends():
    out = ["python"]
    try:
        load_backend("compiled")
    except ImportError:
        pass
    else:
        out.insert(0, "compiled")
    return out


if os.environ.get("STMTD_PURE_PYTHON"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        _impl = load_backend("compiled")
        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

lp_simplex = _impl.lp_simplex
polytope_vertices = _impl.polytope_vertices
walk_chain = _impl.walk_chain

__all__ = ["BACKEND", "lp_simplex", "polytope_vertices", "walk_chain", "load_backend", "available_backends"]
