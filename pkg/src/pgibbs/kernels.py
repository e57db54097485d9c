"""Kernel backend selection.

The compiled extension is used when it imports; set ``PGIBBS_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("PGIBBS_PURE_PYTHON") != "1":
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels

philox4x64 = _impl.philox4x64
resample_search = _impl.resample_search
trace_ancestry = _impl.trace_ancestry


def implementations():
    """Every importable backend, keyed by name (for equivalence tests and benchmarks)."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
