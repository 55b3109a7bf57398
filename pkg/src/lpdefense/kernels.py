"""Backend selection for the RA hot loops.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``LPDEFENSE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if not os.environ.get("LPDEFENSE_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

TRAIN = _pykernels.TRAIN
NONEXISTENT = _pykernels.NONEXISTENT
SENSITIVE = _pykernels.SENSITIVE
DIAGONAL = _pykernels.DIAGONAL

weighted_cn_matrix = _impl.weighted_cn_matrix
ra_matrix = _impl.ra_matrix
inverse_degrees = _pykernels.inverse_degrees
RAState = _impl.RAState


def backends():
    """Available backend modules keyed by name (used by the benchmark and tests)."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
