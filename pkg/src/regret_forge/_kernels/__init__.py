"""Hot loops, compiled when available.

The Cython extension ``_ckernels`` is used if it was built; otherwise the
numpy implementations in ``_pykernels`` are used. Set
``REGRET_FORGE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels
from ._pykernels import MODE_FTL, MODE_RATES, MODE_TIMELESS, prob_table

_impl = _pykernels
if not os.environ.get("REGRET_FORGE_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

kahan_cumsum = _impl.kahan_cumsum
hedge_run = _impl.hedge_run
dh_binary_regret = _impl.dh_binary_regret
search_min = _impl.search_min
eg_run = _impl.eg_run
jacobi_eigh = _impl.jacobi_eigh


def backends():
    """Return the importable kernel modules keyed by name."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels

        found["cython"] = _ckernels
    except ImportError:
        pass
    return found


__all__ = [
    "BACKEND",
    "MODE_FTL",
    "MODE_RATES",
    "MODE_TIMELESS",
    "backends",
    "dh_binary_regret",
    "eg_run",
    "hedge_run",
    "jacobi_eigh",
    "kahan_cumsum",
    "prob_table",
    "search_min",
]
