"""Backend selection for the numerical kernels.

The compiled extension ``maxentgame._kernels`` is used when it imports;
otherwise the numpy fallback in ``maxentgame._kernels_py`` is used.  Set
``MAXENTGAME_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("MAXENTGAME_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"

OPTIMAL = _kernels_py.OPTIMAL
UNBOUNDED = _kernels_py.UNBOUNDED
ITERATION_LIMIT = _kernels_py.ITERATION_LIMIT

simplex_pivot_loop = _impl.simplex_pivot_loop
pivot = _impl.pivot
hit_and_run = _impl.hit_and_run
log_capital_paths = _impl.log_capital_paths


def backends():
    """Return ``{name: module}`` for every backend importable here."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
        out["compiled"] = _kernels
    except ImportError:
        pass
    return out
