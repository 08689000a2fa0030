"""Backend selection for the hot kernel reductions.

The compiled extension ``genkde._core`` is preferred when importable; the
pure-numpy twin ``genkde._core_np`` is the fallback. Selection happens once
at import and can be forced with ``GENKDE_BACKEND={auto,compiled,numpy}``.
``GENKDE_THREADS`` caps the compiled backend's parallelism (0 = auto) and is
read per call so the CLI environment applies.
"""

import os

import numpy as np

from . import _core_np

try:
    from . import _core
except ImportError:
    _core = None

_choice = os.environ.get("GENKDE_BACKEND", "auto")
if _choice not in ("auto", "compiled", "numpy"):
    raise ValueError(f"GENKDE_BACKEND must be auto, compiled, or numpy, got {_choice!r}")
if _choice == "compiled" and _core is None:
    raise ImportError("GENKDE_BACKEND=compiled but the genkde._core extension is not built")

_USE_COMPILED = _core is not None and _choice != "numpy"


def backend_name():
    """Name of the active backend: 'compiled' or 'numpy'."""
    return "compiled" if _USE_COMPILED else "numpy"


def thread_count():
    """Requested thread cap from GENKDE_THREADS (0 = let OpenMP decide)."""
    raw = os.environ.get("GENKDE_THREADS", "0")
    try:
        count = int(raw)
    except ValueError as exc:
        raise ValueError(f"GENKDE_THREADS must be an integer, got {raw!r}") from exc
    if count < 0:
        raise ValueError("GENKDE_THREADS must be >= 0")
    return count


def _as_c_matrix(arr):
    return np.ascontiguousarray(arr, dtype=np.float64)


def kde_panel(support, queries, h, want_sqdist=False, want_diff=False):
    """Per-query log KDE density and optional softmax-weighted moments.

    See genkde._core_np.kde_panel for the exact contract.
    """
    support = _as_c_matrix(support)
    queries = _as_c_matrix(queries)
    if _USE_COMPILED:
        return _core.kde_panel(support, queries, float(h), want_sqdist,
                               want_diff, thread_count())
    return _core_np.kde_panel(support, queries, float(h), want_sqdist, want_diff)


def loo_panel(points, h, want_sqdist=False):
    """Leave-one-out log KDE density per point, optional weighted sq-distance."""
    points = _as_c_matrix(points)
    if _USE_COMPILED:
        return _core.loo_panel(points, float(h), want_sqdist, thread_count())
    return _core_np.loo_panel(points, float(h), want_sqdist)
