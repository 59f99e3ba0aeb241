"""Integration backend selection.

The compiled extension (``ftcsim._core``) is preferred when it was built;
the pure-Python loop is the always-available fallback and the reference
implementation.  Selection order:

1. explicit ``backend=`` argument to ``run_scenario``
2. the ``FTCSIM_BACKEND`` environment variable (``compiled`` or ``python``)
3. compiled if importable, else python
"""

from __future__ import annotations

import os

from . import _loop_py

try:
    from . import _core
    HAVE_COMPILED = True
except ImportError:
    _core = None
    HAVE_COMPILED = False


def available_backends() -> tuple:
    return ("compiled", "python") if HAVE_COMPILED else ("python",)


def default_backend() -> str:
    env = os.environ.get("FTCSIM_BACKEND", "").strip().lower()
    if env:
        if env not in ("compiled", "python"):
            raise ValueError(f"FTCSIM_BACKEND must be 'compiled' or 'python', got {env!r}")
        if env == "compiled" and not HAVE_COMPILED:
            raise RuntimeError("FTCSIM_BACKEND=compiled but the extension is not built")
        return env
    return "compiled" if HAVE_COMPILED else "python"


def get_loop(backend: str | None = None):
    """Resolve a backend name to (name, loop callable)."""
    name = backend or default_backend()
    if name == "python":
        return name, _loop_py.run_loop
    if name == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled backend requested but ftcsim._core is not built")
        from . import _plan
        return name, _plan.run_loop
    raise ValueError(f"unknown backend {name!r}; expected 'compiled' or 'python'")
