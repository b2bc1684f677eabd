"""Kernel backend selection.

The compiled extension is used when it imported cleanly, otherwise the
numpy fallback. ``use("python")`` / ``use("compiled")`` switches at runtime
(tests and the benchmark compare both).
"""

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_active = _compiled if _compiled is not None else _kernels_py


def has_compiled():
    return _compiled is not None


def name():
    return "compiled" if _active is _compiled else "python"


def use(which):
    """Select the active backend; returns the previous backend's name."""
    global _active
    previous = name()
    if which == "python":
        _active = _kernels_py
    elif which == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available; build the extension")
        _active = _compiled
    else:
        raise ValueError(f"unknown backend {which!r}")
    return previous


def kernels():
    return _active
