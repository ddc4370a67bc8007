"""Backend selection for the simulation hot loops.

The compiled extension is used when importable; set ``HSTBEAM_BACKEND=python``
to force the numpy fallback.
"""

import os

from . import _pykernels

_wanted = os.environ.get("HSTBEAM_BACKEND", "auto").lower()

if _wanted == "python":
    backend = _pykernels
else:
    try:
        from . import _kernels as backend
    except ImportError:
        if _wanted == "cython":
            raise
        backend = _pykernels

BACKEND = backend.NAME


def get_backend(name=None):
    """Kernel module by name (``"cython"``/``"python"``); the active one if ``None``."""
    if name is None:
        return backend
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def available_backends():
    names = ["python"]
    try:
        from . import _kernels  # noqa: F401
        names.insert(0, "cython")
    except ImportError:
        pass
    return names
