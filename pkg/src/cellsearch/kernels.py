"""Backend selection for the slot-evaluation kernel.

The compiled extension is used when it imports; otherwise the numpy
implementation is. Set ``CELLSEARCH_KERNEL=numpy`` to force the fallback.
"""
import os

from . import _kernel_py

BACKENDS = {"numpy": _kernel_py.first_detection}

try:
    from . import _kernel as _kernel_c
except ImportError:  # extension not built
    _kernel_c = None
else:
    BACKENDS["cython"] = _kernel_c.first_detection

if os.environ.get("CELLSEARCH_KERNEL", "").lower() == "numpy" or _kernel_c is None:
    BACKEND = "numpy"
else:
    BACKEND = "cython"

first_detection = BACKENDS[BACKEND]
