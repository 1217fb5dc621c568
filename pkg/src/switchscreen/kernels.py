"""Kernel selection: the compiled extension when importable, else pure Python.

Set ``SWITCHSCREEN_PURE=1`` to force the fallback.
"""

import os

BACKEND = "python"
if not os.environ.get("SWITCHSCREEN_PURE"):
    try:
        from ._kernels import batch_classes, path_counts, vertex_classes  # noqa: F401
        BACKEND = "cython"
    except ImportError:  # extension not built
        pass
if BACKEND == "python":
    from ._kernels_py import batch_classes, path_counts, vertex_classes  # noqa: F401
