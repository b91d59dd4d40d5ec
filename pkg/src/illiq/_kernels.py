"""Select the compiled kernels when available, else the pure-Python ones.

Set ``ILLIQ_PURE=1`` to force the fallback.
"""

import os

BACKEND = "python"

if os.environ.get("ILLIQ_PURE", "") not in ("1", "true", "yes"):
    try:
        from ._ckernels import eta_update, pwl_eval, ratio_test  # noqa: F401

        BACKEND = "cython"
    except ImportError:  # extension not built
        pass

if BACKEND == "python":
    from ._pykernels import eta_update, pwl_eval, ratio_test  # noqa: F401

__all__ = ["BACKEND", "eta_update", "pwl_eval", "ratio_test"]
