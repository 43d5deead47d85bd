"""Kernel selection: the compiled extension when available, numpy otherwise.

Set ``OCT_ELAST_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels
if not os.environ.get("OCT_ELAST_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

born_sum_formfactor = _impl.born_sum_formfactor
born_sum_quadrature = _impl.born_sum_quadrature

__all__ = ["BACKEND", "born_sum_formfactor", "born_sum_quadrature"]
