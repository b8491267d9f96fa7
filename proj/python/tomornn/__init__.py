"""Complex-valued unrolled RNNs and classic ISTA for super-resolving SAR
tomography: steering-matrix forward model, CRLB, synthetic data, network
forwards/training and detection scoring, backed by the C++ core."""

try:
    from ._core import *  # noqa: F401,F403  (installed layout)
    from ._core import __doc__ as _core_doc
except ImportError:  # build-tree layout: extension next to the CMake targets
    import os
    import sys

    _ext_dir = os.environ.get("TOMORNN_EXT_DIR")
    if _ext_dir and _ext_dir not in sys.path:
        sys.path.insert(0, _ext_dir)
    from _core import *  # noqa: F401,F403
    from _core import __doc__ as _core_doc

__all__ = [name for name in dir() if not name.startswith("_")]
