"""Backend selection for the hot kernels.

The compiled extension is preferred; the pure-Python module is used when the
extension is missing or ``MOTTK_PURE_PYTHON=1`` is set in the environment.
"""
import os

from mottk import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("MOTTK_PURE_PYTHON", "") != "1":
    try:
        from mottk import _ckernels
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        _impl = _ckernels

iou_matrix = _impl.iou_matrix
giou_matrix = _impl.giou_matrix
solve_lsa = _impl.solve_lsa


def available_backends():
    """Names of importable backends, compiled first."""
    names = []
    try:
        from mottk import _ckernels  # noqa: F401
        names.append("cython")
    except ImportError:
        pass
    names.append("python")
    return names


def get_backend(name):
    """Module implementing ``iou_matrix``, ``giou_matrix`` and ``solve_lsa``."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from mottk import _ckernels
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
