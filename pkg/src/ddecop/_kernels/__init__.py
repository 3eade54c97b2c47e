"""Kernel backend selection: compiled extension if built, pure Python otherwise."""

from . import pyref

try:
    from . import _zcore as _impl

    BACKEND = "compiled"
except ImportError:  # extension not built
    _impl = pyref
    BACKEND = "python"

tn_transform = _impl.tn_transform
sweep_column = _impl.sweep_column
