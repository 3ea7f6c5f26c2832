"""Kernel backend chosen at import: compiled extension if built, else NumPy.

Set ``LEARNPLANE_KERNELS=python`` to force the NumPy fallback.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _kernels_py


def _load() -> tuple[ModuleType, str]:
    if os.environ.get("LEARNPLANE_KERNELS", "").lower() in ("python", "py", "numpy"):
        return _kernels_py, "python"
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        return _kernels_py, "python"
    return _kernels, "cython"


def available_backends() -> dict[str, ModuleType]:
    backends = {"python": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]

        backends["cython"] = _kernels
    except ImportError:
        pass
    return backends


impl, BACKEND = _load()

N_PARAMS = _kernels_py.N_PARAMS
LAYER_SIZES = _kernels_py.LAYER_SIZES
unpack = _kernels_py.unpack

forward = impl.forward
forward_batch = impl.forward_batch
loss_grad = impl.loss_grad
adam_update = impl.adam_update
train_step = impl.train_step
