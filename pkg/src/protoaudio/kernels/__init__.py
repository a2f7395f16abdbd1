"""Hot-loop kernels with a compiled core and a numpy fallback.

The Cython extension is used when it imported cleanly; set
``PROTOAUDIO_BACKEND=numpy`` or ``PROTOAUDIO_BACKEND=cython`` to force one
side (forcing ``cython`` raises if the extension is unavailable). Both
implementations share the same contracts, including the max-pool tie rule,
and are individually deterministic.
"""
from __future__ import annotations

import os

from . import _numpy_impl

_requested = os.environ.get("PROTOAUDIO_BACKEND", "auto").lower()
if _requested not in {"auto", "cython", "numpy"}:
    raise ValueError(f"PROTOAUDIO_BACKEND must be auto, cython or numpy, got {_requested!r}")

_impl = None
if _requested in ("auto", "cython"):
    try:
        from . import _convpool as _impl  # type: ignore[no-redef]
    except ImportError:
        if _requested == "cython":
            raise ImportError(
                "PROTOAUDIO_BACKEND=cython but the compiled extension is not available; "
                "reinstall with a C toolchain or use PROTOAUDIO_BACKEND=numpy"
            ) from None
if _impl is None:
    _impl = _numpy_impl

BACKEND = _impl.BACKEND_NAME

conv2d_forward = _impl.conv2d_forward
conv2d_backward = _impl.conv2d_backward
maxpool2_forward = _impl.maxpool2_forward
maxpool2_backward = _impl.maxpool2_backward


def available_backends() -> list[str]:
    """Names of the kernel implementations importable in this installation."""
    names = []
    try:
        from . import _convpool  # noqa: F401

        names.append("cython")
    except ImportError:
        pass
    names.append("numpy")
    return names


def get_impl(name: str):
    """Return the kernel module for an explicit backend name (for benchmarks/tests)."""
    if name == "numpy":
        return _numpy_impl
    if name == "cython":
        from . import _convpool

        return _convpool
    raise ValueError(f"unknown backend {name!r}")
