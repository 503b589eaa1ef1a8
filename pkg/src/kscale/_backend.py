"""Kernel backend selection.

The compiled extension is preferred when importable; the NumPy fallback is
functionally identical (and bit-identical for tree kernels). Set
``KSCALE_BACKEND=python`` or ``KSCALE_BACKEND=compiled`` to force a choice;
``compiled`` raises if the extension is missing.
"""

import os

from . import _pykern

_CHOICES = ("auto", "compiled", "python")
_requested = os.environ.get("KSCALE_BACKEND", "auto").lower()
if _requested not in _CHOICES:
    raise ImportError(f"KSCALE_BACKEND must be one of {_CHOICES}, got {_requested!r}")

kernels = None
if _requested in ("auto", "compiled"):
    try:
        from . import _ckern as kernels
    except ImportError:
        if _requested == "compiled":
            raise
if kernels is None:
    kernels = _pykern


def active_backend() -> str:
    """Name of the kernel set in use: 'compiled' or 'python'."""
    return kernels.NAME


def available_backends() -> dict:
    """All importable kernel sets, keyed by name (for tests and benchmarks)."""
    out = {"python": _pykern}
    try:
        from . import _ckern
        out["compiled"] = _ckern
    except ImportError:
        pass
    return out
