"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it was built; otherwise
the pure-Python ``_pykernels`` take over with identical results. Setting
``ATM_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os

from atm import _pykernels

if os.environ.get("ATM_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from atm import _ckernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

closure_many = _impl.closure_many
minimal_cuts = _impl.minimal_cuts


def available_backends() -> dict:
    backends = {"python": _pykernels}
    try:
        from atm import _ckernels  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        backends["cython"] = _ckernels
    return backends
