"""Selects the search backend: compiled extension or pure Python.

The compiled kernel (chargenet._kernel, built from _kernel.pyx) is used
when it imports cleanly. Set CHARGE_NET_BACKEND=py to force the fallback
or CHARGE_NET_BACKEND=c to require the extension (ImportError if absent);
the default "auto" prefers the extension.
"""

from __future__ import annotations

import os

from . import _kernel_py

_ENV_VAR = "CHARGE_NET_BACKEND"

try:
    from . import _kernel as _compiled  # type: ignore[attr-defined]
except ImportError:
    _compiled = None


def available_backends() -> tuple[str, ...]:
    if _compiled is not None:
        return ("c", "py")
    return ("py",)


def get_kernel(name: str | None = None):
    """Return (module, label) for the requested backend.

    name may be "auto", "c", "py", or None (meaning: honor the
    CHARGE_NET_BACKEND environment variable, default auto).
    """
    if name is None:
        name = os.environ.get(_ENV_VAR, "auto")
    name = name.lower()
    if name not in ("auto", "c", "py"):
        raise ValueError(f"unknown backend {name!r}; expected auto, c, or py")
    if name == "py":
        return _kernel_py, "py"
    if name == "c":
        if _compiled is None:
            raise ImportError(
                "compiled kernel requested but chargenet._kernel is not "
                "built; reinstall the package or set CHARGE_NET_BACKEND=py")
        return _compiled, "c"
    if _compiled is not None:
        return _compiled, "c"
    return _kernel_py, "py"
