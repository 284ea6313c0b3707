"""Kernel backends for the per-epoch training loop.

``_fused`` is a compiled Cython extension that runs the whole epoch
(forward, backward, Adam) in C with the GIL released, using BLAS for the
matrix products. ``_numpy_ref`` is a pure-numpy twin selected automatically
when the extension is not built. Both implement the same ``run_epoch``
contract; outputs agree up to floating-point reassociation.

The default prefers the compiled backend; override with the environment
variable ``NSANET_KERNEL=numpy|fused`` or the ``backend=`` argument that the
training entry points accept.
"""

from __future__ import annotations

import os

from . import _numpy_ref

try:
    from . import _fused
except ImportError:
    _fused = None

_BACKENDS = {"numpy": _numpy_ref}
if _fused is not None:
    _BACKENDS["fused"] = _fused


def available() -> tuple[str, ...]:
    """Backend names importable in this environment."""
    return tuple(sorted(_BACKENDS))


def default_name() -> str:
    env = os.environ.get("NSANET_KERNEL")
    if env:
        if env not in _BACKENDS:
            raise ValueError(f"NSANET_KERNEL={env!r} not available; have {available()}")
        return env
    return "fused" if "fused" in _BACKENDS else "numpy"


def get(name: str | None = None):
    """Resolve a backend module by name (None means the default)."""
    if name is None:
        name = default_name()
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown kernel backend {name!r}; have {available()}") from None
