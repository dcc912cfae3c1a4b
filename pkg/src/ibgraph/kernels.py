"""Kernel backend selection.

Two interchangeable implementations of the dense float64 kernels exist:
``_pykernels`` (numpy) and ``_ckernels`` (Cython extension built at install
time). The compiled one is preferred when importable. Set the environment
variable ``IBGRAPH_KERNELS=python`` or ``=compiled`` to force a backend, or
call :func:`use` at runtime (``benchmarks/compare_backends.py`` does this).
"""

from __future__ import annotations

import os

from . import _pykernels
from .errors import ParameterError

try:
    from . import _ckernels
except ImportError:  # extension not built; numpy fallback stays active
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels

active = _BACKENDS.get("compiled", _pykernels)


def available():
    """Names of the importable backends."""
    return sorted(_BACKENDS)


def backend_name():
    return active.NAME


def use(name):
    """Switch the active backend; returns the previously active one."""
    global active
    if name not in _BACKENDS:
        raise ParameterError(
            f"unknown kernel backend {name!r}; available: {available()}"
        )
    previous = active
    active = _BACKENDS[name]
    return previous


_env = os.environ.get("IBGRAPH_KERNELS", "").strip().lower()
if _env:
    use(_env)
