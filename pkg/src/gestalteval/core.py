"""Backend selection for the episode-evaluation kernel.

The compiled Cython kernel is preferred when its extension built; the
numpy implementation is the fallback and the reference. Set
``GESTALTEVAL_BACKEND=python`` (or ``compiled``) to force a choice, e.g.
for the benchmark in benchmarks/bench_kernels.py.
"""

from __future__ import annotations

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def get_backend(name: str | None = None):
    """Resolve a kernel module by name, env override, or best available."""
    if name is None:
        name = os.environ.get("GESTALTEVAL_BACKEND")
    if name is None:
        name = "compiled" if "compiled" in _BACKENDS else "python"
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}")
    return _BACKENDS[name]
