"""Switchable elementwise math backend for the hot sampling loops.

The convergence studies push O(10^11) stable variates through ``sin``, ``cos``,
``log`` and ``exp``.  numpy's float64 trig on this class of hardware runs at
libm speed (~12-16 ns/element) while torch's SLEEF kernels run vectorized
(~1.3 ns/element), so when torch is importable we route the four transcendental
primitives through it.  Everything else (arithmetic, reductions, cumsum) stays
in numpy: reductions in particular are kept in numpy so results do not depend
on any thread partitioning.

Backend choice is process-global, recorded in run manifests, and controlled by
the ``LEVYPIM_MATH_BACKEND`` environment variable (``auto`` | ``numpy`` |
``torch``, default ``auto``).  Within a backend all results are bit-stable;
the two backends differ by a few ulp in the transcendentals.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ParameterError

_BACKEND = None  # resolved lazily
_TORCH = None
_THREADS = 1


def _resolve(name):
    global _TORCH
    if name == "numpy":
        return "numpy"
    if name in ("torch", "auto"):
        try:
            import torch
        except ImportError:
            if name == "torch":
                raise ParameterError(
                    "LEVYPIM_MATH_BACKEND=torch requested but torch is not importable"
                )
            return "numpy"
        torch.set_num_threads(_THREADS)
        _TORCH = torch
        return "torch"
    raise ParameterError(f"unknown math backend {name!r} (use auto, numpy or torch)")


def active_backend() -> str:
    """Name of the backend in use; resolves (and caches) on first call."""
    global _BACKEND
    if _BACKEND is None:
        _BACKEND = _resolve(os.environ.get("LEVYPIM_MATH_BACKEND", "auto"))
    return _BACKEND


def set_backend(name: str) -> None:
    """Force a backend (mainly for tests and the CLI)."""
    global _BACKEND
    _BACKEND = _resolve(name)


def set_threads(n: int) -> None:
    """Thread count for the torch backend; elementwise kernels only, so the
    value affects speed, never results."""
    global _THREADS
    if n < 1:
        raise ParameterError(f"thread count must be >= 1, got {n}")
    _THREADS = n
    if _TORCH is not None:
        _TORCH.set_num_threads(n)


def _torch_unary(fn, x, out):
    import torch  # cached import; _TORCH already loaded

    src = torch.from_numpy(np.ascontiguousarray(x))
    dst = torch.from_numpy(out)
    fn(src, out=dst)
    return out


def _make_unary(np_fn, torch_name):
    def op(x, out=None):
        x = np.asarray(x, dtype=np.float64)
        if out is None:
            out = np.empty_like(x)
        # No size cutoff: the same input element must produce the same bits no
        # matter how a batch is shaped or grouped across workers.
        if active_backend() == "torch" and x.size > 0:
            return _torch_unary(getattr(_TORCH, torch_name), x, out)
        return np_fn(x, out=out)

    op.__name__ = np_fn.__name__
    return op


sin = _make_unary(np.sin, "sin")
cos = _make_unary(np.cos, "cos")
log = _make_unary(np.log, "log")
exp = _make_unary(np.exp, "exp")
