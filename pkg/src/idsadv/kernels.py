"""Backend selection for the elementwise hot kernels.

The compiled ``_kernels`` extension is used when it imports; otherwise (or
when ``IDSADV_PURE_PYTHON=1``) the numpy implementation in ``_kernels_py``
is used. Both expose the same functions; this module normalizes argument
shapes and dtypes before dispatching.
"""
import logging
import os

import numpy as np

from . import _kernels_py

logger = logging.getLogger(__name__)

RELU = 0
SELU = 1
SELU_LAMBDA = _kernels_py.SELU_LAMBDA
SELU_ALPHA = _kernels_py.SELU_ALPHA


def _load_backend():
    if os.environ.get("IDSADV_PURE_PYTHON", "") not in ("", "0"):
        return _kernels_py, "python"
    try:
        from . import _kernels
    except ImportError:  # extension not built
        logger.debug("compiled kernels unavailable, using numpy fallback")
        return _kernels_py, "python"
    return _kernels, "compiled"


_impl, BACKEND = _load_backend()


def use_backend(name):
    """Switch backend at runtime ("compiled" or "python"); returns the previous name."""
    global _impl, BACKEND
    previous = BACKEND
    if name == "python":
        _impl, BACKEND = _kernels_py, "python"
    elif name == "compiled":
        from . import _kernels
        _impl, BACKEND = _kernels, "compiled"
    else:
        raise ValueError(f"unknown backend {name!r}")
    return previous


def compiled_available():
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        return False
    return True


def _mat(a):
    return np.asarray(a, dtype=np.float64, order="C")


def _vec(v, width):
    out = np.broadcast_to(np.asarray(v, dtype=np.float64), (width,))
    return np.ascontiguousarray(out)


def _as2d(a):
    """View any array as 2-D (rows x last axis); returns (view, original shape)."""
    a = _mat(a)
    if a.ndim == 0:
        return a.reshape(1, 1), a.shape
    return a.reshape(-1, a.shape[-1]), a.shape


def act_forward(z, kind):
    z2, shape = _as2d(z)
    return _impl.act_forward(z2, kind).reshape(shape)


def act_backward(z, upstream, kind):
    z2, shape = _as2d(z)
    return _impl.act_backward(z2, _mat(upstream).reshape(z2.shape), kind).reshape(shape)


def alpha_dropout(h, keep, a, b, alpha_p):
    h2, shape = _as2d(h)
    keep = np.ascontiguousarray(keep, dtype=bool).reshape(h2.shape)
    return _impl.alpha_dropout(h2, keep, float(a), float(b), float(alpha_p)).reshape(shape)


def signed_step(x, grad, step):
    x2, shape = _as2d(x)
    out = _impl.signed_step(x2, _mat(grad).reshape(x2.shape), _vec(step, x2.shape[1]))
    return out.reshape(shape)


def project_linf(cand, origin, eps, lo, hi):
    c2, shape = _as2d(cand)
    d = c2.shape[1]
    out = _impl.project_linf(c2, _mat(origin).reshape(c2.shape), _vec(eps, d),
                             _vec(lo, d), _vec(hi, d))
    return out.reshape(shape)
