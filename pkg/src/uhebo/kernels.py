"""Backend selection for the hot numerical kernels.

The compiled extension is preferred. Set ``UHEBO_PURE_PYTHON=1`` to force
the numpy fallback (useful for debugging and for the backend benchmark).
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("UHEBO_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        _impl = _pykernels


def _mat(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _vec(a):
    return np.ascontiguousarray(a, dtype=np.float64).reshape(-1)


def matern52_gram(X1, X2, lengthscales, signal_variance):
    return _impl.matern52_gram(_mat(X1), _mat(X2), _vec(lengthscales), float(signal_variance))


def matern52_symmetric_gram(X, lengthscales, signal_variance):
    return _impl.matern52_symmetric_gram(_mat(X), _vec(lengthscales), float(signal_variance))


def matern52_grad_terms(X, lengthscales, signal_variance, W):
    return _impl.matern52_grad_terms(
        _mat(X), _vec(lengthscales), float(signal_variance), _mat(W)
    )


def nearest_indices(queries, points):
    return _impl.nearest_indices(_mat(queries), _mat(points))
