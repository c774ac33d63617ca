"""Pure numpy implementations of the hot kernels.

Used when the compiled ``_ckernels`` extension is unavailable, and as the
reference side in the backend benchmark.
"""

import numpy as np

SQRT5 = np.sqrt(5.0)


def _scaled_sq_diffs(X1, X2, lengthscales):
    diff = (X1[:, None, :] - X2[None, :, :]) / lengthscales
    return diff * diff


def matern52_gram(X1, X2, lengthscales, signal_variance):
    r2 = _scaled_sq_diffs(X1, X2, lengthscales).sum(axis=-1)
    r = np.sqrt(r2)
    return signal_variance * (1.0 + SQRT5 * r + 5.0 * r2 / 3.0) * np.exp(-SQRT5 * r)


def matern52_symmetric_gram(X, lengthscales, signal_variance):
    K = matern52_gram(X, X, lengthscales, signal_variance)
    np.fill_diagonal(K, signal_variance)
    return K


def matern52_grad_terms(X, lengthscales, signal_variance, W):
    """Contractions sum_ij W_ij dK_ij/dlog(l_h) for every h, then sum_ij W_ij K_ij.

    W is symmetric and only its lower triangle and diagonal are read.
    """
    W = np.tril(W) + np.tril(W, -1).T
    sq = _scaled_sq_diffs(X, X, lengthscales)
    r2 = sq.sum(axis=-1)
    r = np.sqrt(r2)
    e = signal_variance * np.exp(-SQRT5 * r)
    c = W * (5.0 / 3.0) * e * (1.0 + SQRT5 * r)
    K = e * (1.0 + SQRT5 * r + 5.0 * r2 / 3.0)
    return np.append(np.einsum("ij,ijh->h", c, sq), np.sum(W * K))


def nearest_indices(queries, points):
    d2 = ((queries[:, None, :] - points[None, :, :]) ** 2).sum(axis=-1)
    # argmin returns the first minimiser, i.e. the lowest index on ties
    return np.argmin(d2, axis=1).astype(np.intp)
