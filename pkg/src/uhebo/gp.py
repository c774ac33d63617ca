"""Zero-mean Gaussian process with a Matern 5/2 ARD kernel.

Hyperparameters are handled in log space by the loss functions so that any
unconstrained optimiser keeps them positive. The parameter vector layout is
``[log l_1, ..., log l_d, log signal_variance, log noise_variance]``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, lapack, solve_triangular

from . import kernels
from .errors import InvalidInputError, InvalidStateError, NumericalError

JITTER_LADDER = (0.0, 1e-8, 1e-6, 1e-4)
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Hyperparams:
    lengthscales: np.ndarray
    signal_variance: float
    noise_variance: float

    def __post_init__(self):
        ls = np.array(self.lengthscales, dtype=np.float64).reshape(-1)
        ls.setflags(write=False)
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))
        object.__setattr__(self, "noise_variance", float(self.noise_variance))
        if ls.size == 0:
            raise InvalidInputError("need at least one lengthscale")
        values = np.append(ls, [self.signal_variance, self.noise_variance])
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise InvalidInputError(f"hyperparameters must be finite and positive, got {values}")

    @property
    def dim(self):
        return self.lengthscales.size

    def to_log_vector(self):
        return np.log(np.append(self.lengthscales, [self.signal_variance, self.noise_variance]))

    @classmethod
    def from_log_vector(cls, vec):
        vec = np.asarray(vec, dtype=np.float64)
        return cls(np.exp(vec[:-2]), math.exp(vec[-2]), math.exp(vec[-1]))

    def with_lengthscales(self, lengthscales):
        return Hyperparams(lengthscales, self.signal_variance, self.noise_variance)

    def __eq__(self, other):
        if not isinstance(other, Hyperparams):
            return NotImplemented
        return (
            np.array_equal(self.lengthscales, other.lengthscales)
            and self.signal_variance == other.signal_variance
            and self.noise_variance == other.noise_variance
        )

    def __hash__(self):
        return hash((self.lengthscales.tobytes(), self.signal_variance, self.noise_variance))


@dataclass(frozen=True)
class Dataset:
    """Ordered observations inside a box. Row index is the insertion order."""

    points: np.ndarray
    values: np.ndarray
    bounds: np.ndarray

    def __post_init__(self):
        bounds = np.array(self.bounds, dtype=np.float64).reshape(-1, 2)
        d = bounds.shape[0]
        points = np.array(self.points, dtype=np.float64).reshape(-1, d)
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if points.shape[0] != values.shape[0]:
            raise InvalidInputError(
                f"{points.shape[0]} points but {values.shape[0]} values"
            )
        if np.any(bounds[:, 0] > bounds[:, 1]):
            raise InvalidInputError("lower bound above upper bound")
        slack = 1e-12 * np.maximum(1.0, np.abs(bounds)).max()
        if points.size and (
            np.any(points < bounds[:, 0] - slack) or np.any(points > bounds[:, 1] + slack)
        ):
            raise InvalidInputError("point outside bounds")
        for a in (points, values, bounds):
            a.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "bounds", bounds)

    @classmethod
    def empty(cls, bounds):
        bounds = np.asarray(bounds, dtype=np.float64).reshape(-1, 2)
        return cls(np.empty((0, bounds.shape[0])), np.empty(0), bounds)

    @property
    def dim(self):
        return self.bounds.shape[0]

    def __len__(self):
        return self.values.shape[0]

    def append(self, x, y):
        """Return a new dataset with ``(x, y)`` added at the end."""
        x = np.asarray(x, dtype=np.float64).reshape(1, self.dim)
        return Dataset(np.vstack([self.points, x]), np.append(self.values, y), self.bounds)

    def training_pairs(self):
        return self.points, self.values


@dataclass(frozen=True)
class GammaPriors:
    """Independent Gamma(shape, scale) priors on every hyperparameter."""

    shape: float = 1e-3
    scale: float = 10.0

    def __post_init__(self):
        if self.shape <= 0 or self.scale <= 0:
            raise InvalidInputError("Gamma prior shape and scale must be positive")

    def log_pdf(self, theta):
        x = np.exp(theta.to_log_vector())
        k, s = self.shape, self.scale
        return float(np.sum((k - 1.0) * np.log(x) - x / s - math.lgamma(k) - k * math.log(s)))

    def grad_log_pdf(self, theta):
        """Gradient of ``log_pdf`` with respect to the log-parameter vector."""
        x = np.exp(theta.to_log_vector())
        return (self.shape - 1.0) - x / self.scale


def matern52_ard(x, x2, theta):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    x2 = np.asarray(x2, dtype=np.float64).reshape(-1)
    if x.size != theta.dim or x2.size != theta.dim:
        raise InvalidInputError(
            f"expected vectors of length {theta.dim}, got {x.size} and {x2.size}"
        )
    r = math.sqrt(float(np.sum(((x - x2) / theta.lengthscales) ** 2)))
    s5r = math.sqrt(5.0) * r
    return theta.signal_variance * (1.0 + s5r + 5.0 * r * r / 3.0) * math.exp(-s5r)


def gram(X1, X2, theta):
    return kernels.matern52_gram(X1, X2, theta.lengthscales, theta.signal_variance)


def _as_pairs(data):
    if hasattr(data, "training_pairs"):
        X, y = data.training_pairs()
    else:
        X, y = data
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.ndim == 1:
        X = X.reshape(y.size, -1) if y.size else X.reshape(0, -1)
    if X.shape[0] != y.size:
        raise InvalidInputError(f"{X.shape[0]} points but {y.size} values")
    return X, y


def _check_dim(X, theta):
    if X.shape[0] and X.shape[1] != theta.dim:
        raise InvalidInputError(f"points have dimension {X.shape[1]}, theta has {theta.dim}")


def _factorize(X, theta):
    """Cholesky of K + noise*I, walking up the jitter ladder on failure."""
    K = kernels.matern52_symmetric_gram(X, theta.lengthscales, theta.signal_variance)
    diag = np.arange(K.shape[0])
    for jitter in JITTER_LADDER:
        A = K.copy()
        A[diag, diag] += theta.noise_variance + jitter
        try:
            L = cholesky(A, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(L)):
            return K, L, jitter
    raise NumericalError(
        f"Cholesky failed at maximum jitter {JITTER_LADDER[-1]:g}", jitter=JITTER_LADDER[-1]
    )


@dataclass(frozen=True)
class GpPosterior:
    data: Dataset
    theta: Hyperparams
    chol: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    jitter: float = 0.0

    def predict(self, x):
        return predict(self, x)

    def predict_batch(self, X):
        return predict_batch(self, X)


def fit_posterior(data, theta):
    X, y = data.training_pairs()
    _check_dim(X, theta)
    if X.shape[0] == 0:
        return GpPosterior(data, theta, np.empty((0, 0)), np.empty(0), 0.0)
    _, L, jitter = _factorize(X, theta)
    alpha = cho_solve((L, True), y, check_finite=False)
    for a in (L, alpha):
        a.setflags(write=False)
    return GpPosterior(data, theta, L, alpha, jitter)


def predict_batch(gp, X):
    """Posterior mean and variance at every row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    theta = gp.theta
    if X.shape[1] != theta.dim:
        raise InvalidInputError(f"query has dimension {X.shape[1]}, expected {theta.dim}")
    sf2 = theta.signal_variance
    if gp.alpha.size == 0:
        return np.zeros(X.shape[0]), np.full(X.shape[0], sf2)
    Ks = gram(X, gp.data.points, theta)
    mean = Ks @ gp.alpha
    v = solve_triangular(gp.chol, Ks.T, lower=True, check_finite=False)
    var = sf2 - np.einsum("ij,ij->j", v, v)
    if np.any(var < -1e-8 * max(1.0, sf2)):
        raise NumericalError(f"predictive variance {var.min():.3g} is negative", jitter=gp.jitter)
    return mean, np.clip(var, 0.0, sf2)


def predict(gp, x):
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    mean, var = predict_batch(gp, x)
    return float(mean[0]), float(var[0])


def log_marginal_likelihood(data, theta):
    X, y = _as_pairs(data)
    _check_dim(X, theta)
    n = y.size
    if n == 0:
        return 0.0
    _, L, _ = _factorize(X, theta)
    alpha = cho_solve((L, True), y, check_finite=False)
    return float(-0.5 * y @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * LOG_2PI)


def log_posterior(data, theta, priors=None):
    """Log marginal likelihood plus the log prior density (flat if ``priors`` is None)."""
    value = log_marginal_likelihood(data, theta)
    if priors is not None:
        value += priors.log_pdf(theta)
    return value


def _inverse_lower(L):
    """Lower triangle (and diagonal) of (L L^T)^-1; the upper triangle is zero."""
    inv, info = lapack.dpotri(L, lower=1)
    if info != 0:
        raise NumericalError(f"dpotri failed with info={info}")
    return inv


def loss_and_gradient(data, theta, priors=None):
    """Negative log posterior and its gradient w.r.t. the log-parameter vector.

    With ``priors=None`` this is the negative log marginal likelihood.
    """
    X, y = _as_pairs(data)
    _check_dim(X, theta)
    n = y.size
    grad = np.zeros(theta.dim + 2)
    value = 0.0
    if n:
        _, L, _ = _factorize(X, theta)
        alpha = cho_solve((L, True), y, check_finite=False)
        # W = alpha alpha^T - A^-1, valid on the lower triangle only
        W = np.outer(alpha, alpha)
        W -= _inverse_lower(L)
        value = float(0.5 * y @ alpha + np.sum(np.log(np.diag(L))) + 0.5 * n * LOG_2PI)
        terms = kernels.matern52_grad_terms(X, theta.lengthscales, theta.signal_variance, W)
        grad[: theta.dim + 1] = -0.5 * terms
        grad[-1] = -0.5 * theta.noise_variance * np.trace(W)
    if priors is not None:
        value -= priors.log_pdf(theta)
        grad -= priors.grad_log_pdf(theta)
    return value, grad


def loss_gradient(data, theta, priors=None):
    return loss_and_gradient(data, theta, priors)[1]
