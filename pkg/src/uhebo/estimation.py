"""Hyperparameter estimation: the standard MLL/MAP fit and the consistent
pseudo-label fit built from uniformly sampled points and their nearest
observed neighbours."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .errors import InvalidInputError, InvalidStateError, NumericalError
from .gp import GammaPriors, Hyperparams, loss_and_gradient

MLL = "MLL"
MAP = "MAP"


@dataclass(frozen=True)
class PseudoDataset:
    """Uniform points labelled with the value of their nearest observation."""

    random_points: np.ndarray
    matched_indices: np.ndarray
    pseudo_values: np.ndarray

    def __post_init__(self):
        m = len(self.random_points)
        if not (len(self.matched_indices) == m == len(self.pseudo_values)):
            raise InvalidInputError("pseudo dataset lists must have equal length")

    def __len__(self):
        return len(self.pseudo_values)

    def training_pairs(self):
        return self.random_points, self.pseudo_values


@dataclass(frozen=True)
class EstimatorConfig:
    mt_factor: float = 2.0
    restarts: int = 5
    max_iters: int = 200
    loss_kind: str = MAP
    priors: GammaPriors = field(default_factory=GammaPriors)
    # box constraints on the hyperparameters (natural scale), suited to
    # inputs in the unit cube and standardised outputs
    lengthscale_bounds: tuple = (1e-3, 1e2)
    signal_variance_bounds: tuple = (1e-2, 1e2)
    noise_variance_bounds: tuple = (1e-6, 1.0)
    # log-uniform box the random restarts are drawn from
    lengthscale_init: tuple = (0.02, 2.0)
    signal_variance_init: tuple = (0.1, 10.0)
    noise_variance_init: tuple = (1e-5, 1e-1)

    def __post_init__(self):
        if self.mt_factor < 1:
            raise InvalidInputError("mt_factor must be >= 1 so that M_t >= |D|")
        if self.restarts < 1 or self.max_iters < 1:
            raise InvalidInputError("restarts and max_iters must be >= 1")
        if self.loss_kind not in (MLL, MAP):
            raise InvalidInputError(f"unknown loss kind {self.loss_kind!r}")

    def n_pseudo(self, n_observed):
        """M_t for a dataset holding ``n_observed`` points."""
        return int(math.ceil(round(self.mt_factor * n_observed, 9)))

    def log_bounds(self, dim):
        rows = [self.lengthscale_bounds] * dim + [
            self.signal_variance_bounds,
            self.noise_variance_bounds,
        ]
        return np.log(np.array(rows, dtype=np.float64))

    def default_start(self, dim):
        return Hyperparams(np.full(dim, 0.3), 1.0, 1e-2)

    def active_priors(self):
        return self.priors if self.loss_kind == MAP else None


def match_nearest(data, random_points):
    """Label each random point with the value of its L2-nearest observation.

    Ties go to the lowest observation index.
    """
    if len(data) == 0:
        raise InvalidStateError("cannot match against an empty dataset")
    Q = np.asarray(random_points, dtype=np.float64).reshape(-1, data.dim)
    idx = kernels.nearest_indices(Q, data.points)
    return PseudoDataset(Q, idx, data.values[idx].copy())


def _draw_start(config, dim, rng):
    lo = np.log([config.lengthscale_init[0]] * dim
                + [config.signal_variance_init[0], config.noise_variance_init[0]])
    hi = np.log([config.lengthscale_init[1]] * dim
                + [config.signal_variance_init[1], config.noise_variance_init[1]])
    return rng.uniform(lo, hi)


def minimize_loss(pairs, config, rng, init=None):
    """Multi-start L-BFGS-B on the negative loss in log space.

    The first start is ``init`` (or the config default); the remaining
    ``restarts - 1`` are drawn log-uniformly. Returns ``(theta, loss)``.
    """
    X, y = pairs
    X = np.asarray(X, dtype=np.float64)
    if len(y) == 0:
        raise InvalidStateError("no training pairs")
    dim = X.shape[1]
    priors = config.active_priors()
    bounds = config.log_bounds(dim)

    starts = [(init or config.default_start(dim)).to_log_vector()]
    starts += [_draw_start(config, dim, rng) for _ in range(config.restarts - 1)]

    def fun(v):
        try:
            value, grad = loss_and_gradient((X, y), Hyperparams.from_log_vector(v), priors)
        except NumericalError:
            return 1e25, np.zeros_like(v)
        if not np.isfinite(value):
            return 1e25, np.zeros_like(v)
        return value, grad

    best_v, best_f = None, np.inf
    for v0 in starts:
        v0 = np.clip(v0, bounds[:, 0], bounds[:, 1])
        res = minimize(fun, v0, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": config.max_iters})
        if res.fun < best_f and res.fun < 1e25:
            best_v, best_f = res.x, float(res.fun)
    if best_v is None:
        raise NumericalError("every restart failed to factorise", jitter=1e-4)
    return Hyperparams.from_log_vector(best_v), best_f


def estimate_map(data, config, rng, init=None):
    """Standard estimate on the observed (possibly biased) pairs."""
    pairs = data.training_pairs() if hasattr(data, "training_pairs") else data
    return minimize_loss(pairs, config, rng, init)[0]


def sample_pseudo(data, config, rng):
    """Draw M_t uniform points in the box and match them to observations."""
    m = config.n_pseudo(len(data))
    lo, hi = data.bounds[:, 0], data.bounds[:, 1]
    return match_nearest(data, rng.uniform(lo, hi, size=(m, data.dim)))


def estimate_consistent(data, config, rng, init=None):
    """Estimate on uniform pseudo-labelled points.

    Only the estimate uses the pseudo pairs; predictions should still be made
    from ``data`` itself.
    """
    if len(data) == 0:
        raise InvalidStateError("cannot estimate from an empty dataset")
    pseudo = sample_pseudo(data, config, rng)
    theta, _ = minimize_loss(pseudo.training_pairs(), config, rng, init)
    return theta, pseudo


def pseudo_loss_gap(pseudo, true_values, theta, config=None):
    """Per-point gap ``|L(pseudo labels) - L(true labels)| / M`` at a fixed theta.

    Both losses are evaluated at the same random points, so the prior term
    of the MAP loss cancels; the average over the ``M`` points is what
    shrinks as the observations fill the domain.
    """
    config = config or EstimatorConfig()
    true_values = np.asarray(true_values, dtype=np.float64)
    if true_values.shape != pseudo.pseudo_values.shape:
        raise InvalidInputError("one true value per random point is required")
    priors = config.active_priors()
    a = loss_and_gradient(pseudo.training_pairs(), theta, priors)[0]
    b = loss_and_gradient((pseudo.random_points, true_values), theta, priors)[0]
    return abs(a - b) / len(pseudo)
