"""Synthetic objectives, all posed for maximisation.

Branin and Hartmann3 are classical minimisation problems and are negated
here; Deceptive is returned as ``(mean g_i)^2`` (the negation of its usual
form); h1 is maximised as is.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigError, InvalidInputError


@dataclass
class Objective:
    name: str
    bounds: np.ndarray
    batch_fn: object = field(repr=False)  # (n, d) array -> (n,) noise-free values
    noise_std: float = 0.0
    known_optimum: tuple = None  # (x_star, f_star)

    def __post_init__(self):
        self.bounds = np.asarray(self.bounds, dtype=np.float64).reshape(-1, 2)
        if self.noise_std < 0:
            raise InvalidInputError("noise_std must be non-negative")

    @property
    def dim(self):
        return self.bounds.shape[0]

    def eval_batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise InvalidInputError(f"{self.name} expects dimension {self.dim}")
        return np.asarray(self.batch_fn(X), dtype=np.float64)

    def eval(self, x):
        """Noise-free value at ``x``."""
        return float(self.eval_batch(np.reshape(x, (1, -1)))[0])

    def observe(self, x, rng):
        """Noisy observation; consumes no randomness when ``noise_std == 0``."""
        value = self.eval(x)
        if self.noise_std > 0:
            value += self.noise_std * rng.standard_normal()
        return value

    @cached_property
    def value_range(self):
        """max - min over a fixed 10^4-point uniform sample (plus the optimum)."""
        rng = np.random.default_rng(12345)
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        vals = self.eval_batch(rng.uniform(lo, hi, size=(10_000, self.dim)))
        top = vals.max() if self.known_optimum is None else max(vals.max(), self.known_optimum[1])
        return float(top - vals.min())


def branin_raw(X):
    a, b, c = 1.0, 5.1 / (4 * math.pi**2), 5.0 / math.pi
    r, s, t = 6.0, 10.0, 1.0 / (8 * math.pi)
    x1, x2 = X[:, 0], X[:, 1]
    return a * (x2 - b * x1**2 + c * x1 - r) ** 2 + s * (1 - t) * np.cos(x1) + s


def branin(noise_std=0.0):
    x_star = np.array([math.pi, 2.275])
    f_star = -float(branin_raw(x_star[None, :])[0])
    return Objective("branin", [[-5.0, 10.0], [0.0, 15.0]], lambda X: -branin_raw(X),
                     noise_std, (x_star, f_star))


HARTMANN3_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
HARTMANN3_A = np.array([[3.0, 10, 30], [0.1, 10, 35], [3.0, 10, 30], [0.1, 10, 35]])
HARTMANN3_P = 1e-4 * np.array(
    [[3689, 1170, 2673], [4699, 4387, 7470], [1091, 8732, 5547], [381, 5743, 8828]]
)
# optimiser polished from the tabulated (0.114614, 0.555649, 0.852547)
HARTMANN3_X_STAR = np.array([0.11458887133078371, 0.5556488955562107, 0.852546983879289])


def hartmann3_raw(X):
    inner = np.einsum("ij,nij->ni", HARTMANN3_A, (X[:, None, :] - HARTMANN3_P[None]) ** 2)
    return -np.exp(-inner) @ HARTMANN3_ALPHA


def hartmann3(noise_std=0.0):
    f_star = -float(hartmann3_raw(HARTMANN3_X_STAR[None, :])[0])
    return Objective("hartmann3", [[0.0, 1.0]] * 3, lambda X: -hartmann3_raw(X),
                     noise_std, (HARTMANN3_X_STAR.copy(), f_star))


def deceptive_g(x, alpha):
    """Piecewise-linear g_i: 4/5 at both ends, peak 1 at x = alpha, zeros in between."""
    x = np.asarray(x, dtype=np.float64)
    alpha = np.broadcast_to(alpha, x.shape)
    b1 = 0.8 * alpha
    b3 = (1.0 + 4.0 * alpha) / 5.0
    return np.select(
        [x <= b1, x <= alpha, x <= b3],
        [-x / alpha + 0.8, 5.0 * x / alpha - 4.0, 5.0 * (x - alpha) / (alpha - 1.0) + 1.0],
        (x - 1.0) / (1.0 - alpha) + 0.8,
    )


def deceptive(n=2, beta=2.0, noise_std=0.0):
    if n < 1:
        raise InvalidInputError("deceptive needs n >= 1")
    alpha = np.arange(1, n + 1) / (n + 1)

    def fn(X):
        return np.mean(deceptive_g(X, alpha), axis=1) ** beta

    name = "deceptive" if n == 2 else f"deceptive-{n}"
    return Objective(name, [[0.0, 1.0]] * n, fn, noise_std, (alpha.copy(), 1.0))


H1_X_STAR = np.array([8.6998, 6.7665])


def h1_raw(X):
    x1, x2 = X[:, 0], X[:, 1]
    num = np.sin(x1 - x2 / 8.0) ** 2 + np.sin(x2 + x1 / 8.0) ** 2
    return num / np.sqrt((x1 - 8.6998) ** 2 + (x2 - 6.7665) ** 2 + 1.0)


def h1(noise_std=0.0):
    f_star = float(h1_raw(H1_X_STAR[None, :])[0])
    return Objective("h1", [[-25.0, 25.0]] * 2, h1_raw, noise_std, (H1_X_STAR.copy(), f_star))


_REGISTRY = {
    "branin": branin,
    "hartmann3": hartmann3,
    "deceptive": deceptive,
    "h1": h1,
}


def register_objective(name, factory):
    """Add a custom objective. ``factory(noise_std=...)`` must return an Objective."""
    _REGISTRY[name] = factory


def objective_names():
    return sorted(_REGISTRY)


def make_objective(name, noise_std=None):
    """Build an objective by name.

    ``noise_std=None`` selects the default of 1% of the objective's value
    range. ``deceptive-<n>`` gives the n-dimensional Deceptive function.
    """
    if name.startswith("deceptive-"):
        try:
            n = int(name.split("-", 1)[1])
        except ValueError:
            raise ConfigError(f"bad deceptive dimension in {name!r}") from None
        obj = deceptive(n)
    elif name in _REGISTRY:
        obj = _REGISTRY[name]()
    else:
        raise ConfigError(f"unknown objective {name!r}; known: {objective_names()}")
    obj.noise_std = 0.01 * obj.value_range if noise_std is None else float(noise_std)
    if obj.noise_std < 0:
        raise ConfigError("noise_std must be non-negative")
    return obj


def validate_objective_name(name):
    if name.startswith("deceptive-"):
        make_objective(name, 0.0)
    elif name not in _REGISTRY:
        raise ConfigError(f"unknown objective {name!r}; known: {objective_names()}")
