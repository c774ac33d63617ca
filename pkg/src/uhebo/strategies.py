"""BO strategies behind one interface: ``run_strategy(kind, objective, T, D0, configs, rng)``.

All GP work happens in a model space: inputs mapped to the unit cube and
outputs standardised with the mean/std of the data the GP is conditioned on.
Hyperparameters recorded in traces are model-space values.
"""

import enum
import math
import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import estimation
from .acquisition import AcquisitionConfig, maximize
from .bandit import Exp3, Exp3State, RewardRecord, exp3_gamma, scale_reward
from .errors import InvalidInputError, ObjectiveError
from .estimation import EstimatorConfig
from .gp import Dataset, fit_posterior, predict_batch
from .trace import RunTrace

RANDOM_ARM = 1
ACQUISITION_ARM = 2


class StrategyKind(str, enum.Enum):
    UHE = "UHE"
    MAP_BO = "MAP_BO"
    RANDOM = "RANDOM"
    PORTFOLIO = "PORTFOLIO"
    A_GP_UCB = "A_GP_UCB"
    WANG_DEFREITAS = "WANG_DEFREITAS"
    RDEXP3 = "RDEXP3"
    RANDOM_PLUS_EXP3 = "RANDOM_PLUS_EXP3"


@dataclass(frozen=True)
class StrategyConfig:
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    kappa: float = 0.1  # Wang & de Freitas minimum predictive std
    scaling_grid_depth: int = 10  # s in {1, 1/2, ..., 2^-depth}
    reference_exponent: float = 0.9  # A-GP-UCB p(t) = t^0.9


class ModelSpace:
    """Affine maps between the problem box / raw values and the GP's space."""

    def __init__(self, bounds, values):
        self.bounds = np.asarray(bounds, dtype=np.float64).reshape(-1, 2)
        self.lo = self.bounds[:, 0]
        self.width = self.bounds[:, 1] - self.lo
        self._safe_width = np.where(self.width > 0, self.width, 1.0)
        values = np.asarray(values, dtype=np.float64)
        self.y_mean = float(values.mean()) if values.size else 0.0
        sd = float(values.std()) if values.size > 1 else 0.0
        self.y_std = sd if sd > 0 else 1.0

    @property
    def unit_bounds(self):
        return np.column_stack([np.zeros(self.lo.size), (self.width > 0).astype(float)])

    def to_unit(self, X):
        return np.clip((np.asarray(X, dtype=np.float64) - self.lo) / self._safe_width, 0.0, 1.0)

    def from_unit(self, U):
        return np.clip(self.lo + np.asarray(U) * self.width, self.lo, self.bounds[:, 1])

    def transform(self, data):
        return Dataset(self.to_unit(data.points), (data.values - self.y_mean) / self.y_std,
                       self.unit_bounds)


class SurrogateModel:
    """A model-space GP that predicts in the objective's own units."""

    def __init__(self, gp, space):
        self.gp = gp
        self.space = space

    def predict_batch(self, X):
        mean, var = predict_batch(self.gp, self.space.to_unit(np.atleast_2d(X)))
        s = self.space
        return s.y_mean + s.y_std * mean, var * s.y_std**2


class RunResult:
    """A finished run. The final hyperparameter fit is computed on first use
    of ``final_theta``; it draws from the run's rng only after the trace is
    complete, so the trace does not depend on whether it is requested."""

    def __init__(self, trace, data, final_fit):
        self.trace = trace
        self.data = data  # D0 followed by every trace point
        self._final_fit = final_fit

    @cached_property
    def final_theta(self):
        """Model-space Hyperparams of the final surrogate."""
        return self._final_fit()

    def surrogate(self):
        space = ModelSpace(self.data.bounds, self.data.values)
        return SurrogateModel(fit_posterior(space.transform(self.data), self.final_theta), space)


class _Run:
    """Mutable bookkeeping shared by every strategy loop."""

    def __init__(self, kind, objective, T, init_data, config, rng):
        if T < 1:
            raise InvalidInputError("budget T must be >= 1")
        if len(init_data) == 0:
            raise InvalidInputError("initial design D0 must be non-empty")
        self.kind = StrategyKind(kind)
        self.objective = objective
        self.T = T
        self.d0 = init_data
        self.data = init_data
        self.config = config
        self.rng = rng
        self.trace = RunTrace(self.kind.value, objective.name, 0, T)
        self.last_theta = {}

    def random_point(self):
        lo, hi = self.objective.bounds[:, 0], self.objective.bounds[:, 1]
        return self.rng.uniform(lo, hi)

    def model(self):
        space = ModelSpace(self.objective.bounds, self.data.values)
        return space, space.transform(self.data)

    def estimate(self, model_data, consistent):
        cfg = self.config.estimator
        key = "consistent" if consistent else "map"
        init = self.last_theta.get(key)
        if consistent:
            theta, _ = estimation.estimate_consistent(model_data, cfg, self.rng, init)
        else:
            theta = estimation.estimate_map(model_data, cfg, self.rng, init)
        self.last_theta[key] = theta
        return theta

    def propose(self, consistent):
        """Estimate theta on D_{t-1}, condition the GP on D_{t-1}, maximise UCB."""
        space, model_data = self.model()
        theta = self.estimate(model_data, consistent)
        gp = fit_posterior(model_data, theta)
        u, _ = maximize(gp, space.unit_bounds, self.config.acquisition, self.rng)
        return space.from_unit(u), theta

    def evaluate(self, t, x):
        try:
            y = self.objective.observe(x, self.rng)
        except Exception as exc:  # noqa: BLE001 - re-raised with the iteration index
            raise ObjectiveError(str(exc), t) from exc
        self.data = self.data.append(x, y)
        return y

    def record(self, t, x, y, started, **extra):
        self.trace.append(t, x, y, wall_ms=(time.perf_counter() - started) * 1e3, **extra)

    def result(self, consistent_final):
        def final_fit():
            _, model_data = self.model()
            return self.estimate(model_data, consistent_final)

        return RunResult(self.trace, self.data, final_fit)


def _uhe_loop(run, consistent):
    """Paired-EXP3 loop; ``consistent`` picks the pseudo-label estimator."""
    state = Exp3State(exp3_gamma(run.T))
    arm = None
    for t in range(1, run.T + 1):
        started = time.perf_counter()
        odd = t % 2 == 1
        if odd:
            arm = state.draw_arm(run.rng)
        theta = None
        if arm == 0 and odd:
            x = run.random_point()
        else:
            x, theta = run.propose(consistent)
        y = run.evaluate(t, x)
        scaled = None
        if not odd:
            raw = max(y, run.trace.records[-1].y)
            scaled = scale_reward(raw, run.d0.values)
            state.update(RewardRecord(raw, scaled, arm))
        run.record(t, x, y, started, arm=arm + 1, scaled_reward=scaled, theta_hat=theta)
    return run.result(consistent)


def run_uhe(objective, T, init_data, config, rng):
    return _uhe_loop(_Run(StrategyKind.UHE, objective, T, init_data, config, rng), True)


def run_random_plus_exp3(objective, T, init_data, config, rng):
    run = _Run(StrategyKind.RANDOM_PLUS_EXP3, objective, T, init_data, config, rng)
    return _uhe_loop(run, False)


def run_rdexp3(objective, T, init_data, config, rng):
    """Deterministic alternation: odd t random, even t acquisition (consistent loss)."""
    run = _Run(StrategyKind.RDEXP3, objective, T, init_data, config, rng)
    for t in range(1, T + 1):
        started = time.perf_counter()
        theta = None
        if t % 2 == 1:
            x, arm = run.random_point(), RANDOM_ARM
        else:
            (x, theta), arm = run.propose(True), ACQUISITION_ARM
        y = run.evaluate(t, x)
        run.record(t, x, y, started, arm=arm, theta_hat=theta)
    return run.result(True)


def run_map_bo(objective, T, init_data, config, rng):
    run = _Run(StrategyKind.MAP_BO, objective, T, init_data, config, rng)
    for t in range(1, T + 1):
        started = time.perf_counter()
        x, theta = run.propose(False)
        y = run.evaluate(t, x)
        run.record(t, x, y, started, theta_hat=theta)
    return run.result(False)


def run_random(objective, T, init_data, config, rng):
    run = _Run(StrategyKind.RANDOM, objective, T, init_data, config, rng)
    for t in range(1, T + 1):
        started = time.perf_counter()
        x = run.random_point()
        y = run.evaluate(t, x)
        run.record(t, x, y, started)
    return run.result(False)


def run_portfolio(objective, T, init_data, config, rng):
    """Unpaired EXP3 choosing between a random sample and GP-UCB each iteration."""
    run = _Run(StrategyKind.PORTFOLIO, objective, T, init_data, config, rng)
    bandit = Exp3(2, exp3_gamma(T))
    for t in range(1, T + 1):
        started = time.perf_counter()
        arm = bandit.draw(run.rng)
        theta = None
        if arm == 0:
            x = run.random_point()
        else:
            x, theta = run.propose(False)
        y = run.evaluate(t, x)
        scaled = scale_reward(y, run.d0.values)
        bandit.update(scaled)
        run.record(t, x, y, started, arm=arm + 1, scaled_reward=scaled, theta_hat=theta)
    return run.result(False)


def agp_shrink_factor(t, t0, dim, exponent=0.9):
    """Lengthscale multiplier (t0 / t)^(exponent / d) for t > t0, else 1."""
    if t <= t0:
        return 1.0
    return (t0 / t) ** (exponent / dim)


def run_a_gp_ucb(objective, T, init_data, config, rng):
    """MAP estimate with lengthscales shrunk on the t^0.9 reference schedule.

    Simplified reading of adaptive GP-UCB: the shrunken lengthscales are also
    capped by the previous iteration's, so they never grow back.
    """
    run = _Run(StrategyKind.A_GP_UCB, objective, T, init_data, config, rng)
    t0 = len(init_data)
    prev_ls = None
    for t in range(1, T + 1):
        started = time.perf_counter()
        space, model_data = run.model()
        theta = run.estimate(model_data, False)
        ls = theta.lengthscales * agp_shrink_factor(t, t0, objective.dim, config.reference_exponent)
        if prev_ls is not None:
            ls = np.minimum(ls, prev_ls)
        prev_ls = ls
        theta = theta.with_lengthscales(ls)
        gp = fit_posterior(model_data, theta)
        u, _ = maximize(gp, space.unit_bounds, config.acquisition, run.rng)
        x = space.from_unit(u)
        y = run.evaluate(t, x)
        run.record(t, x, y, started, theta_hat=theta)
    return run.result(False)


def wang_defreitas_scale(model_data, theta, u, kappa, depth=10):
    """Largest s in {1, 1/2, ..., 2^-depth} with sigma(u) >= kappa under scaled lengthscales.

    Falls back to the smallest grid value when none qualifies.
    """
    s = 1.0
    for _ in range(depth + 1):
        gp = fit_posterior(model_data, theta.with_lengthscales(theta.lengthscales * s))
        _, var = predict_batch(gp, np.reshape(u, (1, -1)))
        if math.sqrt(var[0]) >= kappa:
            return s
        s *= 0.5
    return s * 2.0


def run_wang_defreitas(objective, T, init_data, config, rng):
    run = _Run(StrategyKind.WANG_DEFREITAS, objective, T, init_data, config, rng)
    for t in range(1, T + 1):
        started = time.perf_counter()
        space, model_data = run.model()
        theta = run.estimate(model_data, False)
        gp = fit_posterior(model_data, theta)
        u, _ = maximize(gp, space.unit_bounds, config.acquisition, run.rng)
        _, var = predict_batch(gp, u.reshape(1, -1))
        if math.sqrt(var[0]) < config.kappa:
            s = wang_defreitas_scale(model_data, theta, u, config.kappa, config.scaling_grid_depth)
            theta = theta.with_lengthscales(theta.lengthscales * s)
            gp = fit_posterior(model_data, theta)
            u, _ = maximize(gp, space.unit_bounds, config.acquisition, run.rng)
        x = space.from_unit(u)
        y = run.evaluate(t, x)
        run.record(t, x, y, started, theta_hat=theta)
    return run.result(False)


RUNNERS = {
    StrategyKind.UHE: run_uhe,
    StrategyKind.MAP_BO: run_map_bo,
    StrategyKind.RANDOM: run_random,
    StrategyKind.PORTFOLIO: run_portfolio,
    StrategyKind.A_GP_UCB: run_a_gp_ucb,
    StrategyKind.WANG_DEFREITAS: run_wang_defreitas,
    StrategyKind.RDEXP3: run_rdexp3,
    StrategyKind.RANDOM_PLUS_EXP3: run_random_plus_exp3,
}


def initial_design(objective, n, rng):
    """``n`` uniform points, observed with the objective's noise."""
    lo, hi = objective.bounds[:, 0], objective.bounds[:, 1]
    X = rng.uniform(lo, hi, size=(n, objective.dim))
    y = np.array([objective.observe(x, rng) for x in X])
    return Dataset(X, y, objective.bounds)


def run_strategy(kind, objective, T, init_data, config, rng):
    return RUNNERS[StrategyKind(kind)](objective, T, init_data, config, rng)
