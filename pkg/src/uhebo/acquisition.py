"""GP-UCB acquisition and a derivative-free maximiser over a box."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class AcquisitionConfig:
    ucb_multiplier: float = 1.96  # multiplies sigma, i.e. sqrt(beta_t)
    candidates: int = 2000
    refine_steps: int = 50
    initial_step: float = 0.05  # fraction of each side length

    def __post_init__(self):
        if self.ucb_multiplier < 0:
            raise InvalidInputError("ucb_multiplier must be non-negative")
        if self.candidates < 1 or self.refine_steps < 0 or self.initial_step <= 0:
            raise InvalidInputError("candidates, refine_steps and initial_step must be positive")


def ucb_batch(gp, X, cfg):
    mean, var = gp.predict_batch(X)
    return mean + cfg.ucb_multiplier * np.sqrt(var)


def ucb_value(gp, x, cfg):
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    return float(ucb_batch(gp, x, cfg)[0])


def maximize(gp, bounds, cfg, rng):
    """Best of ``cfg.candidates`` uniform draws, then coordinate ascent.

    Each refinement step tries +-step along every coordinate (projected onto
    the box), moves to the best improvement, and halves the step when nothing
    improves. Returns ``(x, value)``.
    """
    bounds = np.asarray(bounds, dtype=np.float64).reshape(-1, 2)
    lo, hi = bounds[:, 0], bounds[:, 1]
    if np.any(lo > hi):
        raise InvalidInputError("lower bound above upper bound")
    width = hi - lo
    d = lo.size
    if np.all(width == 0):
        return lo.copy(), ucb_value(gp, lo, cfg)

    cand = rng.uniform(lo, hi, size=(cfg.candidates, d))
    vals = ucb_batch(gp, cand, cfg)
    i = int(np.argmax(vals))
    x, best = cand[i].copy(), float(vals[i])

    moves = np.vstack([np.eye(d), -np.eye(d)]) * width
    moves = moves[np.any(moves != 0, axis=1)]
    step = cfg.initial_step
    for _ in range(cfg.refine_steps):
        trial = np.clip(x + step * moves, lo, hi)
        tv = ucb_batch(gp, trial, cfg)
        j = int(np.argmax(tv))
        if tv[j] > best:
            x, best = trial[j], float(tv[j])
        else:
            step *= 0.5
    return x, best
