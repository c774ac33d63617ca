"""Per-iteration run records shared by the strategies and the harness."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError


@dataclass
class RunRecord:
    t: int
    x: np.ndarray
    y: float
    best_so_far: float
    arm: int = None  # 1 = random sample, 2 = acquisition
    scaled_reward: float = None
    theta_hat: object = None  # Hyperparams in model space, or None
    wall_ms: float = None

    def __eq__(self, other):
        if not isinstance(other, RunRecord):
            return NotImplemented
        return (
            self.t == other.t
            and np.array_equal(self.x, other.x)
            and self.y == other.y
            and self.best_so_far == other.best_so_far
            and self.arm == other.arm
            and self.scaled_reward == other.scaled_reward
            and self.theta_hat == other.theta_hat
            and self.wall_ms == other.wall_ms
        )


@dataclass
class RunTrace:
    strategy: str
    objective: str
    seed: int
    T: int
    config_hash: str = ""
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def append(self, t, x, y, **extra):
        best = y if not self.records else max(self.records[-1].best_so_far, y)
        self.records.append(RunRecord(t, np.asarray(x, dtype=np.float64).copy(), float(y),
                                      float(best), **extra))

    @property
    def points(self):
        return np.array([r.x for r in self.records])

    @property
    def values(self):
        return np.array([r.y for r in self.records])

    @property
    def best_so_far(self):
        return np.array([r.best_so_far for r in self.records])

    def validate(self):
        ts = [r.t for r in self.records]
        if ts != list(range(1, len(ts) + 1)):
            raise InvalidInputError("iteration indices must run 1..T without gaps")
        if len(ts) and not np.array_equal(self.best_so_far, np.maximum.accumulate(self.values)):
            raise InvalidInputError("best_so_far is not the running max of y")
