"""EXP3 exponential-weight bandits.

``Exp3`` is the textbook M-arm algorithm (one draw, one reward per round).
``Exp3State`` is the paired two-round variant used by the BO loop: an arm
drawn on an odd iteration governs that iteration and the next one, and the
single reward arrives after the even iteration.

Arm indices are 0-based here; the strategies translate them to labels.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, ProtocolError

ODD = "odd"
EVEN = "even"


def exp3_gamma(T):
    """Mixing rate sqrt(4 ln 2 / ((e - 1) T)) for horizon T, clamped to 1."""
    if T < 1:
        raise InvalidInputError(f"horizon must be >= 1, got {T}")
    return min(1.0, math.sqrt(4.0 * math.log(2.0) / ((math.e - 1.0) * T)))


def tuned_gamma(n_arms, g):
    """min(1, sqrt(M ln M / ((e - 1) g))), the rate behind the 2.63 sqrt(g M ln M) bound."""
    if n_arms < 2:
        return 1.0
    return min(1.0, math.sqrt(n_arms * math.log(n_arms) / ((math.e - 1.0) * g)))


def scale_reward(raw, d0_values):
    """Min-max scale ``raw`` by the initial design values, clipped to [0, 1]."""
    d0 = np.asarray(d0_values, dtype=np.float64).reshape(-1)
    if d0.size == 0:
        raise InvalidInputError("need at least one initial value to scale rewards")
    lo, hi = d0.min(), d0.max()
    if hi == lo:
        return 0.5
    return float(np.clip((raw - lo) / (hi - lo), 0.0, 1.0))


def _mixed_probs(log_weights, gamma):
    w = np.exp(log_weights - log_weights.max())
    m = log_weights.size
    p = (1.0 - gamma) * w / w.sum() + gamma / m
    return p / p.sum()


def _sample(p, rng):
    # inverse-CDF draw on a single uniform keeps the rng stream easy to rig
    u = rng.random()
    return int(min(np.searchsorted(np.cumsum(p), u, side="right"), p.size - 1))


@dataclass(frozen=True)
class RewardRecord:
    raw_reward: float
    scaled_reward: float
    arm: int

    def __post_init__(self):
        if not 0.0 <= self.scaled_reward <= 1.0:
            raise InvalidInputError(f"scaled reward {self.scaled_reward} outside [0, 1]")


@dataclass
class Exp3State:
    """Paired EXP3 state: ``draw_arm`` on odd rounds, ``update`` after even ones."""

    gamma: float
    n_arms: int = 2
    log_weights: np.ndarray = field(default=None)
    last_probs: np.ndarray = field(default=None)
    last_arm: int = None
    round_parity: str = ODD

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise InvalidInputError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.log_weights is None:
            self.log_weights = np.zeros(self.n_arms)
        if self.last_probs is None:
            self.last_probs = np.full(self.n_arms, 1.0 / self.n_arms)

    @property
    def weights(self):
        return np.exp(self.log_weights)

    def probabilities(self):
        return _mixed_probs(self.log_weights, self.gamma)

    def draw_arm(self, rng):
        if self.round_parity != ODD:
            raise ProtocolError("draw_arm called twice without an update in between")
        self.last_probs = self.probabilities()
        self.last_arm = _sample(self.last_probs, rng)
        self.round_parity = EVEN
        return self.last_arm

    def update(self, reward):
        if self.round_parity != EVEN:
            raise ProtocolError("update called without a preceding draw_arm")
        if reward.arm != self.last_arm:
            raise ProtocolError(f"reward for arm {reward.arm} but arm {self.last_arm} was drawn")
        estimate = reward.scaled_reward / self.last_probs[reward.arm]
        # the chosen arm covers two rounds, hence the 1/2
        self.log_weights[reward.arm] += self.gamma * estimate / 2.0
        self.round_parity = ODD


def draw_arm(state, rng):
    return state.draw_arm(rng)


def update(state, reward):
    state.update(reward)


@dataclass
class Exp3:
    """Standard unpaired EXP3 over ``n_arms`` arms."""

    n_arms: int
    gamma: float
    log_weights: np.ndarray = field(default=None)
    last_probs: np.ndarray = field(default=None)
    last_arm: int = None

    def __post_init__(self):
        if self.n_arms < 1:
            raise InvalidInputError("need at least one arm")
        if not 0.0 < self.gamma <= 1.0:
            raise InvalidInputError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.log_weights is None:
            self.log_weights = np.zeros(self.n_arms)

    @property
    def weights(self):
        return np.exp(self.log_weights)

    def probabilities(self):
        return _mixed_probs(self.log_weights, self.gamma)

    def draw(self, rng):
        self.last_probs = self.probabilities()
        self.last_arm = _sample(self.last_probs, rng)
        return self.last_arm

    def update(self, reward):
        if self.last_arm is None:
            raise ProtocolError("update before draw")
        if not 0.0 <= reward <= 1.0:
            raise InvalidInputError(f"reward {reward} outside [0, 1]")
        arm = self.last_arm
        self.log_weights[arm] += self.gamma * (reward / self.last_probs[arm]) / self.n_arms
        self.last_arm = None


@dataclass
class Exp3Trace:
    arms: np.ndarray
    rewards: np.ndarray
    probs: np.ndarray

    @property
    def cumulative_reward(self):
        return np.cumsum(self.rewards)


def exp3_generic(n_arms, reward_oracle, T, rng, gamma=None):
    """Run EXP3 for ``T`` rounds.

    ``reward_oracle(t)`` returns the full reward vector of round ``t``
    (1-based); the algorithm only looks at the entry of the arm it pulled.
    """
    if gamma is None:
        gamma = tuned_gamma(n_arms, T)
    bandit = Exp3(n_arms, gamma)
    arms = np.empty(T, dtype=int)
    rewards = np.empty(T)
    probs = np.empty((T, n_arms))
    for t in range(1, T + 1):
        r = np.asarray(reward_oracle(t), dtype=np.float64)
        if r.shape != (n_arms,) or np.any(r < 0) or np.any(r > 1):
            raise InvalidInputError(f"round {t}: rewards must be {n_arms} values in [0, 1]")
        arm = bandit.draw(rng)
        probs[t - 1] = bandit.last_probs
        bandit.update(r[arm])
        arms[t - 1] = arm
        rewards[t - 1] = r[arm]
    return Exp3Trace(arms, rewards, probs)
