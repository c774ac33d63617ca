"""Experiment orchestration: run (strategy x seed) cells, score them, persist them.

Outputs, written into ``out_dir``:

``traces.csv``
    one row per iteration of every run. The first line is a
    ``# config_hash: <hex>`` comment; the header follows.
``summary.json``
    per-strategy mean and standard error of the final simple regret and of
    the surrogate MSE, plus mean regret curves.
"""

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .acquisition import AcquisitionConfig
from .benchmarks import make_objective, validate_objective_name
from .errors import ConfigError, InvalidInputError
from .estimation import EstimatorConfig, estimate_map, match_nearest, pseudo_loss_gap
from .gp import Dataset, Hyperparams
from .strategies import StrategyConfig, StrategyKind, initial_design, run_strategy
from .trace import RunRecord, RunTrace

log = logging.getLogger(__name__)

TRACES_FILE = "traces.csv"
SUMMARY_FILE = "summary.json"


@dataclass
class ExperimentConfig:
    objective: str = "deceptive"
    strategies: list = field(default_factory=lambda: ["UHE", "MAP_BO", "RANDOM"])
    budget: int = 100
    repeats: int = 20
    seed: int = 0
    init_points: int = None  # None -> 3 * dim
    mt_factor: float = 2.0
    ucb_multiplier: float = 1.96
    noise_std: float = None  # None -> 1% of the objective's value range
    mse_grid: int = 10_000  # 0 disables the surrogate MSE
    out_dir: str = "results"
    threads: int = 1
    record_timing: bool = False

    # fields that do not change results and so stay out of the hash
    _UNHASHED = ("out_dir", "threads")

    @classmethod
    def from_dict(cls, raw):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return dataclasses.asdict(self)

    def config_hash(self):
        payload = {k: v for k, v in self.to_dict().items() if k not in self._UNHASHED}
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def validate(self):
        validate_objective_name(self.objective)
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        for name in self.strategies:
            try:
                StrategyKind(name)
            except ValueError:
                known = [k.value for k in StrategyKind]
                raise ConfigError(f"unknown strategy {name!r}; known: {known}") from None
        if len(set(self.strategies)) != len(self.strategies):
            raise ConfigError("duplicate strategy names")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")
        if self.init_points is not None and self.init_points < 1:
            raise ConfigError("init_points must be >= 1")
        if self.mse_grid and self.mse_grid < 100:
            raise ConfigError("mse_grid must be 0 or >= 100")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        try:
            self.strategy_config()
        except InvalidInputError as exc:
            raise ConfigError(str(exc)) from exc

    def strategy_config(self):
        return StrategyConfig(
            estimator=EstimatorConfig(mt_factor=self.mt_factor),
            acquisition=AcquisitionConfig(ucb_multiplier=self.ucb_multiplier),
        )

    def seed_for(self, run_index):
        return self.seed + run_index


def simple_regret(trace, objective):
    """f(x*) minus the best noise-free value sampled so far, per iteration."""
    if objective.known_optimum is None:
        raise InvalidInputError(f"{objective.name} has no known optimum")
    f = objective.eval_batch(trace.points)
    return objective.known_optimum[1] - np.maximum.accumulate(f)


def mse_points(objective, grid_size):
    """Uniform grid for d <= 2, a seeded Latin hypercube otherwise."""
    if grid_size < 100:
        raise InvalidInputError("grid_size must be >= 100")
    lo, hi = objective.bounds[:, 0], objective.bounds[:, 1]
    d = objective.dim
    if d == 1:
        return np.linspace(lo[0], hi[0], grid_size).reshape(-1, 1)
    if d == 2:
        k = int(round(math.sqrt(grid_size)))
        g0, g1 = np.linspace(lo[0], hi[0], k), np.linspace(lo[1], hi[1], k)
        return np.array(np.meshgrid(g0, g1, indexing="ij")).reshape(2, -1).T
    sample = qmc.LatinHypercube(d=d, seed=0).random(grid_size)
    return qmc.scale(sample, lo, hi)


def surrogate_mse(model, objective, grid_size):
    """Mean squared error of the model's predictive mean against the noise-free objective."""
    X = mse_points(objective, grid_size)
    mean, _ = model.predict_batch(X)
    return float(np.mean((mean - objective.eval_batch(X)) ** 2))


# -- loss-gap diagnostic ---------------------------------------------------

def _biased_design(objective, t, rng, spread=0.03):
    """Unit-cube design alternating uniform draws with points jittered around
    the incumbent, mimicking a half-random / half-greedy sampler."""
    lo, hi = objective.bounds[:, 0], objective.bounds[:, 1]
    U = rng.random((t, objective.dim))
    f = objective.eval_batch(lo + U[:1] * (hi - lo))
    for i in range(1, t):
        if i % 2 == 1:
            best = U[int(np.argmax(f))]
            U[i] = np.clip(best + spread * rng.standard_normal(objective.dim), 0.0, 1.0)
        f = np.append(f, objective.eval(lo + U[i] * (hi - lo)))
    return U


def loss_gap_trend(objective, t_values=(50, 200), seeds=20, config=None, reference_size=400):
    """Per-point pseudo-label loss gap for each budget ``t`` and seed.

    Works in the unit cube with outputs standardised by fixed constants
    (independent of ``t``). Theta is held at the estimate fitted on
    ``reference_size`` i.i.d. noisy samples; each dataset holds ``t``
    observations, half of them clustered near the incumbent. The true labels
    are fresh noisy evaluations at the random points.

    Returns ``{t: array of gaps, one per seed}``.
    """
    config = config or EstimatorConfig()
    lo, hi = objective.bounds[:, 0], objective.bounds[:, 1]
    d = objective.dim
    unit = np.tile([0.0, 1.0], (d, 1))
    ref = objective.eval_batch(lo + np.random.default_rng(12345).random((10_000, d)) * (hi - lo))
    shift, scale = ref.mean(), ref.std()

    def observe(U, rng):
        return (np.array([objective.observe(lo + u * (hi - lo), rng) for u in U]) - shift) / scale

    rng = np.random.default_rng(2024)
    U = rng.random((reference_size, d))
    theta = estimate_map(Dataset(U, observe(U, rng), unit), config, rng)

    out = {}
    for t in t_values:
        gaps = []
        for seed in range(seeds):
            rng = np.random.default_rng([seed, t])
            U = _biased_design(objective, t, rng)
            data = Dataset(U, observe(U, rng), unit)
            pseudo = match_nearest(data, rng.random((config.n_pseudo(t), d)))
            gaps.append(pseudo_loss_gap(pseudo, observe(pseudo.random_points, rng), theta, config))
        out[t] = np.array(gaps)
    return out


# -- CSV ------------------------------------------------------------------

def csv_columns(dim):
    return (
        ["run_id", "strategy", "objective", "seed", "t"]
        + [f"x{i}" for i in range(dim)]
        + ["y", "best_so_far", "arm", "scaled_reward"]
        + [f"ls{i}" for i in range(dim)]
        + ["sigf2", "noise2", "wall_ms"]
    )


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_traces_csv(path, traces, config_hash, dim):
    buf = io.StringIO()
    buf.write(f"# config_hash: {config_hash}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_columns(dim))
    for run_id, trace in traces:
        for r in trace.records:
            th = r.theta_hat
            ls = list(th.lengthscales) if th is not None else [None] * dim
            row = [run_id, trace.strategy, trace.objective, trace.seed, r.t]
            row += [float(v) for v in r.x]
            row += [r.y, r.best_so_far, r.arm, r.scaled_reward]
            row += ls
            row += [th.signal_variance if th else None, th.noise_variance if th else None, r.wall_ms]
            writer.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def _opt(cast, s):
    return None if s == "" else cast(s)


def read_traces_csv(path):
    """Parse a traces file back into ``(config_hash, [(run_id, RunTrace), ...])``."""
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# config_hash:"):
            raise InvalidInputError(f"{path} lacks the config_hash comment line")
        config_hash = first.split(":", 1)[1].strip()
        reader = csv.DictReader(fh)
        dim = sum(1 for c in reader.fieldnames if c.startswith("x") and c[1:].isdigit())
        traces, order = {}, []
        for row in reader:
            key = (int(row["run_id"]), row["strategy"])
            if key not in traces:
                traces[key] = RunTrace(row["strategy"], row["objective"], int(row["seed"]), 0,
                                       config_hash)
                order.append(key)
            theta = None
            if row["sigf2"] != "":
                theta = Hyperparams([float(row[f"ls{i}"]) for i in range(dim)],
                                    float(row["sigf2"]), float(row["noise2"]))
            traces[key].records.append(RunRecord(
                int(row["t"]),
                np.array([float(row[f"x{i}"]) for i in range(dim)]),
                float(row["y"]),
                float(row["best_so_far"]),
                _opt(int, row["arm"]),
                _opt(float, row["scaled_reward"]),
                theta,
                _opt(float, row["wall_ms"]),
            ))
    out = []
    for key in order:
        trace = traces[key]
        trace.T = len(trace.records)
        out.append((key[0], trace))
    return config_hash, out


def read_config_hash(path):
    with open(path) as fh:
        first = fh.readline()
    return first.split(":", 1)[1].strip() if first.startswith("# config_hash:") else None


# -- orchestration ---------------------------------------------------------

@dataclass
class CellResult:
    strategy: str
    run_index: int
    trace: RunTrace
    regret: np.ndarray
    mse: float
    wall_s: float


def run_cell(config, strategy, run_index):
    """One (strategy, seed) run; pure function of its arguments."""
    seed = config.seed_for(run_index)
    objective = make_objective(config.objective, config.noise_std)
    n_init = config.init_points or 3 * objective.dim
    d0 = initial_design(objective, n_init, np.random.default_rng([seed, 0]))
    result = run_strategy(strategy, objective, config.budget, d0, config.strategy_config(),
                          np.random.default_rng([seed, 1]))
    trace = result.trace
    trace.seed = seed
    trace.config_hash = config.config_hash()
    wall_s = sum(r.wall_ms for r in trace.records) / 1e3
    if not config.record_timing:
        for r in trace.records:
            r.wall_ms = None
    regret = simple_regret(trace, objective) if objective.known_optimum is not None else None
    mse = surrogate_mse(result.surrogate(), objective, config.mse_grid) if config.mse_grid else None
    return CellResult(strategy, run_index, trace, regret, mse, wall_s)


def _run_cell_args(args):
    return run_cell(*args)


def _mean_se(values):
    v = np.asarray([x for x in values if x is not None], dtype=np.float64)
    if v.size == 0:
        return None, None
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else None
    return float(v.mean()), se


def summarize(config, cells):
    out = {}
    for name in config.strategies:
        mine = [c for c in cells if c.strategy == name]
        entry = {"runs": len(mine)}
        if mine and mine[0].regret is not None:
            curves = np.array([c.regret for c in mine])
            entry["final_regret_mean"], entry["final_regret_se"] = _mean_se(curves[:, -1])
            entry["regret_curve_mean"] = curves.mean(axis=0).tolist()
            entry["regret_curve_se"] = (
                (curves.std(axis=0, ddof=1) / math.sqrt(len(mine))).tolist()
                if len(mine) > 1 else None
            )
        entry["mse_mean"], entry["mse_se"] = _mean_se([c.mse for c in mine])
        entry["mean_wall_s"] = float(np.mean([c.wall_s for c in mine])) if mine else None
        out[name] = entry
    return out


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    cells: list
    summary: dict
    failures: list
    traces_path: str
    summary_path: str

    @property
    def ok(self):
        return not self.failures


def run_experiment(config):
    config.validate()
    os.makedirs(config.out_dir, exist_ok=True)
    traces_path = os.path.join(config.out_dir, TRACES_FILE)
    summary_path = os.path.join(config.out_dir, SUMMARY_FILE)
    chash = config.config_hash()
    if os.path.exists(traces_path):
        existing = read_config_hash(traces_path)
        if existing != chash:
            raise ConfigError(
                f"{traces_path} was produced by config {existing}, not {chash}; "
                "use another out_dir"
            )

    jobs = [(config, s, i) for s in config.strategies for i in range(config.repeats)]
    cells, failures = [], []
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            futures = [pool.submit(_run_cell_args, job) for job in jobs]
            outcomes = []
            for job, fut in zip(jobs, futures):
                try:
                    outcomes.append(fut.result())
                except Exception as exc:  # noqa: BLE001 - reported per cell
                    outcomes.append(exc)
    else:
        outcomes = []
        for job in jobs:
            try:
                outcomes.append(run_cell(*job))
            except Exception as exc:  # noqa: BLE001 - reported per cell
                outcomes.append(exc)
    for (_, strategy, idx), outcome in zip(jobs, outcomes):
        if isinstance(outcome, Exception):
            log.error("cell %s/%d failed: %s", strategy, idx, outcome)
            failures.append({"strategy": strategy, "run_index": idx, "error": str(outcome)})
        else:
            log.info("cell %s/%d done in %.1fs", strategy, idx, outcome.wall_s)
            cells.append(outcome)

    dim = make_objective(config.objective, 0.0).dim
    write_traces_csv(traces_path, [(c.run_index, c.trace) for c in cells], chash, dim)
    summary = {
        "config_hash": chash,
        "config": config.to_dict(),
        "strategies": summarize(config, cells),
        "failures": failures,
    }
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ExperimentResult(config, cells, summary, failures, traces_path, summary_path)
