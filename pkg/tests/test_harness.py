import json
import math
import os

import numpy as np
import pytest

from uhebo import cli
from uhebo.benchmarks import Objective, make_objective
from uhebo.errors import ConfigError, InvalidInputError
from uhebo.gp import Dataset, Hyperparams, fit_posterior
from uhebo.harness import (
    ExperimentConfig,
    csv_columns,
    loss_gap_trend,
    mse_points,
    read_traces_csv,
    run_experiment,
    simple_regret,
    surrogate_mse,
    write_traces_csv,
)
from uhebo.trace import RunTrace


def small_config(tmp_path, **kw):
    base = dict(objective="branin", strategies=["RANDOM", "MAP_BO"], budget=4, repeats=2,
                mse_grid=100, out_dir=str(tmp_path / "out"))
    base.update(kw)
    return ExperimentConfig(**base)


class TestSimpleRegret:
    def test_zero_after_optimum(self):
        obj = make_objective("branin", 0.0)
        tr = RunTrace("X", "branin", 0, 3)
        tr.append(1, [0.0, 0.0], 0.0)
        tr.append(2, [math.pi, 2.275], 0.0)
        tr.append(3, [5.0, 5.0], 0.0)
        reg = simple_regret(tr, obj)
        assert reg[0] > 0
        assert reg[1] == pytest.approx(0.0, abs=1e-12) and reg[2] == reg[1]

    def test_uses_noise_free_values(self):
        obj = make_objective("h1", 0.0)
        tr = RunTrace("X", "h1", 0, 1)
        tr.append(1, [0.0, 0.0], 1e9)  # a wild noisy observation must not matter
        assert simple_regret(tr, obj)[0] == pytest.approx(obj.known_optimum[1] - obj.eval([0, 0]))

    def test_non_increasing(self):
        obj = make_objective("hartmann3", 0.0)
        rng = np.random.default_rng(0)
        tr = RunTrace("X", "hartmann3", 0, 50)
        for t in range(1, 51):
            tr.append(t, rng.random(3), rng.standard_normal())
        reg = simple_regret(tr, obj)
        assert np.all(np.diff(reg) <= 0) and np.all(reg >= 0)

    def test_needs_optimum(self):
        obj = Objective("anon", [[0.0, 1.0]], lambda X: X[:, 0])
        tr = RunTrace("X", "anon", 0, 1)
        tr.append(1, [0.5], 0.5)
        with pytest.raises(InvalidInputError):
            simple_regret(tr, obj)


class TestSurrogateMse:
    def test_constant_function(self):
        obj = Objective("const", [[0.0, 1.0], [0.0, 1.0]], lambda X: np.full(len(X), 3.0))
        g = np.linspace(0, 1, 8)
        X = np.array(np.meshgrid(g, g)).reshape(2, -1).T
        data = Dataset(X, np.full(len(X), 3.0), obj.bounds)
        gp = fit_posterior(data, Hyperparams([5.0, 5.0], 9.0, 1e-8))
        assert surrogate_mse(gp, obj, 400) < 1e-6

    def test_empty_gp_on_zero_function(self):
        obj = Objective("zero", [[-1.0, 1.0]], lambda X: np.zeros(len(X)))
        gp = fit_posterior(Dataset.empty(obj.bounds), Hyperparams([0.3], 1.0, 0.1))
        assert surrogate_mse(gp, obj, 100) == 0.0

    def test_non_negative_and_grid_checked(self):
        obj = make_objective("hartmann3", 0.0)
        gp = fit_posterior(Dataset.empty(obj.bounds), Hyperparams([0.3] * 3, 1.0, 0.1))
        assert surrogate_mse(gp, obj, 200) >= 0
        with pytest.raises(InvalidInputError):
            surrogate_mse(gp, obj, 99)

    def test_points_layout(self):
        assert mse_points(make_objective("branin", 0.0), 10_000).shape == (10_000, 2)
        P = mse_points(make_objective("hartmann3", 0.0), 500)
        assert P.shape == (500, 3)
        # Latin hypercube: one point per stratum along every axis
        for j in range(3):
            assert len(set((P[:, j] * 500).astype(int))) == 500
        np.testing.assert_array_equal(P, mse_points(make_objective("hartmann3", 0.0), 500))


class TestConfig:
    def test_unknown_names_rejected_before_running(self, tmp_path):
        with pytest.raises(ConfigError):
            run_experiment(small_config(tmp_path, objective="nope"))
        with pytest.raises(ConfigError):
            run_experiment(small_config(tmp_path, strategies=["RANDOM", "MCMC"]))
        assert not os.path.exists(tmp_path / "out")

    def test_validation(self, tmp_path):
        for bad in (dict(repeats=0), dict(budget=0), dict(mse_grid=50), dict(threads=0),
                    dict(mt_factor=0.5), dict(strategies=[])):
            with pytest.raises(ConfigError):
                small_config(tmp_path, **bad).validate()

    def test_unknown_field(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"objective": "h1", "bogus": 1})

    def test_hash_ignores_output_location(self, tmp_path):
        a = small_config(tmp_path)
        b = small_config(tmp_path, out_dir="elsewhere", threads=4)
        c = small_config(tmp_path, budget=5)
        assert a.config_hash() == b.config_hash() != c.config_hash()

    def test_seed_fan_out(self):
        cfg = ExperimentConfig(seed=10)
        assert [cfg.seed_for(i) for i in range(3)] == [10, 11, 12]


class TestRunExperiment:
    def test_outputs(self, tmp_path):
        cfg = small_config(tmp_path, repeats=1)
        res = run_experiment(cfg)
        assert res.ok
        with open(res.traces_path) as fh:
            first, header = fh.readline(), fh.readline().strip()
        assert first == f"# config_hash: {cfg.config_hash()}\n"
        assert header.split(",") == csv_columns(2)
        assert header == ("run_id,strategy,objective,seed,t,x0,x1,y,best_so_far,arm,"
                          "scaled_reward,ls0,ls1,sigf2,noise2,wall_ms")
        _, traces = read_traces_csv(res.traces_path)
        assert len(traces) == 2
        summary = json.load(open(res.summary_path))
        assert summary["config_hash"] == cfg.config_hash()
        assert set(summary["strategies"]) == {"RANDOM", "MAP_BO"}
        assert summary["strategies"]["RANDOM"]["final_regret_se"] is None  # single run

    def test_rerun_is_byte_identical(self, tmp_path):
        a = run_experiment(small_config(tmp_path, strategies=["UHE"], out_dir=str(tmp_path / "a")))
        b = run_experiment(small_config(tmp_path, strategies=["UHE"], out_dir=str(tmp_path / "b")))
        assert open(a.traces_path, "rb").read() == open(b.traces_path, "rb").read()

    def test_round_trip(self, tmp_path):
        res = run_experiment(small_config(tmp_path, strategies=["UHE", "RANDOM"]))
        chash, parsed = read_traces_csv(res.traces_path)
        assert chash == res.config.config_hash()
        original = [(c.run_index, c.trace) for c in res.cells]
        assert len(parsed) == len(original)
        for (i, a), (j, b) in zip(original, parsed):
            assert i == j
            assert (a.strategy, a.objective, a.seed, a.T, a.config_hash) == (
                b.strategy, b.objective, b.seed, b.T, b.config_hash)
            assert a.records == b.records

    def test_round_trip_with_timing(self, tmp_path):
        path = tmp_path / "t.csv"
        tr = RunTrace("MAP_BO", "h1", 3, 2, "abc")
        tr.append(1, [0.1, -3.2], 0.123456789012345678, arm=2, scaled_reward=0.25,
                  theta_hat=Hyperparams([0.1, 2.0], 1.5, 1e-7), wall_ms=12.5)
        tr.append(2, [1e-300, 25.0], -1.0 / 3.0, wall_ms=0.001)
        write_traces_csv(path, [(7, tr)], "abc", 2)
        chash, [(run_id, back)] = read_traces_csv(path)
        assert (chash, run_id) == ("abc", 7)
        assert back.records == tr.records

    def test_summary_standard_error_matches_csv(self, tmp_path):
        cfg = small_config(tmp_path, repeats=3)
        res = run_experiment(cfg)
        summary = json.load(open(res.summary_path))
        obj = make_objective("branin", 0.0)
        _, traces = read_traces_csv(res.traces_path)
        for name in cfg.strategies:
            finals = np.array([simple_regret(t, obj)[-1] for _, t in traces if t.strategy == name])
            entry = summary["strategies"][name]
            assert entry["final_regret_mean"] == pytest.approx(finals.mean(), rel=1e-12)
            assert entry["final_regret_se"] == pytest.approx(finals.std(ddof=1) / math.sqrt(3),
                                                             rel=1e-12)
            assert len(entry["regret_curve_mean"]) == cfg.budget

    def test_refuses_mismatched_hash(self, tmp_path):
        run_experiment(small_config(tmp_path, repeats=1))
        with pytest.raises(ConfigError):
            run_experiment(small_config(tmp_path, repeats=1, budget=3))
        # same config may be rerun into the same directory
        assert run_experiment(small_config(tmp_path, repeats=1)).ok

    def test_parallel_matches_serial(self, tmp_path):
        a = run_experiment(small_config(tmp_path, out_dir=str(tmp_path / "s")))
        b = run_experiment(small_config(tmp_path, out_dir=str(tmp_path / "p"), threads=2))
        assert open(a.traces_path, "rb").read() == open(b.traces_path, "rb").read()

    def test_timing_column_opt_in(self, tmp_path):
        res = run_experiment(small_config(tmp_path, repeats=1, record_timing=True,
                                          strategies=["RANDOM"]))
        _, [(_, tr)] = read_traces_csv(res.traces_path)
        assert all(r.wall_ms is not None and r.wall_ms >= 0 for r in tr.records)


class TestCli:
    def test_run_with_overrides(self, tmp_path, capsys):
        cfg = tmp_path / "exp.json"
        cfg.write_text(json.dumps({"objective": "h1", "strategies": ["MAP_BO"], "budget": 10}))
        out = tmp_path / "o"
        code = cli.main(["run", "--config", str(cfg), "--strategy", "RANDOM", "--budget", "3",
                         "--repeats", "2", "--seed", "5", "--init-points", "4",
                         "--mt-factor", "3", "--ucb-mult", "2.5", "--noise-std", "0",
                         "--mse-grid", "100", "--out-dir", str(out), "--threads", "1"])
        assert code == 0
        summary = json.load(open(out / "summary.json"))
        c = summary["config"]
        assert c["strategies"] == ["RANDOM"] and c["budget"] == 3 and c["seed"] == 5
        assert c["init_points"] == 4 and c["mt_factor"] == 3.0 and c["ucb_multiplier"] == 2.5
        assert c["noise_std"] == 0.0 and c["objective"] == "h1"
        assert "RANDOM" in capsys.readouterr().out

    def test_config_error_exit_code(self, tmp_path):
        assert cli.main(["run", "--objective", "nope", "--out-dir", str(tmp_path)]) == 2

    def test_failed_cell_exit_code(self, tmp_path, monkeypatch):
        from uhebo import harness

        def boom(config, strategy, run_index):
            raise RuntimeError("cell exploded")

        monkeypatch.setattr(harness, "run_cell", boom)
        code = cli.main(["run", "--objective", "h1", "--strategy", "RANDOM", "--budget", "2",
                         "--repeats", "1", "--out-dir", str(tmp_path / "f")])
        assert code == 1
        summary = json.load(open(tmp_path / "f" / "summary.json"))
        assert summary["failures"][0]["error"] == "cell exploded"


def test_loss_gap_shape():
    gaps = loss_gap_trend(make_objective("branin"), t_values=(10, 20), seeds=3, reference_size=50)
    assert set(gaps) == {10, 20}
    assert all(g.shape == (3,) and np.all(g >= 0) for g in gaps.values())
