"""Harness tests: config parsing and validation, loop bookkeeping, rate
tuning, output format, CLI exit codes, and determinism."""

import subprocess
import sys

import numpy as np
import pytest

from firal.cli import (
    CSV_COLUMNS,
    RunConfig,
    active_learning_loop,
    emit_results,
    eta_grid,
    load_config,
    main,
    tune_eta,
)
from firal.data import save_dataset
from firal.fisher import labeled_shift, pool_hessian, shifted_fishers, whiten_factors
from firal.relax import relax_solve
from firal.sparsify import select_batch


def small_config(**overrides):
    base = dict(
        seed=3, selector="random", budget=6, rounds=2, classes=2, dim=3,
        pool_size=80, risk_points=1500, relax_iters=80,
    )
    base.update(overrides)
    return RunConfig(**base)


def make_factors(seed=0, m=10, budget=4):
    rng = np.random.default_rng(seed)
    theta = rng.normal(size=(1, 2))
    X = rng.normal(size=(m, 2)) * 2
    X0 = rng.normal(size=(3, 2)) * 2
    shift = labeled_shift(X0, theta, budget)
    relaxed = relax_solve(budget, pool_hessian(X, theta),
                          shifted_fishers(X, theta, shift), n_iter=150)
    return whiten_factors(relaxed.z, X, theta, shift)


class TestConfig:
    def test_key_value_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "seed = 7\nselector = entropy\nbudget=4\nrounds=2\n"
            "classes=2\ndim=3\npool_size=50\ntheory_mode = true\n"
            "# comment line\neta = 3.5\n"
        )
        cfg = load_config(path)
        assert cfg.seed == 7
        assert cfg.selector == "entropy"
        assert cfg.theory_mode is True
        assert cfg.eta == 3.5

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("not_a_key=1\n")
        with pytest.raises(ValueError):
            load_config(path)

    def test_validation(self):
        with pytest.raises(ValueError):
            RunConfig(budget=7, rounds=2).validate()
        with pytest.raises(ValueError):
            RunConfig(selector="magic").validate()
        with pytest.raises(ValueError):
            RunConfig(pool_size=5, budget=10, rounds=1).validate()


class TestLoop:
    def test_zero_rounds_single_record(self):
        recs = active_learning_loop(small_config(rounds=0, budget=0))
        assert len(recs) == 1
        assert recs[0].round == 0
        assert recs[0].selected == ()

    def test_labeled_set_sizes(self):
        cfg = small_config()
        recs = active_learning_loop(cfg)
        init = cfg.init_per_class * cfg.classes
        per_round = cfg.budget // cfg.rounds
        for k, rec in enumerate(recs):
            assert rec.n_labeled == init + k * per_round

    def test_deterministic_records(self):
        a = active_learning_loop(small_config())
        b = active_learning_loop(small_config())
        for ra, rb in zip(a, b):
            assert ra.selected == rb.selected
            assert ra.accuracy == rb.accuracy
            assert ra.excess_risk == rb.excess_risk

    def test_selectors_all_run(self):
        for selector in ("firal", "random", "kmeans", "entropy", "var_ratios"):
            recs = active_learning_loop(small_config(
                selector=selector, budget=4, rounds=1, pool_size=40,
                risk_points=500,
            ))
            assert len(recs) == 2
            assert len(recs[1].selected) == 4

    def test_greedy_fb_runs(self):
        recs = active_learning_loop(small_config(
            selector="greedy_fb", budget=2, rounds=1, pool_size=20,
            risk_points=500,
        ))
        assert len(recs[1].selected) == 2

    def test_random_accuracy_improves_on_average(self):
        # Monte-Carlo smoke check: across seeds, labeling more points does
        # not hurt pool accuracy on average.
        first, last = [], []
        for seed in range(20):
            recs = active_learning_loop(small_config(
                seed=seed, budget=10, rounds=1, pool_size=100, risk_points=200,
            ))
            first.append(recs[0].accuracy)
            last.append(recs[-1].accuracy)
        assert np.mean(last) >= np.mean(first) - 0.01

    def test_csv_dataset_loop(self, tmp_path):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(60, 2))
        y = 1 + (X[:, 0] > 0).astype(int)
        path = tmp_path / "pool.csv"
        save_dataset(path, X, y)
        recs = active_learning_loop(RunConfig(
            seed=0, data=str(path), selector="entropy", budget=4, rounds=2,
        ))
        assert len(recs) == 3
        assert np.isnan(recs[0].excess_risk)
        assert recs[-1].accuracy > 0.5


class TestTuneEta:
    def test_singleton_grid(self):
        factors = make_factors()
        assert tune_eta([2.5], factors, 3) == 2.5

    def test_duplicates_keep_first(self):
        factors = make_factors()
        assert tune_eta([2.5, 2.5, 2.5], factors, 3) == 2.5

    def test_winner_maximizes_min_eigenvalue(self):
        factors = make_factors(seed=1)
        grid = eta_grid(factors.d_tilde)
        best = tune_eta(grid, factors, 4)
        _, best_audit = select_batch(4, best, factors)
        for e in grid:
            _, audit = select_batch(4, e, factors)
            assert best_audit.min_eig_cum[-1] >= audit.min_eig_cum[-1] - 1e-12


class TestEmitResults:
    def test_column_order_and_precision(self, tmp_path):
        recs = active_learning_loop(small_config(budget=4, rounds=1,
                                                 risk_points=500))
        path = tmp_path / "out.csv"
        emit_results(recs, path)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) == 1 + len(recs)
        # Floats carry 17 significant digits; reparse must be exact.
        risk_col = CSV_COLUMNS.index("excess_risk")
        for rec, line in zip(recs, lines[1:]):
            assert float(line.split(",")[risk_col]) == rec.excess_risk


class TestCliCommands:
    def test_run_deterministic_output(self, tmp_path):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["run", "--seed", "5", "--selector", "random", "--budget", "4",
                "--rounds", "1", "--pool-size", "40", "--classes", "2",
                "--dim", "3"]
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_embed_command(self, tmp_path):
        rng = np.random.default_rng(6)
        X = np.vstack([rng.normal(size=(10, 3)), rng.normal(size=(10, 3)) + 40])
        src = tmp_path / "feat.csv"
        dst = tmp_path / "emb.csv"
        save_dataset(src, X, np.repeat([1, 2], 10))
        assert main(["embed", "--input", str(src), "--out", str(dst),
                     "--neighbors", "3", "--dim-out", "2"]) == 0
        from firal.data import load_dataset
        emb, y = load_dataset(dst)
        assert emb.shape == (20, 2)
        np.testing.assert_array_equal(y, np.repeat([1, 2], 10))

    def test_embed_command_without_labels(self, tmp_path):
        from firal.data import load_dataset, save_matrix
        X = np.random.default_rng(7).normal(size=(15, 4))
        src, dst = tmp_path / "m.csv", tmp_path / "e.csv"
        save_matrix(src, X)
        assert main(["embed", "--input", str(src), "--out", str(dst),
                     "--neighbors", "4", "--dim-out", "3"]) == 0
        emb, y = load_dataset(dst)
        assert emb.shape == (15, 3)
        assert y is None

    def test_audit_command(self, capsys):
        code = main(["audit", "--classes", "2", "--dim", "2",
                     "--pool-size", "25", "--budget", "40", "--seed", "1"])
        out = capsys.readouterr().out
        assert code == 0
        assert "guarantees hold" in out

    def test_config_error_exit_code(self):
        assert main(["run", "--budget", "7", "--rounds", "2",
                     "--pool-size", "30"]) == 2

    def test_missing_file_exit_code(self):
        assert main(["run", "--config", "/nonexistent/x.cfg"]) == 2

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "firal", "run", "--seed", "1",
             "--selector", "random", "--budget", "2", "--rounds", "1",
             "--pool-size", "30", "--classes", "2", "--dim", "2"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "round=1" in proc.stdout
