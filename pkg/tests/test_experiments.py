"""Harness studies: sweeps, restarts, grid search, schedule tables, weight
counting, and byte-stable CSV output."""

from pathlib import Path

import numpy as np
import pytest

from nsanet.data import CsvSchema, SplitSpec, gen_xor, load_csv, split
from nsanet.experiments import (
    RESTARTS_HEADER,
    SWEEP_H_HEADER,
    equivalent_hidden_count,
    grid_search,
    kfold_indices,
    model_weight_count,
    parallel_map,
    restarts_rows,
    restarts_study,
    run_single,
    schedule_table,
    sweep_h,
    sweep_n,
    SweepNSeries,
    weight_count,
    write_csv,
    xor_test_set,
)
from nsanet.model import MlpModel
from nsanet.train import TrainConfig

FIXTURE = Path(__file__).parent / "fixtures" / "blobs3.csv"


@pytest.fixture(scope="module")
def xor_pair():
    train = gen_xor(2, 2, 300, seed=10)
    test = xor_test_set(2, 2, 10, n=300)
    return train, test


def quick_cfg(**kw):
    base = dict(batch_size=32, epochs=15, seed=100)
    base.update(kw)
    return TrainConfig(**base)


class TestRunSingle:
    def test_record_fields(self, xor_pair):
        train, test = xor_pair
        rec = run_single(train, test, h=8, config=quick_cfg(), seed=100)
        assert rec.seed == 100
        assert rec.node_count == 8
        assert rec.feature_ids == (0, 1)
        assert rec.loss >= 0.0
        assert rec.wall_time > 0.0


class TestSweepH:
    def test_single_cell_single_seed(self, xor_pair):
        train, test = xor_pair
        rows = sweep_h(train, test, [4], quick_cfg(), seeds=[100])
        assert len(rows) == 1
        assert rows[0][0] == 4 and rows[0][1] == "ok"

    def test_rows_per_width_and_csv_byte_stability(self, xor_pair, tmp_path):
        train, test = xor_pair
        rows1 = sweep_h(train, test, [2, 4], quick_cfg(), seeds=[100, 101])
        rows2 = sweep_h(train, test, [2, 4], quick_cfg(), seeds=[100, 101])
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(a, SWEEP_H_HEADER, rows1)
        write_csv(b, SWEEP_H_HEADER, rows2)
        assert a.read_bytes() == b.read_bytes()

    def test_threads_do_not_change_results(self, xor_pair):
        train, test = xor_pair
        seq = sweep_h(train, test, [2, 4, 8], quick_cfg(), seeds=[100], threads=1)
        par = sweep_h(train, test, [2, 4, 8], quick_cfg(), seeds=[100], threads=3)
        assert seq == par

    def test_wider_nets_reach_lower_loss_on_hard_xor(self):
        """Best-of-restarts loss drops with width and a 64-node net clears
        the 0.95 test-AUC bar on 3-of-3 XOR."""
        train = gen_xor(3, 3, 1000, seed=0)
        test = xor_test_set(3, 3, 0)
        cfg = TrainConfig(batch_size=64, epochs=150, seed=0)
        rows = sweep_h(train, test, [4, 64], cfg, seeds=list(range(5)), threads=4)
        by_h = {r[0]: r for r in rows}
        assert by_h[64][2] < by_h[4][2]
        assert by_h[64][4] >= 0.95


class TestRestarts:
    def test_single_restart(self, xor_pair):
        train, test = xor_pair
        records = restarts_study(train, test, h=4, config=quick_cfg(), n_restarts=1)
        assert len(records) == 1
        assert restarts_rows(records)[0][0] == 1

    def test_sorted_by_loss(self, xor_pair):
        train, test = xor_pair
        records = restarts_study(train, test, h=4, config=quick_cfg(), n_restarts=5)
        losses = [r.loss for r in records]
        assert losses == sorted(losses)
        rows = restarts_rows(records)
        assert [r[0] for r in rows] == [1, 2, 3, 4, 5]
        assert len(RESTARTS_HEADER) == len(rows[0])


class TestSweepN:
    def test_row_count_is_grid_times_series(self):
        series = [
            SweepNSeries(name="p=k", p=2, h=4),
            SweepNSeries(name="wide", p=5, h=4),
            SweepNSeries(name="fsa", p=5, h=4, fsa_nsa=True, start_nodes=8, k_target=2, n_iter=10),
        ]
        cfg = quick_cfg(epochs=5)
        rows = sweep_n(2, series, [50, 100], cfg, seeds=[100, 101])
        assert len(rows) == len(series) * 2
        names = {r[0] for r in rows}
        assert names == {"p=k", "wide", "fsa"}
        for r in rows:
            assert np.isfinite(r[2]) and 0.0 <= r[3] <= 1.0

    def test_n_values_are_prefixes(self):
        """Growing n in the sweep reuses the same leading rows."""
        a = gen_xor(2, 5, 50, seed=100)
        b = gen_xor(2, 5, 100, seed=100)
        np.testing.assert_array_equal(b.X[:50], a.X)

    def test_irrelevant_variables_lower_test_auc_at_small_n(self):
        """At a starved sample size, the series trained on the true features
        alone beats the series carrying irrelevant columns."""
        series = [
            SweepNSeries(name="true", p=2, h=8),
            SweepNSeries(name="wide", p=10, h=8),
        ]
        cfg = TrainConfig(batch_size=32, epochs=60, seed=0)
        rows = sweep_n(2, series, [120], cfg, seeds=list(range(5)), threads=4)
        auc_of = {r[0]: r[3] for r in rows}
        assert auc_of["true"] > auc_of["wide"]


class TestKfold:
    def test_every_sample_in_exactly_one_fold(self):
        rng = np.random.default_rng(0)
        folds = kfold_indices(23, 5, rng)
        joined = np.concatenate(folds)
        assert sorted(joined.tolist()) == list(range(23))
        sizes = sorted(len(f) for f in folds)
        assert sizes == [4, 4, 5, 5, 5]


@pytest.fixture(scope="module")
def blob_pair():
    full = load_csv(FIXTURE, CsvSchema(label="label"))
    return split(full, SplitSpec(0.8, seed=7, stratified=True))


class TestGridSearch:

    def test_one_cell_grid_reduces_to_repeated_cv(self, blob_pair):
        train, test = blob_pair
        cfg = TrainConfig(batch_size=32, epochs=15, seed=5, loss="softmax-ce")
        result = grid_search(
            train, test, cfg,
            h_grid=[8], decay_grid=[1e-4], batch_grid=[32],
            folds=3, runs=2,
        )
        assert result.best.h == 8
        assert len(result.cv_rows) == 1
        assert result.cv_rows[0][3] == "ok"
        assert 0.0 <= result.final_mean <= 1.0
        assert len(result.final_accs) == 2
        assert result.weight_count == weight_count(8, train.p, test.C)

    def test_picks_better_cell(self, blob_pair):
        train, test = blob_pair
        cfg = TrainConfig(batch_size=32, epochs=15, seed=5, loss="softmax-ce")
        result = grid_search(
            train, test, cfg,
            h_grid=[1, 16], decay_grid=[1e-4], batch_grid=[32],
            folds=3, runs=1,
        )
        assert result.best.h == 16


class TestScheduleTable:
    def test_anchors_from_defaults(self):
        rows = schedule_table(300, 1024, 128, 15, 3)
        by_epoch = {e: (h, p) for e, h, p in rows}
        assert all(by_epoch[e][0] == 1024 for e in range(1, 76))
        assert all(by_epoch[e][1] == 15 for e in range(1, 181))
        assert by_epoch[100][0] == 219
        assert all(by_epoch[e][0] == 128 for e in range(188, 301))

    def test_both_columns_non_increasing(self):
        rows = schedule_table(120, 64, 8, 9, 2)
        hs = [r[1] for r in rows]
        ps = [r[2] for r in rows]
        assert all(a >= b for a, b in zip(hs, hs[1:]))
        assert all(a >= b for a, b in zip(ps, ps[1:]))


class TestWeightCounting:
    def test_dense_count(self):
        assert weight_count(64, 21, 4) == 1600

    def test_pruned_model_counts_surviving_entries(self):
        m = MlpModel.create(W=np.ones((8, 15)), b=np.zeros(8), Beta=np.ones((8, 4)), c=np.zeros(4))
        assert model_weight_count(m) == 120 + 32

    def test_equivalent_width_never_exceeds_target(self):
        h = equivalent_hidden_count(152, 21, 4)
        assert weight_count(h, 21, 4) <= 152
        assert weight_count(h + 1, 21, 4) > 152

    def test_equivalent_width_at_least_one(self):
        assert equivalent_hidden_count(3, 21, 4) == 1


class TestParallelMap:
    def test_preserves_order(self):
        items = list(range(20))
        assert parallel_map(lambda x: x * x, items, threads=4) == [x * x for x in items]
