"""XOR generator determinism and pool-prefix semantics, CSV ingestion,
splitting and standardization."""

import numpy as np
import pytest

from nsanet.data import (
    CsvSchema,
    Dataset,
    SplitSpec,
    gen_xor,
    load_csv,
    save_csv,
    split,
    standardize,
    xor_labels,
)
from nsanet.errors import (
    CsvFormatError,
    DimensionMismatchError,
    MissingValuesError,
    SingleClassError,
)


class TestXorLabels:
    def test_positive_product(self):
        x = [0.5, -0.5, -0.5, 0.9, -0.1]
        assert xor_labels(x, k=3).tolist() == [1]

    def test_negative_product(self):
        assert xor_labels([0.5, -0.5, 0.5], k=3).tolist() == [0]

    def test_zero_coordinate_gives_zero(self):
        assert xor_labels([0.0, -0.5, -0.5], k=3).tolist() == [0]

    def test_parity_matches_literal_product(self, rng):
        X = rng.uniform(-1, 1, size=(500, 6))
        lit = (np.prod(X[:, :4], axis=1) > 0).astype(int)
        np.testing.assert_array_equal(xor_labels(X, 4), lit)

    def test_ignores_trailing_columns(self, rng):
        X = rng.uniform(-1, 1, size=(100, 8))
        base = xor_labels(X, 3)
        shuffled = X.copy()
        shuffled[:, 3:] = shuffled[:, 3:][:, ::-1]
        np.testing.assert_array_equal(xor_labels(shuffled, 3), base)


class TestGenXor:
    def test_deterministic(self):
        a = gen_xor(3, 5, 100, seed=9)
        b = gen_xor(3, 5, 100, seed=9)
        assert a.X.tobytes() == b.X.tobytes()
        assert a.y.tobytes() == b.y.tobytes()

    def test_row_prefix_stability(self):
        small = gen_xor(3, 5, 40, seed=9)
        big = gen_xor(3, 5, 400, seed=9)
        np.testing.assert_array_equal(big.X[:40], small.X)
        np.testing.assert_array_equal(big.y[:40], small.y)

    def test_column_prefix_stability(self):
        narrow = gen_xor(2, 3, 60, seed=9)
        wide = gen_xor(2, 10, 60, seed=9)
        np.testing.assert_array_equal(wide.X[:, :3], narrow.X)
        np.testing.assert_array_equal(wide.y, narrow.y)

    def test_values_in_open_unit_cube(self):
        ds = gen_xor(2, 4, 1000, seed=0)
        assert ds.X.min() >= -1.0 and ds.X.max() < 1.0

    def test_class_balance_near_half(self):
        """Sign parity of k fair coins is a fair coin; at n=1e5 the observed
        fraction must sit within 0.01 of one half."""
        ds = gen_xor(3, 3, 100_000, seed=2024)
        assert abs(ds.y.mean() - 0.5) < 0.01

    def test_k_larger_than_p_rejected(self):
        with pytest.raises(DimensionMismatchError):
            gen_xor(4, 3, 10, seed=0)

    def test_pool_bounds_enforced(self):
        with pytest.raises(DimensionMismatchError):
            gen_xor(2, 3, 50, seed=0, pool_rows=10)

    def test_provenance_recorded(self):
        ds = gen_xor(2, 3, 10, seed=5)
        assert ds.provenance["kind"] == "xor"
        assert ds.provenance["seed"] == 5


class TestCsv:
    def test_label_first_appearance_order(self, tmp_path):
        f = tmp_path / "t.csv"
        f.write_text("f0,label\n1.0,a\n2.0,b\n3.0,a\n")
        ds = load_csv(f, CsvSchema(label="label"))
        assert ds.y.tolist() == [0, 1, 0]
        assert ds.C == 2

    def test_fixed_class_order(self, tmp_path):
        f = tmp_path / "t.csv"
        f.write_text("f0,label\n1.0,a\n2.0,b\n")
        ds = load_csv(f, CsvSchema(label="label", classes=("b", "a")))
        assert ds.y.tolist() == [1, 0]

    def test_unknown_label_rejected(self, tmp_path):
        f = tmp_path / "t.csv"
        f.write_text("f0,label\n1.0,a\n2.0,zz\n")
        with pytest.raises(CsvFormatError) as exc:
            load_csv(f, CsvSchema(label="label", classes=("a", "b")))
        assert exc.value.row == 3

    def test_bad_numeric_cell_reports_row_and_col(self, tmp_path):
        f = tmp_path / "t.csv"
        f.write_text("f0,f1,label\n1.0,2.0,a\n1.0,oops,b\n")
        with pytest.raises(CsvFormatError) as exc:
            load_csv(f, CsvSchema(label="label"))
        assert (exc.value.row, exc.value.col) == (3, 2)

    def test_missing_values_list_rows(self, tmp_path):
        f = tmp_path / "t.csv"
        f.write_text("f0,f1,label\n1.0,,a\n2.0,3.0,b\n,1.0,a\n")
        with pytest.raises(MissingValuesError) as exc:
            load_csv(f, CsvSchema(label="label"))
        assert exc.value.rows == [1, 3]

    def test_onehot_and_ordinal_encoding(self, tmp_path):
        f = tmp_path / "t.csv"
        f.write_text("color,size,label\nred,s,a\nblue,m,b\nred,l,a\n")
        ds = load_csv(f, CsvSchema(label="label", onehot=("color",), ordinal=("size",)))
        assert ds.feature_names == ("color=red", "color=blue", "size")
        np.testing.assert_array_equal(ds.X[:, 0], [1, 0, 1])
        np.testing.assert_array_equal(ds.X[:, 2], [0, 1, 2])

    def test_round_trip(self, rng, tmp_path):
        ds = gen_xor(2, 4, 50, seed=11)
        f = tmp_path / "xor.csv"
        save_csv(ds, f)
        back = load_csv(f, CsvSchema(label="label", classes=("0", "1")))
        assert back.X.tobytes() == ds.X.tobytes()
        np.testing.assert_array_equal(back.y, ds.y)
        assert back.feature_names == ds.feature_names

    def test_hash_recorded(self, tmp_path):
        f = tmp_path / "t.csv"
        f.write_text("f0,label\n1.0,a\n2.0,b\n")
        ds = load_csv(f, CsvSchema(label="label"))
        assert len(ds.provenance["sha256"]) == 64


class TestSplit:
    def make(self, rng, n=10, classes=(5, 5)):
        y = np.concatenate([np.full(c, i) for i, c in enumerate(classes)]).astype(np.int64)
        X = rng.normal(size=(n, 2))
        return Dataset(X=X, y=y, feature_names=("a", "b"), C=len(classes))

    def test_sizes_disjoint_and_cover(self, rng):
        ds = self.make(rng)
        train, test = split(ds, SplitSpec(0.8, seed=1))
        assert (train.n, test.n) == (8, 2)
        joined = np.vstack([train.X, test.X])
        assert sorted(map(tuple, joined.tolist())) == sorted(map(tuple, ds.X.tolist()))

    def test_same_seed_same_split(self, rng):
        ds = self.make(rng, n=20, classes=(10, 10))
        a1, b1 = split(ds, SplitSpec(0.7, seed=4))
        a2, b2 = split(ds, SplitSpec(0.7, seed=4))
        assert a1.X.tobytes() == a2.X.tobytes()
        assert b1.X.tobytes() == b2.X.tobytes()

    def test_stratified_counts(self, rng):
        """60/40 classes at n=100 with fraction 0.8: train 48/32, test 12/8."""
        ds = self.make(rng, n=100, classes=(60, 40))
        train, test = split(ds, SplitSpec(0.8, seed=3, stratified=True))
        assert [(train.y == c).sum() for c in (0, 1)] == [48, 32]
        assert [(test.y == c).sum() for c in (0, 1)] == [12, 8]

    def test_stratified_needs_two_per_class(self, rng):
        ds = self.make(rng, n=3, classes=(2, 1))
        with pytest.raises(SingleClassError):
            split(ds, SplitSpec(0.8, seed=0, stratified=True))

    def test_tiny_dataset_rejected(self, rng):
        ds = self.make(rng, n=1, classes=(1,))
        with pytest.raises(DimensionMismatchError):
            split(ds, SplitSpec(0.5, seed=0))

    def test_fraction_bounds(self):
        with pytest.raises(ValueError):
            SplitSpec(train_fraction=1.0)
        with pytest.raises(ValueError):
            SplitSpec(train_fraction=0.0)


class TestStandardize:
    def make_pair(self, rng):
        X = rng.normal(loc=3.0, scale=2.0, size=(50, 4))
        X[:, 2] = 7.0  # constant feature
        y = rng.integers(0, 2, size=50)
        ds = Dataset(X=X, y=y, feature_names=("a", "b", "c", "d"), C=2)
        return split(ds, SplitSpec(0.8, seed=0))

    def test_train_mean_zero_unit_std(self, rng):
        train, test = self.make_pair(rng)
        tr, te, _ = standardize(train, test)
        np.testing.assert_allclose(tr.X.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(tr.X.std(axis=0)[[0, 1, 3]], 1.0, atol=1e-12)

    def test_constant_feature_maps_to_zero(self, rng):
        train, test = self.make_pair(rng)
        tr, te, _ = standardize(train, test)
        np.testing.assert_array_equal(tr.X[:, 2], 0.0)
        np.testing.assert_array_equal(te.X[:, 2], 0.0)

    def test_inverse_recovers_train(self, rng):
        train, test = self.make_pair(rng)
        tr, _, tf = standardize(train, test)
        np.testing.assert_allclose(tf.inverse(tr.X), train.X, atol=1e-9)

    def test_test_uses_train_statistics(self, rng):
        train, test = self.make_pair(rng)
        _, te, tf = standardize(train, test)
        np.testing.assert_allclose(te.X, (test.X - tf.mean) / tf.scale, atol=1e-12)
