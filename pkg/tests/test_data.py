import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from histloss.data import (
    CT_POSITION_SCHEMA,
    CSVSchema,
    DataError,
    Dataset,
    Manifest,
    Standardizer,
    TargetTransform,
    load_csv,
    load_from_manifest,
    make_synthetic,
    minibatches,
    read_manifest,
    sha256_file,
    split,
    split_first_n,
    split_from_file,
    standardize,
    subsample,
    transform_targets,
    write_manifest,
)


@pytest.fixture
def toy_csv(tmp_path):
    p = tmp_path / "toy.csv"
    p.write_text("id,a,b,target\n1,0.5,2,10\n2,1.5,-3,20\n3,2.5,4e1,30\n")
    return p


class TestLoadCSV:
    def test_file_order(self, toy_csv):
        ds = load_csv(toy_csv, CSVSchema("target", drop_columns=("id",)))
        assert ds.n == 3 and ds.d == 2
        np.testing.assert_array_equal(ds.y, [10, 20, 30])
        np.testing.assert_array_equal(ds.X[:, 1], [2, -3, 40])
        assert ds.name == "toy"

    def test_explicit_features_and_no_header(self, tmp_path):
        p = tmp_path / "raw.csv"
        p.write_text("1;2;3\n4;5;6\n")
        ds = load_csv(p, CSVSchema(2, feature_columns=(0,), delimiter=";", header=False))
        np.testing.assert_array_equal(ds.X, [[1], [4]])
        np.testing.assert_array_equal(ds.y, [3, 6])

    def test_ct_layout_keeps_patient_id(self, tmp_path):
        cols = ["patientId"] + [f"value{i}" for i in range(384)] + ["reference"]
        row = ",".join(["7"] + ["0.25"] * 384 + ["55.5"])
        p = tmp_path / "ct.csv"
        p.write_text(",".join(cols) + "\n" + row + "\n" + row + "\n")
        ds = load_csv(p, CT_POSITION_SCHEMA)
        assert ds.d == 385 and ds.X[0, 0] == 7 and ds.y[0] == 55.5

    def test_malformed_row_names_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,t\n1,2\n3\n")
        with pytest.raises(DataError, match="line 3"):
            load_csv(p, CSVSchema("t"))
        p.write_text("a,t\n1,2\n3,abc\n")
        with pytest.raises(DataError, match=r"line 3, column 't'.*parse"):
            load_csv(p, CSVSchema("t"))

    @pytest.mark.parametrize("missing", ["", "NA", "?", "nan"])
    def test_missing_value_is_error(self, tmp_path, missing):
        p = tmp_path / "miss.csv"
        p.write_text(f"a,t\n1,2\n{missing},4\n")
        with pytest.raises(DataError, match="line 3.*missing"):
            load_csv(p, CSVSchema("t"))

    def test_missing_file_and_column(self, tmp_path, toy_csv):
        with pytest.raises(DataError, match="nope.csv"):
            load_csv(tmp_path / "nope.csv", CSVSchema("t"))
        with pytest.raises(DataError, match="column 'zzz'"):
            load_csv(toy_csv, CSVSchema("zzz"))

    def test_dataset_validation(self):
        with pytest.raises(DataError):
            Dataset(np.zeros((0, 2)), np.zeros(0))
        with pytest.raises(DataError):
            Dataset(np.array([[np.nan]]), np.zeros(1))
        ds = Dataset(np.zeros((2, 2)), np.zeros(2))
        with pytest.raises(ValueError):
            ds.X[0, 0] = 1.0


class TestManifest:
    def test_round_trip_and_checksum(self, tmp_path, toy_csv):
        m = Manifest("toy", toy_csv.name, CSVSchema("target", drop_columns=("id",)), sha256_file(toy_csv), "hand made")
        mp = tmp_path / "toy.json"
        write_manifest(m, mp)
        ds = load_from_manifest(read_manifest(mp))
        assert ds.name == "toy" and ds.provenance == "hand made" and ds.d == 2

    def test_checksum_mismatch(self, tmp_path, toy_csv):
        m = Manifest("toy", str(toy_csv), CSVSchema("target"), "0" * 64)
        with pytest.raises(DataError, match="checksum mismatch"):
            load_from_manifest(m)
        load_from_manifest(m, verify=False)


class TestSplit:
    ds = Dataset(np.arange(20.0).reshape(10, 2), np.arange(10.0))

    def test_sizes_and_partition(self):
        tr, te = split(self.ds, 0.2, 1)
        assert (tr.n, te.n) == (8, 2)
        ids = np.concatenate([tr.y, te.y])
        assert sorted(ids) == list(range(10)) and not set(tr.y) & set(te.y)

    def test_deterministic(self):
        a, b = split(self.ds, 0.2, 1), split(self.ds, 0.2, 1)
        np.testing.assert_array_equal(a[1].y, b[1].y)

    def test_ct_sizes(self):
        n = 53500
        ds = Dataset(np.zeros((n, 1)), np.arange(n, dtype=float))
        tr, te = split(ds, 0.2, 0)
        assert (tr.n, te.n) == (42800, 10700)

    @settings(max_examples=50, deadline=None)
    @given(n=st.integers(2, 300), frac=st.floats(0.01, 0.99), seed=st.integers(0, 2**32 - 1))
    def test_partition_property(self, n, frac, seed):
        ds = Dataset(np.zeros((n, 1)), np.arange(n, dtype=float))
        tr, te = split(ds, frac, seed)
        assert tr.n + te.n == n and tr.n > 0 and te.n > 0
        assert len(set(tr.y) | set(te.y)) == n

    def test_bad_fraction(self):
        with pytest.raises(ValueError):
            split(self.ds, 1.0, 0)

    def test_fixed_splits(self, tmp_path):
        tr, te = split_first_n(self.ds, 7)
        np.testing.assert_array_equal(te.y, [7, 8, 9])
        f = tmp_path / "test_rows.txt"
        f.write_text("9\n0\n")
        tr, te = split_from_file(self.ds, f)
        np.testing.assert_array_equal(te.y, [0, 9])
        assert tr.n == 8
        f.write_text("10\n")
        with pytest.raises(DataError):
            split_from_file(self.ds, f)

    def test_subsample(self):
        assert subsample(self.ds, None, 0) is self.ds
        s = subsample(self.ds, 4, 3)
        assert s.n == 4 and np.all(np.diff(s.y) > 0)
        np.testing.assert_array_equal(s.y, subsample(self.ds, 4, 3).y)


class TestStandardize:
    def test_population_std(self):
        tr = Dataset(np.array([[1.0], [2.0], [3.0]]), np.zeros(3))
        z, _, st_ = standardize(tr, tr)
        np.testing.assert_allclose(z.X[:, 0], [-1.224744871391589, 0, 1.224744871391589], atol=1e-15)
        assert st_.std[0] == pytest.approx(np.sqrt(2 / 3))

    def test_constant_feature_flagged(self):
        X = np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 4.0]])
        tr = Dataset(X, np.zeros(3))
        z, _, st_ = standardize(tr, tr)
        np.testing.assert_array_equal(st_.constant, [True, False])
        np.testing.assert_array_equal(z.X[:, 0], [5, 5, 5])

    def test_train_statistics_only(self):
        rng = np.random.default_rng(0)
        tr = Dataset(rng.normal(3, 2, size=(200, 4)), np.zeros(200))
        te = Dataset(rng.normal(-10, 9, size=(50, 4)), np.zeros(50))
        ztr, zte, st_ = standardize(tr, te)
        np.testing.assert_allclose(ztr.X.mean(axis=0), 0, atol=1e-10)
        np.testing.assert_allclose(ztr.X.var(axis=0), 1, atol=1e-8)
        np.testing.assert_array_equal(zte.X, (te.X - tr.X.mean(axis=0)) / tr.X.std(axis=0))
        again = Standardizer.fit(tr.X)
        np.testing.assert_array_equal(again.mean, st_.mean)
        np.testing.assert_array_equal(again.std, st_.std)


class TestTargets:
    def test_minmax(self):
        a, b, tt = transform_targets([0.0, 50.0, 100.0], [110.0], "minmax01")
        np.testing.assert_array_equal(a, [0, 0.5, 1])
        assert b[0] == pytest.approx(1.1, abs=1e-15)

    def test_round_trip(self):
        y = np.random.default_rng(1).uniform(-300, 900, 1000)
        tt = TargetTransform.fit(y, "minmax01")
        assert np.max(np.abs(tt.inverse(tt.forward(y)) - y)) < 1e-12

    def test_identity_and_errors(self):
        y = np.array([3.0, 4.0])
        np.testing.assert_array_equal(TargetTransform.fit(y, "identity").forward(y), y)
        with pytest.raises(ValueError, match="degenerate"):
            TargetTransform.fit([2.0, 2.0], "minmax01")
        with pytest.raises(ValueError):
            TargetTransform.fit(y, "log")


class TestMinibatches:
    def test_sizes(self):
        b = minibatches(5, 2, 0)
        assert [len(x) for x in b] == [2, 2, 1]
        assert sorted(np.concatenate(b)) == [0, 1, 2, 3, 4]

    def test_deterministic(self):
        for x, y in zip(minibatches(100, 7, 3), minibatches(100, 7, 3)):
            np.testing.assert_array_equal(x, y)

    def test_ct_scale(self):
        b = minibatches(42800, 256, 0)
        assert len(b) == 168 and len(b[-1]) == 48
        assert np.array_equal(np.sort(np.concatenate(b)), np.arange(42800))

    def test_bad_size(self):
        with pytest.raises(ValueError):
            minibatches(5, 0, 0)


def test_synthetic():
    ds = make_synthetic(500, 8, seed=1)
    assert ds.n == 500 and ds.d == 8
    assert 0 <= ds.y.min() and ds.y.max() <= 100
    np.testing.assert_array_equal(ds.X, make_synthetic(500, 8, seed=1).X)
