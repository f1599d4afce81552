import os

import numpy as np
import pytest
import scipy.sparse as sp

from splitopt import datasets as data
from splitopt.errors import (
    BadDimensions,
    EmptyFile,
    NonIncreasingIndices,
    ParseError,
)


class TestGenLasso:
    def test_ground_truth_nnz_exact(self):
        for seed in range(5):
            ds, mu = data.gen_lasso(n=50, d=80, nnz=17, seed=seed)
            assert int(np.sum(ds.ground_truth != 0)) == 17
            assert mu == pytest.approx(0.1 * np.abs(ds.D.T @ ds.r).max())

    def test_noise_variance_concentrates(self):
        vals = []
        for seed in range(20):
            ds, _ = data.gen_lasso(n=400, d=50, nnz=10, noise_var=1e-3, seed=seed)
            resid = ds.r - ds.D @ ds.ground_truth
            vals.append(float(resid @ resid) / 400)
        vals = np.asarray(vals)
        se = vals.std(ddof=1) / np.sqrt(len(vals))
        assert abs(vals.mean() - 1e-3) <= 3 * se

    def test_zero_nnz_degenerate(self):
        ds, mu = data.gen_lasso(n=30, d=20, nnz=0, seed=3)
        assert np.all(ds.ground_truth == 0)
        assert mu > 0  # r = noise only, still nonzero a.s.

    def test_seed_determinism_bitwise(self):
        a, mu_a = data.gen_lasso(n=20, d=30, nnz=5, seed=11)
        b, mu_b = data.gen_lasso(n=20, d=30, nnz=5, seed=11)
        assert np.array_equal(a.D, b.D) and np.array_equal(a.r, b.r)
        assert np.array_equal(a.ground_truth, b.ground_truth)
        assert mu_a == mu_b

    def test_table1_dims(self):
        ds, _ = data.gen_lasso(n=200, d=400, nnz=100, seed=0)
        assert (ds.n, ds.d) == (200, 400)

    def test_normalized_rows_flag(self):
        ds, _ = data.gen_lasso(n=10, d=6, nnz=2, seed=0, normalize_rows=True)
        assert np.allclose(np.linalg.norm(ds.D, axis=1), 1.0)

    def test_bad_dimensions(self):
        with pytest.raises(BadDimensions):
            data.gen_lasso(n=10, d=5, nnz=6)


class TestGenGroupLasso:
    def test_defaults_shape(self):
        ds, mu = data.gen_group_lasso(seed=0)
        assert len(ds.groups) == 10
        assert 10 <= ds.d <= 500
        assert ds.n == 200
        sizes = [len(g) for g in ds.groups]
        assert all(1 <= s <= 50 for s in sizes)
        assert sum(sizes) == ds.d
        # mu equals the global reading (max over groups of per-group max)
        assert mu == pytest.approx(0.1 * np.abs(ds.D.T @ ds.r).max())

    def test_singleton_blocks(self):
        ds, _ = data.gen_group_lasso(n=20, n_groups=8, max_block=1, seed=1)
        assert all(len(g) == 1 for g in ds.groups)
        assert ds.d == 8

    def test_dense_ground_truth_at_full_fraction(self):
        ds, _ = data.gen_group_lasso(n=20, n_groups=4, max_block=6, frac_nnz=1.0,
                                     seed=2)
        assert np.all(ds.ground_truth != 0)

    def test_determinism(self):
        a, _ = data.gen_group_lasso(seed=9)
        b, _ = data.gen_group_lasso(seed=9)
        assert np.array_equal(a.D, b.D)
        assert all(np.array_equal(x, y) for x, y in zip(a.groups, b.groups))


class TestGenLogistic:
    def test_labels_in_pm_one(self):
        ds, mu = data.gen_logistic(n=60, d=40, nnz=10, seed=0)
        assert set(np.unique(ds.r)) <= {-1.0, 1.0}
        assert mu == 1.0
        assert ds.kind == "binary"

    def test_rows_normalized_by_default(self):
        ds, _ = data.gen_logistic(n=30, d=20, nnz=5, seed=1)
        assert np.allclose(np.linalg.norm(ds.D, axis=1), 1.0)

    def test_zero_truth_balanced_noise_labels(self):
        ds, _ = data.gen_logistic(n=4000, d=10, nnz=0, seed=2)
        frac = np.mean(ds.r == 1.0)
        assert 0.45 <= frac <= 0.55

    def test_determinism(self):
        a, _ = data.gen_logistic(n=25, d=15, nnz=4, seed=7)
        b, _ = data.gen_logistic(n=25, d=15, nnz=4, seed=7)
        assert np.array_equal(a.D, b.D) and np.array_equal(a.r, b.r)


class TestReadLibsvm:
    def write(self, tmp_path, text):
        path = tmp_path / "data.txt"
        path.write_text(text)
        return str(path)

    def test_basic_line(self, tmp_path):
        ds = data.read_libsvm(self.write(tmp_path, "1 1:0.5 3:-2\n"))
        D = ds.D if not sp.issparse(ds.D) else ds.D.toarray()
        assert np.allclose(D, [[0.5, 0.0, -2.0]])
        assert ds.r[0] == 1.0

    def test_label_only_line(self, tmp_path):
        ds = data.read_libsvm(self.write(tmp_path, "-1 1:1\n-1\n"))
        D = ds.D if not sp.issparse(ds.D) else ds.D.toarray()
        assert np.allclose(D[1], [0.0])
        assert ds.r[1] == -1.0

    def test_non_increasing_indices(self, tmp_path):
        with pytest.raises(NonIncreasingIndices) as ei:
            data.read_libsvm(self.write(tmp_path, "1 3:1 2:1\n"))
        assert ei.value.line == 1

    def test_parse_error_reports_position(self, tmp_path):
        with pytest.raises(ParseError) as ei:
            data.read_libsvm(self.write(tmp_path, "1 1:0.5\n1 nope\n"))
        assert ei.value.line == 2
        assert ei.value.column == 3

    def test_bad_label(self, tmp_path):
        with pytest.raises(ParseError):
            data.read_libsvm(self.write(tmp_path, "abc 1:1\n"))

    def test_zero_index_rejected(self, tmp_path):
        with pytest.raises(ParseError):
            data.read_libsvm(self.write(tmp_path, "1 0:1\n"))

    def test_empty_file(self, tmp_path):
        with pytest.raises(EmptyFile):
            data.read_libsvm(self.write(tmp_path, "\n\n"))

    def test_blank_lines_skipped(self, tmp_path):
        ds = data.read_libsvm(self.write(tmp_path, "\n1 1:2\n\n-1 2:3\n"))
        assert ds.n == 2

    def test_n_features_override(self, tmp_path):
        ds = data.read_libsvm(self.write(tmp_path, "1 2:1\n"), n_features=10)
        assert ds.d == 10
        with pytest.raises(ParseError):
            data.read_libsvm(self.write(tmp_path, "1 5:1\n"), n_features=3)

    def test_binary_mapping_from_zero_one(self, tmp_path):
        ds = data.read_libsvm(self.write(tmp_path, "0 1:1\n1 1:2\n"), kind="binary")
        assert np.array_equal(ds.r, [-1.0, 1.0])

    def test_binary_many_values_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            data.read_libsvm(self.write(tmp_path, "0 1:1\n1 1:2\n2 1:3\n"),
                             kind="binary")

    def test_sparse_storage_below_density_cutoff(self, tmp_path):
        lines = [f"1 {i + 1}:1" for i in range(3)]  # 3 rows, each 1 of 100 cols
        lines.append("1 100:1")
        ds = data.read_libsvm(self.write(tmp_path, "\n".join(lines) + "\n"))
        assert sp.issparse(ds.D)

    def test_dense_storage_above_cutoff(self, tmp_path):
        ds = data.read_libsvm(self.write(tmp_path, "1 1:1 2:2\n-1 1:3 2:4\n"))
        assert isinstance(ds.D, np.ndarray)


class TestRoundTrip:
    @pytest.mark.parametrize("sparse", [False, True])
    def test_write_read_exact(self, tmp_path, sparse):
        rng = np.random.default_rng(0)
        D = rng.standard_normal((7, 5))
        D[rng.random((7, 5)) < 0.4] = 0.0
        if sparse:
            D = sp.csr_matrix(D)
        r = rng.standard_normal(7)
        ds = data.Dataset(D=D, r=r)
        path = str(tmp_path / "out.libsvm")
        data.write_libsvm(ds, path)
        back = data.read_libsvm(path, n_features=5)
        Dback = back.D.toarray() if sp.issparse(back.D) else back.D
        Dorig = D.toarray() if sp.issparse(D) else D
        assert np.array_equal(Dback, Dorig)
        assert np.array_equal(back.r, r)

    def test_generated_dataset_roundtrip(self, tmp_path):
        ds, _ = data.gen_lasso(n=12, d=9, nnz=4, seed=5)
        path = str(tmp_path / "gen.libsvm")
        data.write_libsvm(ds, path)
        back = data.read_libsvm(path, n_features=9)
        Dback = back.D.toarray() if sp.issparse(back.D) else back.D
        assert np.array_equal(Dback, ds.D)
        assert np.array_equal(back.r, ds.r)

    def test_manifest(self, tmp_path):
        import json

        ds, mu = data.gen_lasso(n=5, d=4, nnz=2, seed=1)
        path = str(tmp_path / "m.json")
        data.write_manifest(path, ds.meta)
        with open(path) as fh:
            m = json.load(fh)
        assert m["schema_version"] == 1
        assert m["mu"] == mu


@pytest.mark.skipif("SPLITOPT_REAL_DATA" not in os.environ,
                    reason="real dataset directory not supplied")
class TestRealDatasets:
    # expects files bodyfat, a9a, E2006.train (LIBSVM format) in the directory
    TABLE = {"bodyfat": (14, 252), "a9a": (123, 32561), "E2006.train": (150360, 16087)}

    def test_dims_match_table(self):
        root = os.environ["SPLITOPT_REAL_DATA"]
        for name, (d, n) in self.TABLE.items():
            path = os.path.join(root, name)
            if not os.path.exists(path):
                pytest.skip(f"{name} not present")
            ds = data.read_libsvm(path, n_features=d)
            assert (ds.d, ds.n) == (d, n)
