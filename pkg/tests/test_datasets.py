import numpy as np
import pytest

from aggloss.datasets import (
    DatasetError,
    LabeledDataset,
    Standardizer,
    add_ambiguous,
    amplify_imbalance,
    gen_example1,
    gen_example2,
    gen_figure1,
    inject_outliers,
    load_table,
    sample_split,
    save_table,
    threshold_scan,
    threshold_scan_error_rate,
)


class TestLabeledDataset:
    def test_invariants_enforced(self):
        with pytest.raises(DatasetError):
            LabeledDataset(np.zeros((2, 2)), np.array([1.0, 0.0]))
        with pytest.raises(DatasetError):
            LabeledDataset(np.array([[np.nan]]), np.array([1.0]))
        with pytest.raises(DatasetError):
            LabeledDataset(np.zeros((0, 2)), np.zeros(0))


class TestExample1:
    def test_construction(self):
        ds = gen_example1(1, 100.0)
        assert ds.n == 4 and ds.dim == 1
        pts = sorted(zip(ds.features[:, 0], ds.labels))
        assert pts == [(-100.0, 1.0), (-1.0, -1.0), (1.0, 1.0), (100.0, -1.0)]

    def test_counts(self):
        ds = gen_example1(50, 1000.0)
        assert ds.n == 102
        assert int(np.sum(ds.labels > 0)) == 51

    def test_optimal_linear_loss_is_two(self):
        ds = gen_example1(50, 1000.0)
        best, t, orient = threshold_scan(ds.features[:, 0], ds.labels)
        assert best == 2
        assert -1 < t < 1 and orient == 1

    def test_degenerate_rejected(self):
        with pytest.raises(DatasetError):
            gen_example1(0)
        with pytest.raises(DatasetError):
            gen_example1(50, 10.0)  # magnitude must exceed n

    def test_seed_free_deterministic(self):
        a, b = gen_example1(5, 100.0), gen_example1(5, 100.0)
        np.testing.assert_array_equal(a.features, b.features)


class TestExample2:
    def test_single_pair(self):
        assert gen_example2(1, seed=0).n == 2

    def test_counts_and_ranges(self):
        ds = gen_example2(100, seed=9)
        assert ds.n == 200
        neg = ds.features[ds.labels < 0, 0]
        pos = ds.features[ds.labels > 0, 0]
        assert neg.size == pos.size == 100
        assert neg.min() >= -1 and neg.max() <= 1
        assert pos.min() >= 0 and pos.max() <= 1

    def test_seed_deterministic(self):
        a, b = gen_example2(50, seed=3), gen_example2(50, seed=3)
        np.testing.assert_array_equal(a.features, b.features)
        assert not np.array_equal(a.features, gen_example2(50, seed=4).features)

    def test_threshold_scan_optimum_near_three_quarters(self):
        ds = gen_example2(100_000, seed=5)
        best, t, orient = threshold_scan(ds.features[:, 0], ds.labels)
        acc = 1 - best / ds.n
        assert acc == pytest.approx(0.75, abs=0.01)
        assert abs(t) < 0.02 and orient == 1


class TestThresholdScan:
    def test_matches_brute_force(self):
        rng = np.random.default_rng(17)
        for _ in range(60):
            n = int(rng.integers(1, 15))
            xs = np.round(rng.normal(0, 1, n), 1)  # force some duplicates
            ys = rng.choice([-1.0, 1.0], n)
            best, t, orient = threshold_scan(xs, ys)
            # brute force over a dense threshold sweep, both orientations
            cand = np.concatenate([[xs.min() - 1, xs.max() + 1],
                                   (np.sort(xs)[1:] + np.sort(xs)[:-1]) / 2])
            brute = min(
                int(np.sum(np.sign(o * (xs - c)) * ys <= 0))
                for c in cand for o in (1, -1)
            )
            assert best == brute
            got = int(np.sum(np.sign(orient * (xs - t)) * ys <= 0))
            assert got == best

    def test_empty_rejected(self):
        with pytest.raises(DatasetError):
            threshold_scan([], [])


class TestFigure1:
    def test_unknown_scenario(self):
        with pytest.raises(DatasetError):
            gen_figure1("spiral", 100)
        with pytest.raises(DatasetError):
            gen_figure1("easy", 3)

    def test_all_scenarios_two_dimensional(self):
        for scen in ("easy", "imbalance", "imbalance_outlier", "ambiguous"):
            ds = gen_figure1(scen, 200, seed=1)
            assert ds.n == 200 and ds.dim == 2

    def test_easy_separable_at_zero(self):
        ds = gen_figure1("easy", 500, seed=2)
        assert threshold_scan_error_rate(ds) == 0.0
        assert np.all(ds.features[ds.labels < 0, 0] < 0)
        assert np.all(ds.features[ds.labels > 0, 0] > 0)

    def test_imbalance_exact_ratio(self):
        ds = gen_figure1("imbalance", 2000, seed=3)
        assert int(np.sum(ds.labels < 0)) == 1800
        assert int(np.sum(ds.labels > 0)) == 200
        assert threshold_scan_error_rate(ds) == 0.0

    def test_imbalance_outlier_optimum_is_outlier_mass(self):
        ds = gen_figure1("imbalance_outlier", 2000, seed=4)
        best, t, orient = threshold_scan(ds.features[:, 0], ds.labels)
        assert best == 10  # the mislabeled cluster only
        assert abs(t) < 0.1 and orient == 1

    def test_ambiguous_optimum_near_three_quarters(self):
        ds = gen_figure1("ambiguous", 100_000, seed=5)
        assert threshold_scan_error_rate(ds) == pytest.approx(0.25, abs=0.01)

    def test_seed_deterministic(self):
        a = gen_figure1("easy", 100, seed=6)
        b = gen_figure1("easy", 100, seed=6)
        np.testing.assert_array_equal(a.features, b.features)


class TestInjectOutliers:
    def base(self, n=400, seed=0):
        return gen_figure1("easy", n, seed=seed)

    def test_count(self):
        ds = self.base(1000)
        out = inject_outliers(ds, 0.05, seed=1)
        assert out.n == 1050
        np.testing.assert_array_equal(out.features[:1000], ds.features)

    def test_outlier_formula_membership(self):
        # each appended row must equal 10*x2 - 9*x1 for some same/opposite pair
        ds = LabeledDataset(
            np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.5], [-1.0, 2.0]]),
            np.array([-1.0, 1.0, 1.0, -1.0]),
        )
        out = inject_outliers(ds, 0.9, seed=2)
        pos = ds.features[ds.labels > 0]
        neg = ds.features[ds.labels < 0]
        for row, label in zip(out.features[ds.n:], out.labels[ds.n:]):
            same, other = (pos, neg) if label > 0 else (neg, pos)
            combos = [10.0 * x2 - 9.0 * x1 for x1 in same for x2 in other]
            assert any(np.allclose(row, c) for c in combos)

    def test_collinear_degenerate_case(self):
        # x1 == x2 would give 10x - 9x = x; check with single-point classes
        ds = LabeledDataset(np.array([[1.0], [1.0]]), np.array([-1.0, 1.0]))
        out = inject_outliers(ds, 0.5, seed=3)
        # only possible pair is x1 = x2 = [1]: outlier feature = 1
        assert out.features[-1, 0] == pytest.approx(1.0)

    def test_single_class_rejected(self):
        ds = LabeledDataset(np.ones((3, 1)), np.ones(3))
        with pytest.raises(DatasetError):
            inject_outliers(ds, 0.1, seed=0)

    def test_input_unmutated(self):
        ds = self.base(100)
        snapshot = ds.features.copy()
        inject_outliers(ds, 0.2, seed=4)
        np.testing.assert_array_equal(ds.features, snapshot)


class TestAmplifyImbalance:
    def test_already_at_target_is_noop(self):
        ds = gen_figure1("imbalance", 1000, seed=1)  # 90% negative
        out = amplify_imbalance(ds, 0.6, seed=0)
        assert out.n == ds.n
        np.testing.assert_array_equal(out.features, ds.features)

    def test_duplicate_count_formula(self):
        # 61% -> 80%: the minimal count satisfying the target fraction
        rng = np.random.default_rng(2)
        N, P = 61, 39
        ds = LabeledDataset(rng.normal(0, 1, (100, 2)),
                            np.concatenate([np.full(N, -1.0), np.full(P, 1.0)]))
        out = amplify_imbalance(ds, 0.8, seed=3)
        dup = out.n - ds.n
        minimal = 0
        while (N + minimal) / (N + P + minimal) < 0.8:
            minimal += 1
        assert dup == minimal == 95  # = ceil(0.8 P / 0.2) - N exactly
        frac = np.mean(out.labels < 0)
        assert 0.8 <= frac < 0.8 + 1.0 / out.n

    def test_duplicates_are_negative_copies(self):
        ds = gen_example2(50, seed=4)
        out = amplify_imbalance(ds, 0.7, seed=5)
        assert np.all(out.labels[ds.n:] == -1.0)
        neg_rows = {tuple(r) for r in ds.features[ds.labels < 0]}
        for row in out.features[ds.n:]:
            assert tuple(row) in neg_rows

    def test_no_negatives_rejected(self):
        ds = LabeledDataset(np.ones((3, 1)), np.ones(3))
        with pytest.raises(DatasetError):
            amplify_imbalance(ds, 0.8, seed=0)


class TestAddAmbiguous:
    def test_count_and_copy_semantics(self):
        ds = gen_example2(500, seed=6)
        out = add_ambiguous(ds, 0.1, seed=7)
        assert out.n == ds.n + 100
        neg_rows = {tuple(r) for r in ds.features[ds.labels < 0]}
        for row, label in zip(out.features[ds.n:], out.labels[ds.n:]):
            assert label == 1.0
            assert tuple(row) in neg_rows  # byte-equal feature copy

    def test_contradiction_pair_unclassifiable(self):
        ds = LabeledDataset(np.array([[0.5], [2.0]]), np.array([-1.0, 1.0]))
        out = add_ambiguous(ds, 0.5, seed=8)
        dup = out.features[-1]
        # the copied point now carries both labels: no score is right twice
        matches = np.flatnonzero((out.features == dup).all(axis=1))
        assert len({out.labels[i] for i in matches}) == 2

    def test_no_negatives_rejected(self):
        ds = LabeledDataset(np.ones((3, 1)), np.ones(3))
        with pytest.raises(DatasetError):
            add_ambiguous(ds, 0.5, seed=0)


class TestLoadTable:
    def write(self, tmp_path, text, name="data.csv"):
        path = tmp_path / name
        path.write_text(text)
        return path

    def test_basic_mapping(self, tmp_path):
        path = self.write(tmp_path, "a,b,target\n1,2,0\n3,4,1\n5,6,0\n")
        ds = load_table(path)
        assert ds.n == 3 and ds.dim == 2
        np.testing.assert_array_equal(ds.labels, [-1.0, 1.0, -1.0])
        np.testing.assert_array_equal(ds.features[1], [3.0, 4.0])

    def test_lexicographically_larger_label_is_positive(self, tmp_path):
        path = self.write(tmp_path, "x,target\n1,no\n2,yes\n")
        ds = load_table(path)
        np.testing.assert_array_equal(ds.labels, [-1.0, 1.0])

    def test_tab_delimited_equivalent(self, tmp_path):
        csv_ds = load_table(self.write(tmp_path, "a,b,target\n1,2,0\n3,4,1\n"))
        tsv_ds = load_table(
            self.write(tmp_path, "a\tb\ttarget\n1\t2\t0\n3\t4\t1\n", "d.tsv"))
        np.testing.assert_array_equal(csv_ds.features, tsv_ds.features)
        np.testing.assert_array_equal(csv_ds.labels, tsv_ds.labels)

    def test_label_column_flag(self, tmp_path):
        path = self.write(tmp_path, "y,a\n0,1\n1,2\n")
        ds = load_table(path, label_column="y")
        assert ds.dim == 1

    def test_missing_label_column(self, tmp_path):
        path = self.write(tmp_path, "a,b\n1,2\n")
        with pytest.raises(DatasetError, match="label column"):
            load_table(path)

    def test_non_numeric_feature(self, tmp_path):
        path = self.write(tmp_path, "a,target\nx,0\n1,1\n")
        with pytest.raises(DatasetError, match="non-numeric"):
            load_table(path)

    def test_too_many_classes(self, tmp_path):
        path = self.write(tmp_path, "a,target\n1,0\n2,1\n3,2\n")
        with pytest.raises(DatasetError, match="2 distinct"):
            load_table(path)

    def test_single_class(self, tmp_path):
        path = self.write(tmp_path, "a,target\n1,0\n2,0\n")
        with pytest.raises(DatasetError, match="2 distinct"):
            load_table(path)

    def test_empty_file(self, tmp_path):
        path = self.write(tmp_path, "")
        with pytest.raises(DatasetError, match="empty"):
            load_table(path)

    def test_duplicate_headers(self, tmp_path):
        path = self.write(tmp_path, "a,a,target\n1,2,0\n3,4,1\n")
        with pytest.raises(DatasetError, match="duplicate"):
            load_table(path)

    def test_ragged_row(self, tmp_path):
        path = self.write(tmp_path, "a,b,target\n1,2,0\n3,1\n")
        with pytest.raises(DatasetError, match="fields"):
            load_table(path)

    def test_round_trip(self, tmp_path):
        ds = gen_figure1("ambiguous", 50, seed=9)
        path = tmp_path / "round.csv"
        save_table(ds, path)
        back = load_table(path)
        np.testing.assert_array_equal(back.features, ds.features)
        np.testing.assert_array_equal(back.labels, ds.labels)


class TestStandardizer:
    def test_train_moments(self):
        rng = np.random.default_rng(10)
        X = rng.normal(3, 5, (200, 4))
        std = Standardizer.fit(X)
        Z = std.transform(X)
        assert np.abs(Z.mean(axis=0)).max() < 1e-10
        assert np.abs(Z.std(axis=0) - 1).max() < 1e-10

    def test_zero_variance_maps_to_zero(self):
        X = np.column_stack([np.full(10, 7.0), np.arange(10.0)])
        Z = Standardizer.fit(X).transform(X)
        np.testing.assert_array_equal(Z[:, 0], np.zeros(10))

    def test_no_leakage(self):
        rng = np.random.default_rng(11)
        first, second = rng.normal(0, 1, (50, 2)), rng.normal(5, 3, (50, 2))
        t1, t2 = Standardizer.fit(first), Standardizer.fit(second)
        probe = rng.normal(0, 1, (5, 2))
        assert not np.allclose(t1.transform(probe), t2.transform(probe))


class TestSampleSplit:
    def test_partition(self):
        tr, va, te = sample_split(103, seed=1)
        allidx = np.concatenate([tr, va, te])
        assert sorted(allidx.tolist()) == list(range(103))

    def test_sizes(self):
        tr, va, te = sample_split(100, seed=2)
        assert (len(tr), len(va), len(te)) == (50, 25, 25)

    def test_deterministic(self):
        a = sample_split(60, seed=3)
        b = sample_split(60, seed=3)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_too_small(self):
        with pytest.raises(DatasetError):
            sample_split(3, seed=0)
