import math

import numpy as np
import pytest

from gibbsflow import iid


def pearson_by_hand(a, b):
    n = len(a)
    ma, mb = sum(a) / n, sum(b) / n
    num = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    den = math.sqrt(sum((x - ma) ** 2 for x in a)) * math.sqrt(sum((y - mb) ** 2 for y in b))
    return num / den


class TestSampleCorrelation:
    def test_self(self):
        assert iid.sample_correlation([1, 5, 2], [1, 5, 2]) == pytest.approx(1.0)

    def test_negated(self):
        a = np.array([-1.5, 0.5, 1.0])
        assert iid.sample_correlation(a, -a) == pytest.approx(-1.0)

    def test_fixture(self):
        a, b = [1, 2, 3, 4], [1, 3, 2, 4]
        assert pearson_by_hand(a, b) == pytest.approx(0.8, abs=1e-15)
        assert iid.sample_correlation(a, b) == pytest.approx(0.8, abs=1e-12)

    def test_constant_vector(self):
        with pytest.raises(ValueError, match="constant"):
            iid.sample_correlation([2, 2, 2], [1, 2, 3])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            iid.sample_correlation([1, 2], [1, 2, 3])


class TestCorrelationMatrix:
    def test_unit_diagonal_and_symmetry(self):
        a = np.random.default_rng(0).normal(size=(7, 5))
        r, _ = iid.correlation_matrix(a)
        np.testing.assert_array_equal(np.diag(r), 1.0)
        np.testing.assert_allclose(r, r.T, atol=1e-15)

    def test_orthogonal_rows(self):
        r, _ = iid.correlation_matrix(np.array([[1.0, -1.0, 0.0, 0.0], [0.0, 0.0, 1.0, -1.0]]))
        assert r[0, 1] == pytest.approx(0.0, abs=1e-15)

    def test_matches_pairwise_calls(self):
        a = np.array([[0.3, 1.2, -0.4, 2.0], [1.0, 0.1, 0.5, -0.2], [0.0, 2.2, 1.1, 0.7]])
        r, _ = iid.correlation_matrix(a, absolute=False)
        for i in range(3):
            for j in range(3):
                if i != j:
                    assert r[i, j] == pytest.approx(iid.sample_correlation(a[i], a[j]), abs=1e-12)

    def test_label_block_order(self):
        a = np.random.default_rng(1).normal(size=(6, 4))
        labels = np.array([1, 0, 1, 0, 2, 0])
        r, order = iid.correlation_matrix(a, labels)
        assert labels[order].tolist() == [0, 0, 0, 1, 1, 2]
        assert r[0, 3] == pytest.approx(abs(iid.sample_correlation(a[order[0]], a[order[3]])))

    def test_cap(self):
        with pytest.raises(ValueError, match="cap"):
            iid.correlation_matrix(np.random.default_rng(0).normal(size=(11, 3)), max_samples=10)


class TestAvgCorrelations:
    def test_identical_within_orthogonal_across(self):
        u = np.array([1.0, -1.0, 0.0, 0.0])
        v = np.array([0.0, 0.0, 1.0, -1.0])
        out = iid.avg_correlations(np.array([u, u, v, v]), [0, 0, 1, 1])
        assert out.r_same == pytest.approx(1.0)
        assert out.r_diff == pytest.approx(0.0, abs=1e-15)

    def test_matches_explicit_pair_loop(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(12, 6))
        labels = rng.integers(0, 3, 12)
        same, diff = [], []
        for i in range(12):
            for j in range(12):
                if i != j:
                    r = pearson_by_hand(list(a[i]), list(a[j]))
                    (same if labels[i] == labels[j] else diff).append(r)
        out = iid.avg_correlations(a, labels)
        assert out.r_same == pytest.approx(np.mean(same), abs=1e-12)
        assert out.r_diff == pytest.approx(np.mean(diff), abs=1e-12)

    def test_single_label(self):
        with pytest.raises(ValueError, match="cross-label"):
            iid.avg_correlations(np.random.default_rng(0).normal(size=(4, 3)), [1, 1, 1, 1])

    def test_singleton_labels(self):
        with pytest.raises(ValueError, match="same-label"):
            iid.avg_correlations(np.random.default_rng(0).normal(size=(3, 3)), [0, 1, 2])


class TestWeightConditions:
    def test_orthogonal_columns(self):
        gram, r_f = iid.independence_condition(np.eye(4)[:, :3])
        np.testing.assert_array_equal(gram - np.diag(np.diag(gram)), 0.0)
        assert r_f == 0.0

    def test_duplicate_column(self):
        w = np.array([[1.0, 1.0], [2.0, 2.0], [-3.0, -3.0]])
        gram, r_f = iid.independence_condition(w)
        assert gram[0, 1] == pytest.approx(14.0)
        assert r_f == pytest.approx(14.0)

    def test_random_fixture(self):
        w = np.random.default_rng(3).normal(size=(4, 3))
        gram, r_f = iid.independence_condition(w)
        direct = [[abs(sum(w[n, k] * w[n, kp] for n in range(4))) for kp in range(3)] for k in range(3)]
        np.testing.assert_allclose(gram, direct, rtol=1e-12)
        assert r_f == pytest.approx((direct[0][1] + direct[0][2] + direct[1][2]) / 3)

    def test_identical_constructed(self):
        rng = np.random.default_rng(4)
        w = rng.normal(size=(6, 5))
        b = -0.5 * w.sum(axis=0) + 1.3
        slope, expected, samples = iid.identical_condition(w, b, 0.5)
        assert abs(slope - (-0.5)) < 1e-9
        assert expected == -0.5
        assert samples.shape == (10, 2)

    def test_two_neurons(self):
        w = np.array([[1.0, 0.0], [1.0, 0.5]])
        slope, _, samples = iid.identical_condition(w, np.array([0.3, -0.6]), 0.1)
        np.testing.assert_allclose(samples, [[1.5, 0.9]])
        assert slope == pytest.approx(0.6)

    def test_zero_abscissae(self):
        w = np.ones((3, 3))
        slope, _, _ = iid.identical_condition(w, np.array([0.0, 1.0, 2.0]), 0.2)
        assert slope is None

    def test_validation(self):
        with pytest.raises(ValueError):
            iid.independence_condition(np.ones((3, 1)))
        with pytest.raises(ValueError):
            iid.identical_condition(np.ones((3, 2)), np.ones(3), 0.0)

    def test_report_csv(self, tmp_path):
        rep = iid.weight_conditions(np.array([[1.0, 2.0], [0.0, 1.0]]), np.array([0.5, 0.0]), 0.25)
        gram_path, pairs_path = rep.write_csv(tmp_path / "layer1")
        assert gram_path.read_text() == "1.0,2.0\n2.0,5.0\n"
        assert pairs_path.read_text() == "weight_sum_diff,bias_diff\n-2.0,0.5\n"
        assert rep.expected_slope == -0.25


class TestPgm:
    def test_round_trip(self, tmp_path):
        m = np.linspace(0, 1, 12).reshape(3, 4)
        iid.write_pgm(tmp_path / "m.pgm", m)
        back = iid.read_pgm(tmp_path / "m.pgm")
        np.testing.assert_array_equal(back, np.rint(m * 255).astype(np.uint8))
        assert (tmp_path / "m.pgm").read_bytes().startswith(b"P5\n4 3\n255\n")

    def test_whitespace_pixels(self, tmp_path):
        # byte values 9..13 and 32 are whitespace and must survive the header parse
        raw = np.array([[9, 10, 32], [13, 0, 255]], dtype=np.uint8)
        iid.write_pgm(tmp_path / "w.pgm", raw, vmin=0, vmax=255)
        np.testing.assert_array_equal(iid.read_pgm(tmp_path / "w.pgm"), raw)

    def test_not_pgm(self, tmp_path):
        (tmp_path / "x").write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
        with pytest.raises(ValueError):
            iid.read_pgm(tmp_path / "x")
