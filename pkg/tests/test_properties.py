import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gibbsflow import baselines, gibbs, harness, iid, nn
from gibbsflow.baselines import BinningConfig, KdeConfig

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def matrices(min_rows=2, max_rows=12, min_cols=1, max_cols=6, elements=finite):
    return st.integers(min_rows, max_rows).flatmap(
        lambda r: st.integers(min_cols, max_cols).flatmap(
            lambda c: arrays(np.float64, (r, c), elements=elements)))


def with_labels(m, classes=3):
    return st.lists(st.integers(0, classes - 1), min_size=m.shape[0], max_size=m.shape[0]).map(
        lambda ls: (m, np.array(ls)))


class TestGibbsProperties:
    @given(matrices(1, 8, 1, 10))
    def test_rows_sum_to_one(self, a):
        p = gibbs.layer_conditional(a)
        assert np.all(p >= 0)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)

    @given(matrices(1, 5, 1, 8), st.floats(-100, 100))
    def test_shift_invariance(self, a, c):
        np.testing.assert_allclose(gibbs.layer_conditional(a + c), gibbs.layer_conditional(a),
                                   atol=1e-12)

    @given(matrices(1, 10, 1, 6, st.floats(-8, 8)))
    def test_mi_x_is_mean_kl(self, a):
        t = gibbs.LayerGibbs.from_activations(a)
        q = gibbs.marginal(t)
        kl = [float(np.sum(np.where(r > 0, r * np.log2(np.where(r > 0, r, 1) / q), 0.0)))
              for r in t.conditional]
        assert abs(gibbs.mi_x(t) - np.mean(kl)) < 1e-9

    @given(matrices(2, 12, 1, 6, st.floats(-8, 8)).flatmap(with_labels))
    def test_bounds(self, case):
        a, labels = case
        t = gibbs.LayerGibbs.from_activations(a)
        s = gibbs.summarize(t, labels)
        n = a.shape[1]
        assert 0 <= s.H_F <= math.log2(n) + 1e-9
        assert s.I_X >= 0 and s.I_Y >= 0
        assert s.I_Y <= s.I_X + 1e-9
        assert s.I_X <= math.log2(a.shape[0]) + 1e-9

    @given(arrays(np.float64, 6, elements=st.floats(0.01, 1)),
           arrays(np.float64, 6, elements=st.floats(0.01, 1)),
           st.floats(0, 1))
    def test_entropy_concave(self, p, q, lam):
        p, q = p / p.sum(), q / q.sum()
        mix = lam * p + (1 - lam) * q
        mix = mix / mix.sum()
        assert gibbs.entropy(mix) >= lam * gibbs.entropy(p) + (1 - lam) * gibbs.entropy(q) - 1e-9

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.sampled_from(list(nn.Activation)))
    def test_chain_identity(self, seed, act):
        rng = np.random.default_rng(seed)
        mlp = nn.Mlp.from_sizes([4, 3, 5, 2], act)
        for p in mlp.parameters():
            p[...] = rng.normal(0, 2, p.shape)
        assert gibbs.marginal_chain_check(mlp, rng.normal(size=4)) < 1e-9


class TestBaselineProperties:
    @settings(deadline=None)
    @given(matrices(2, 12, 1, 4, st.floats(0, 1)).flatmap(with_labels),
           st.integers(2, 20))
    def test_binning_invariant_to_monotone_within_bins(self, case, bins):
        a, labels = case
        cfg = BinningConfig(bins, (0.0, 1.0))
        idx = baselines.quantize(a, cfg)
        width = 1.0 / bins
        # squeeze each value towards the left edge of its own bin: strictly monotone, same bin
        frac = np.clip(a / width - idx, 0, 1)
        b = (idx + frac ** 2 * 0.999) * width
        assert np.array_equal(baselines.quantize(b, cfg), idx)
        assert baselines.binned_mi(a, labels, cfg) == baselines.binned_mi(b, labels, cfg)

    @given(matrices(2, 15, 1, 4, st.floats(-3, 3)).flatmap(with_labels), st.integers(2, 16))
    def test_binning_monotone_under_refinement(self, case, bins):
        # doubling the bin count on a fixed range splits every bin, so states only refine
        a, labels = case
        lo, hi = float(a.min()) - 1, float(a.max()) + 1
        coarse = baselines.binned_mi(a, labels, BinningConfig(bins, (lo, hi)))
        fine = baselines.binned_mi(a, labels, BinningConfig(2 * bins, (lo, hi)))
        assert fine.I_X >= coarse.I_X - 1e-12

    @given(matrices(2, 10, 1, 4, st.floats(-3, 3)).flatmap(with_labels),
           st.floats(1e-3, 1e3))
    def test_kde_non_negative(self, case, var):
        a, labels = case
        r = baselines.kde_mi(a, labels, KdeConfig(var))
        assert r.I_X >= -1e-12 and r.I_Y >= 0
        assert r.I_X <= math.log2(a.shape[0]) + 1e-9

    @given(matrices(2, 10, 1, 4, st.floats(-3, 3)), st.floats(1e-2, 1e2))
    def test_kde_continuous_in_variance(self, a, var):
        labels = np.zeros(a.shape[0], int)
        here = baselines.kde_mi(a, labels, KdeConfig(var)).I_X
        near = baselines.kde_mi(a, labels, KdeConfig(var * (1 + 1e-7))).I_X
        assert abs(here - near) < 1e-4


def gaussian_matrices(min_rows, max_rows, min_cols, max_cols):
    """Seeded normal draws; rows are non-constant with probability one."""
    return st.tuples(st.integers(min_rows, max_rows), st.integers(min_cols, max_cols),
                     st.integers(0, 2**32 - 1), st.floats(0.01, 100)).map(
        lambda t: np.random.default_rng(t[2]).normal(0, t[3], size=(t[0], t[1])))


class TestIidProperties:
    @given(gaussian_matrices(2, 10, 3, 8))
    def test_matrix_symmetric_unit_diagonal(self, a):
        r, _ = iid.correlation_matrix(a)
        np.testing.assert_allclose(r, r.T, atol=1e-12)
        np.testing.assert_array_equal(np.diag(r), 1.0)
        assert np.all(r <= 1.0) and np.all(r >= 0.0)

    @given(gaussian_matrices(4, 10, 3, 6), st.data())
    def test_avg_affine_invariant(self, a, data):
        # the leading 0, 0, 1 guarantees both a same-label and a cross-label pair
        labels = np.array([0, 0, 1] + data.draw(st.lists(st.integers(0, 1), min_size=a.shape[0] - 3,
                                                         max_size=a.shape[0] - 3)))
        scale = np.array(data.draw(st.lists(st.floats(0.1, 10), min_size=a.shape[0],
                                            max_size=a.shape[0])))[:, None]
        shift = np.array(data.draw(st.lists(st.floats(-10, 10), min_size=a.shape[0],
                                            max_size=a.shape[0])))[:, None]
        x = iid.avg_correlations(a, labels)
        y = iid.avg_correlations(a * scale + shift, labels)
        assert x.r_same == pytest.approx(y.r_same, abs=1e-9)
        assert x.r_diff == pytest.approx(y.r_diff, abs=1e-9)
        assert -1 <= x.r_same <= 1 and -1 <= x.r_diff <= 1

    @given(matrices(1, 6, 2, 6, st.floats(-3, 3)), st.randoms(use_true_random=False))
    def test_independence_column_permutation(self, w, rnd):
        perm = list(range(w.shape[1]))
        rnd.shuffle(perm)
        g, r = iid.independence_condition(w)
        gp, rp = iid.independence_condition(w[:, perm])
        np.testing.assert_allclose(gp, g[np.ix_(perm, perm)], atol=1e-12)
        assert rp == pytest.approx(r, abs=1e-12)
        np.testing.assert_allclose(g, g.T)
        assert np.all(g >= 0)


row_values = st.floats(allow_nan=False, allow_infinity=False, width=64)


class TestTraceProperties:
    @given(st.lists(st.tuples(st.integers(0, 99), st.integers(0, 5000), row_values, row_values,
                              st.none() | row_values, st.sampled_from(harness.ESTIMATORS),
                              st.integers(1, 5), row_values, row_values, row_values, row_values)
                    .map(lambda t: harness.FlowRow(*t)), max_size=20))
    def test_csv_round_trip(self, rows):
        t = harness.FlowTrace(rows)
        assert harness.FlowTrace.from_csv(t.to_csv()).rows == rows


class TestGradientProperty:
    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(1, 5), min_size=1, max_size=3),
           st.sampled_from(list(nn.Activation)),
           st.sampled_from([nn.InitScheme.uniform(0.1), nn.InitScheme.truncated_normal(0.1),
                            nn.InitScheme.uniform(1.0)]),
           st.integers(0, 2**31 - 1))
    def test_backward_matches_finite_differences(self, hidden, act, scheme, seed):
        rng = np.random.default_rng(seed)
        mlp = nn.init_weights(nn.Mlp.from_sizes([3, *hidden, 2], act), scheme, seed)
        x = rng.normal(size=(4, 3))
        y = rng.integers(0, 2, 4)
        assert nn.grad_check(mlp, x, y) < 1e-5
