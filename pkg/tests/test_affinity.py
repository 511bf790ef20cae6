import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from moi.affinity import (
    benjamini_hochberg,
    coexceedance,
    corr_signed,
    cosine_magnitude,
    exceedance,
    jaccard,
    mutual_info_binned,
    pair_index,
    partial_corr,
    pcorr_matrix,
    shrink,
    significance_filter,
    split_signed,
    tfidf_rescale,
)
from moi.errors import DataError
from moi.store import SampleWeights, WorkingMatrix

wide_matrices = arrays(
    np.float64,
    st.tuples(st.integers(3, 8), st.integers(2, 5)),
    elements=st.floats(-100, 100, allow_nan=False),
)


class TestCosine:
    def test_duplicated_columns(self):
        x = np.random.default_rng(0).standard_normal((50, 1))
        w = cosine_magnitude(np.hstack([x, x]))
        assert w.values[0, 1] == pytest.approx(1.0)

    def test_orthogonal_supports(self):
        w = cosine_magnitude(np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert w.values[0, 1] == 0.0

    def test_analytic_value(self):
        w = cosine_magnitude(np.array([[1.0, 1.0], [1.0, 0.0]]))
        assert w.values[0, 1] == pytest.approx(1.0 / math.sqrt(2.0))

    def test_zero_column_row_is_zero(self):
        w = cosine_magnitude(np.array([[0.0, 1.0, 2.0], [0.0, 2.0, 1.0]]))
        assert np.all(w.values[0] == 0.0) and np.all(w.values[:, 0] == 0.0)


class TestCorrelation:
    def test_negation_gives_minus_one(self):
        x = np.random.default_rng(1).standard_normal((30, 1))
        w = corr_signed(np.hstack([x, -x]))
        assert w.values[0, 1] == pytest.approx(-1.0)

    def test_constant_column_zero_with_warning(self):
        data = np.column_stack([np.ones(10), np.arange(10.0)])
        with pytest.warns(UserWarning, match="constant"):
            w = corr_signed(data)
        assert w.values[0, 1] == 0.0

    def test_spearman_monotone(self):
        x = np.array([1.0, 2.0, 3.0])
        w = corr_signed(np.column_stack([x, x**3]), method="spearman")
        assert w.values[0, 1] == pytest.approx(1.0)

    def test_needs_three_rows(self):
        with pytest.raises(DataError):
            corr_signed(np.ones((2, 2)))


class TestExceedance:
    def test_median_threshold(self):
        z = exceedance(np.array([[0.1, 0.9]]), q=0.5)
        assert np.array_equal(z.z, [[0, 1]])

    def test_constant_row_all_zero(self):
        z = exceedance(np.array([[0.3, 0.3, 0.3]]), q=0.5)
        assert np.all(z.z == 0)

    def test_high_quantile_keeps_at_most_strict_max(self):
        z = exceedance(np.array([[0.1, 0.5, 0.9, 0.9]]), q=0.999)
        assert z.z.sum() == 0  # ties at the max are not strictly above it

    def test_strict_max_survives(self):
        z = exceedance(np.array([[0.1, 0.5, 0.9]]), q=0.999)
        assert z.z.sum() <= 1


class TestCoexceedance:
    def test_disjoint(self):
        z = exceedance(np.array([[0.1, 0.9], [0.9, 0.1]]), q=0.5)
        w = coexceedance(z)
        assert w.values[0, 1] == 0.0

    def test_identical_sets(self):
        z = exceedance(np.array([[5.0, 5.0, 0.1], [3.0, 3.0, 0.2]]), q=0.25)
        w = coexceedance(z)
        assert w.values[0, 1] == pytest.approx(1.0)

    def test_half_overlap(self):
        from moi.affinity import ExceedanceIndicators

        z = ExceedanceIndicators(np.array([[1, 1], [1, 0]]), q=0.5)
        w = coexceedance(z)
        assert w.values[0, 1] == pytest.approx(0.5)

    def test_zero_weights_error(self):
        with pytest.raises(DataError):
            SampleWeights(np.zeros(2))


class TestJaccard:
    def test_cases(self):
        from moi.affinity import ExceedanceIndicators

        z = ExceedanceIndicators(np.array([[1, 1], [1, 0], [0, 0]]), q=0.5)
        w = jaccard(z)
        assert w.values[0, 1] == pytest.approx(0.5)
        disjoint = ExceedanceIndicators(np.array([[1, 0], [0, 1]]), q=0.5)
        assert jaccard(disjoint).values[0, 1] == 0.0
        same = ExceedanceIndicators(np.array([[1, 1], [1, 1]]), q=0.5)
        assert jaccard(same).values[0, 1] == pytest.approx(1.0)

    def test_empty_sets_define_zero(self):
        from moi.affinity import ExceedanceIndicators

        z = ExceedanceIndicators(np.zeros((3, 2), dtype=int), q=0.5)
        assert jaccard(z).values[0, 1] == 0.0


class TestMutualInformation:
    def test_identical_columns_two_balanced_bins(self):
        x = np.arange(1.0, 9.0).reshape(-1, 1)
        w = mutual_info_binned(np.hstack([x, x]), bins=2)
        assert w.values[0, 1] == pytest.approx(math.log(2.0))

    def test_independent_columns_near_zero(self):
        # oracle: plugin estimate on fresh large independent samples stays
        # within the stated 0.02 nats across seeds
        for seed in range(3):
            rng = np.random.default_rng(seed)
            data = rng.uniform(size=(10000, 2))
            w = mutual_info_binned(data, bins=8)
            assert w.values[0, 1] <= 0.02

    def test_requires_enough_rows(self):
        with pytest.raises(DataError):
            mutual_info_binned(np.ones((1, 2)), bins=2)


class TestPartialCorrelation:
    def test_control_equal_to_column_gives_zero(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(200)
        data = np.column_stack([x, rng.standard_normal(200), x])
        assert partial_corr(data, 0, 1, control=[2]) == pytest.approx(0.0, abs=1e-12)

    def test_empty_control_equals_pearson(self):
        rng = np.random.default_rng(3)
        data = rng.standard_normal((100, 2))
        expected = corr_signed(data).values[0, 1]
        assert partial_corr(data, 0, 1) == pytest.approx(expected, rel=1e-9)

    def test_common_cause_shrinks(self):
        # Monte-Carlo oracle: x = z + e1, y = z + e2 -> conditioning on z
        # must shrink the dependence
        rng = np.random.default_rng(4)
        z = rng.standard_normal(5000)
        x = z + rng.standard_normal(5000)
        y = z + rng.standard_normal(5000)
        data = np.column_stack([x, y, z])
        marginal = corr_signed(data).values[0, 1]
        conditional = partial_corr(data, 0, 1, control=[2])
        assert abs(conditional) < abs(marginal)

    def test_singular_control_is_handled(self):
        rng = np.random.default_rng(5)
        base = rng.standard_normal(50)
        data = np.column_stack([rng.standard_normal(50), rng.standard_normal(50), base, base])
        value = partial_corr(data, 0, 1, control=[2, 3])
        assert np.isfinite(value)

    def test_matrix_variant_symmetric(self):
        rng = np.random.default_rng(6)
        w = pcorr_matrix(rng.standard_normal((60, 4)), control=[3])
        assert np.allclose(w.values, w.values.T)


class TestTfidf:
    def test_always_exceeding_feature_zeroed(self):
        a = WorkingMatrix(np.array([[9.0, 0.1], [9.0, 0.2]]), view="magnitude")
        z = exceedance(a, q=0.4)
        assert np.all(z.z[:, 0] == 1)
        out = tfidf_rescale(a, z)
        assert np.all(out.values[:, 0] == 0.0)

    def test_rare_feature_gets_log_n(self):
        a = WorkingMatrix(np.abs(np.random.default_rng(7).standard_normal((8, 3))), view="magnitude")
        z = exceedance(a, q=0.5)
        counts = z.z.sum(axis=0)
        out = tfidf_rescale(a, z)
        for j in range(3):
            if counts[j] > 0:
                factor = math.log(8 / counts[j])
                assert np.allclose(out.values[:, j], a.values[:, j] * factor)

    def test_never_exceeding_warns(self):
        a = WorkingMatrix(np.array([[0.1, 9.0], [0.1, 9.0], [0.1, 9.0]]), view="magnitude")
        z = exceedance(a, q=0.6)
        assert z.z[:, 0].sum() == 0
        with pytest.warns(UserWarning, match="never exceed"):
            out = tfidf_rescale(a, z)
        assert np.allclose(out.values[:, 0], a.values[:, 0] * math.log(3.0))


class TestShrink:
    def make(self, values):
        from moi.affinity import AffinityMatrix

        return AffinityMatrix(np.asarray(values, float), rule="pearson", signed=True)

    def test_identity(self):
        w = self.make([[0.0, 0.3], [0.3, 0.0]])
        out = shrink(w, alpha=1.0, floor=0.0)
        assert np.array_equal(out.values, w.values)

    def test_full_shrink_equalizes(self):
        w = self.make([[0.0, 0.8, 0.2], [0.8, 0.0, 0.2], [0.2, 0.2, 0.0]])
        out = shrink(w, alpha=0.0, floor=0.0)
        off = out.values[~np.eye(3, dtype=bool)]
        assert np.allclose(off, off[0])

    def test_halfway(self):
        # one pair at 0.8, mean off-diagonal entry engineered to 0.2
        w = self.make([[0.0, 0.8, -0.1], [0.8, 0.0, -0.1], [-0.1, -0.1, 0.0]])
        out = shrink(w, alpha=0.5, floor=0.0)
        assert out.values[0, 1] == pytest.approx(0.5)

    def test_floor_zeroes_small_entries(self):
        w = self.make([[0.0, 0.8, 0.01], [0.8, 0.0, 0.01], [0.01, 0.01, 0.0]])
        out = shrink(w, alpha=1.0, floor=0.05)
        assert out.values[0, 2] == 0.0 and out.values[0, 1] == 0.8

    @given(wide_matrices)
    @settings(max_examples=25, deadline=None)
    def test_preserves_symmetry_and_diagonal(self, data):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            w = corr_signed(data)
        out = shrink(w, alpha=0.3, floor=0.0)
        assert np.allclose(out.values, out.values.T)
        assert np.all(np.diagonal(out.values) == 0.0)


class TestSignificance:
    def test_duplicated_column_retained(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal(400)
        data = np.column_stack([x, x + 1e-9 * rng.standard_normal(400), rng.standard_normal(400), rng.standard_normal(400)])
        w = corr_signed(data)
        filtered = significance_filter(w, data, permutations=199, fdr_q=0.05, seed=0)
        assert filtered.values[0, 1] == w.values[0, 1]

    def test_pure_noise_mostly_removed(self):
        rng = np.random.default_rng(9)
        data = rng.standard_normal((500, 6))
        w = corr_signed(data)
        filtered = significance_filter(w, data, permutations=199, fdr_q=0.05, seed=0)
        kept = np.count_nonzero(np.triu(filtered.values, 1))
        assert kept <= 2

    def test_too_few_permutations(self):
        data = np.random.default_rng(10).standard_normal((50, 3))
        w = corr_signed(data)
        with pytest.raises(DataError, match=">= 19"):
            significance_filter(w, data, permutations=0)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(11)
        data = rng.standard_normal((200, 5))
        w = corr_signed(data)
        a = significance_filter(w, data, permutations=99, seed=3)
        b = significance_filter(w, data, permutations=99, seed=3)
        assert np.array_equal(a.values, b.values)

    def test_works_for_cosine_rule(self):
        rng = np.random.default_rng(12)
        x = np.abs(rng.standard_normal(300))
        data = np.column_stack([x, x * 1.01, np.abs(rng.standard_normal(300))])
        w = cosine_magnitude(data)
        filtered = significance_filter(w, data, permutations=199, fdr_q=0.05, seed=0)
        assert filtered.values[0, 1] > 0
        assert filtered.values[0, 2] == 0.0


def test_pair_index_is_condensed_upper_triangle():
    d = 6
    expected = 0
    for i in range(d):
        for j in range(i + 1, d):
            assert pair_index(i, j, d) == expected
            expected += 1
    assert expected == d * (d - 1) // 2


def test_benjamini_hochberg_known_case():
    # hand-worked: sorted p = .005,.01,.03,.04,.2,.5 vs thresholds
    # .05*k/6 = .0083,.0167,.025,.0333,.0417,.05 -> largest passing rank is 2
    pvals = np.array([0.01, 0.04, 0.03, 0.005, 0.2, 0.5])
    keep = benjamini_hochberg(pvals, q=0.05)
    assert list(np.nonzero(keep)[0]) == [0, 3]


class TestSignedSplit:
    def test_reconstruction_bitwise(self):
        rng = np.random.default_rng(13)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            w = corr_signed(rng.standard_normal((40, 5)))
        layers = split_signed(w)
        assert np.array_equal(layers.positive.values - layers.negative.values, w.values)

    def test_all_positive(self):
        from moi.affinity import AffinityMatrix

        w = AffinityMatrix(np.array([[0.0, 0.4], [0.4, 0.0]]), rule="pearson", signed=True)
        layers = split_signed(w)
        assert np.all(layers.negative.values == 0.0)

    def test_negative_entry(self):
        from moi.affinity import AffinityMatrix

        w = AffinityMatrix(np.array([[0.0, -0.3], [-0.3, 0.0]]), rule="pearson", signed=True)
        layers = split_signed(w)
        assert layers.positive.values[0, 1] == 0.0
        assert layers.negative.values[0, 1] == pytest.approx(0.3)

    def test_rejects_unsigned(self):
        from moi.affinity import AffinityMatrix

        w = AffinityMatrix(np.zeros((2, 2)), rule="cosine_mag", signed=False)
        with pytest.raises(DataError):
            split_signed(w)


class TestRuleInvariants:
    @given(wide_matrices)
    @settings(max_examples=25, deadline=None)
    def test_outputs_symmetric_zero_diag_bounded(self, data):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            results = {
                "cosine": cosine_magnitude(data),
                "pearson": corr_signed(data),
                "spearman": corr_signed(data, "spearman"),
            }
        z = exceedance(data, q=0.5)
        results["coexceed"] = coexceedance(z)
        results["jaccard"] = jaccard(z)
        for name, w in results.items():
            assert np.allclose(w.values, w.values.T), name
            assert np.all(np.diagonal(w.values) == 0.0), name
        assert results["cosine"].values.min() >= 0 and results["cosine"].values.max() <= 1
        assert results["pearson"].values.min() >= -1 and results["pearson"].values.max() <= 1
        for name in ("coexceed", "jaccard"):
            assert results[name].values.min() >= 0 and results[name].values.max() <= 1, name

    @given(wide_matrices, st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_cosine_and_pearson_scale_invariant(self, data, seed):
        scales = np.random.default_rng(seed).uniform(0.1, 10.0, data.shape[1])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            base_cos = cosine_magnitude(data).values
            scaled_cos = cosine_magnitude(data * scales).values
            base_corr = corr_signed(data).values
            scaled_corr = corr_signed(data * scales).values
        assert np.allclose(base_cos, scaled_cos, atol=1e-9)
        assert np.allclose(base_corr, scaled_corr, atol=1e-9)

    @given(wide_matrices)
    @settings(max_examples=25, deadline=None)
    def test_coexceedance_never_exceeds_union_mass(self, data):
        z = exceedance(data, q=0.5)
        freq = coexceedance(z).values
        n = data.shape[0]
        col = z.z.sum(axis=0).astype(float)
        union = col[:, None] + col[None, :] - (z.z.astype(float).T @ z.z.astype(float))
        np.fill_diagonal(union, 0.0)
        assert np.all(freq * n <= union + 1e-9)
