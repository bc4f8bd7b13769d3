"""Property-based tests for the numerical identities between calrisk metrics."""

import math

import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from calrisk.confusion import all_cw_counts, cwa_from_counts, macro_identity_check
from calrisk.metrics import (
    accuracy,
    csr,
    cwa,
    cwa_covariance_form,
    ece,
    ece_from_indicator,
    jensen_lower_bound,
    risk_report,
)
from calrisk.models import PredictionRecord, clip_confidences
from calrisk.ranking import auc_gap, class_auc, class_scores, monotone_invariance_check

PROPERTY_SETTINGS = settings(
    max_examples=1000,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)

TIE_GRID = np.array([0.125, 0.25, 0.5, 0.75, 0.875])

# Rounding allowance for CSR against its Jensen bound (about 45 ulp)
JENSEN_RELATIVE_SLACK = 1e-14

INCREASING_MAPS = {
    "cube": lambda x: x ** 3,
    "sqrt": math.sqrt,
    "logit": lambda x: math.log(x / (1.0 - x)),
    "exp": math.exp,
    "atan": math.atan,
}


@st.composite
def evaluation_sets(draw, min_k=2, max_k=10, max_n=200, class_confs=None):
    """
    Draw a clipped evaluation set.

    Labels are uniform over K classes. Without per-class confidences the
    predicted-class confidence is either on a coarse grid (many ties) or a
    multiple of 1/1024, so 1 - conf is exact. With them, each row is a
    Dirichlet draw and conf is the predicted-class entry.
    """
    k = draw(st.integers(min_value=min_k, max_value=max_k))
    n = draw(st.integers(min_value=1, max_value=max_n))
    if class_confs is None:
        class_confs = k > 2 or draw(st.booleans())
    tied = draw(st.booleans())
    rng = np.random.default_rng(draw(st.integers(min_value=0, max_value=2**32 - 1)))

    true_labels = rng.integers(0, k, size=n)
    pred_labels = rng.integers(0, k, size=n)
    records = []
    if class_confs:
        matrix = rng.dirichlet(np.ones(k), size=n)
        for y, y_hat, row in zip(true_labels, pred_labels, matrix):
            confs = tuple(float(c) for c in row)
            records.append(PredictionRecord(int(y), int(y_hat), confs[y_hat], confs))
    else:
        if tied:
            confs = rng.choice(TIE_GRID, size=n)
        else:
            confs = rng.integers(1, 1024, size=n) / 1024.0
        for y, y_hat, c in zip(true_labels, pred_labels, confs):
            records.append(PredictionRecord(int(y), int(y_hat), float(c)))
    return clip_confidences(records, k=k)


def pairwise_auc(scores, positives, weights):
    """O(N^2) AUC and weighted AUC with half credit for ties."""
    diff = scores[positives][:, None] - scores[~positives][None, :]
    z = (diff > 0).astype(float) + 0.5 * (diff == 0)
    w_pos = weights[positives]
    w_neg = weights[~positives]
    pair_weights = w_pos[:, None] * w_neg[None, :]
    return float(z.mean()), float(np.sum(pair_weights * z) / (w_pos.sum() * w_neg.sum()))


class TestCountProperties:
    """Properties of the confidence-weighted confusion masses."""

    @PROPERTY_SETTINGS
    @given(evaluation_sets())
    def test_structural_relations(self, s):
        """Test the four cells add up to the class masses and the total."""
        for counts in all_cw_counts(s):
            scale = max(1.0, counts.total_mass) * 1e-12
            assert abs(counts.cw_tp + counts.cw_fn - counts.cw_p) < scale
            assert abs(counts.cw_fp + counts.cw_tn - counts.cw_n) < scale
            assert abs(counts.cw_p + counts.cw_n - counts.total_mass) < scale
            assert min(counts.cw_tp, counts.cw_fp, counts.cw_fn, counts.cw_tn) >= 0.0

    @PROPERTY_SETTINGS
    @given(evaluation_sets())
    def test_macro_identity(self, s):
        """Test per-class cwAcc sums to (K - 2) + 2 cwA."""
        assert macro_identity_check(all_cw_counts(s), cwa(s)) <= 1e-10

    @PROPERTY_SETTINGS
    @given(evaluation_sets())
    def test_cwa_forms_agree(self, s):
        """Test cwA from masses, from counts and in covariance form."""
        value = cwa(s)
        assert 0.0 <= value <= 1.0
        assert abs(cwa_from_counts(all_cw_counts(s)) - value) <= 1e-10
        assert abs(cwa_covariance_form(s) - value) <= 1e-12


class TestRiskProperties:
    """Properties of the scalar risk indicators."""

    @PROPERTY_SETTINGS
    @given(evaluation_sets(), st.integers(min_value=1, max_value=30))
    def test_ece_forms_agree(self, s, m_bins):
        """Test the per-bin and residual forms of ECE."""
        value = ece(s, m_bins)
        assert 0.0 <= value <= 1.0
        assert abs(ece_from_indicator(s, m_bins) - value) <= 1e-12

    @PROPERTY_SETTINGS
    @given(evaluation_sets())
    def test_ranges(self, s):
        """Test every indicator stays in its range."""
        report = risk_report(s)
        assert 0.0 <= report.brier <= 1.0
        assert report.csr >= 0.0
        assert report.sigma_csr > 0.0
        assert 0.0 <= report.p_risk <= 1.0
        if report.gain is not None:
            assert report.gain <= 1.0 + 1e-12

    @PROPERTY_SETTINGS
    @given(evaluation_sets())
    def test_jensen_bound(self, s):
        """Test CSR never falls below (1 - Acc) / (1 - E[conf | wrong])."""
        bound = jensen_lower_bound(s)
        if accuracy(s) == 1.0:
            assert bound is None
            assert csr(s) == 0.0
        else:
            assert csr(s) >= bound * (1.0 - JENSEN_RELATIVE_SLACK)

    @PROPERTY_SETTINGS
    @given(st.data())
    def test_permutation_invariance(self, data):
        """Test record order does not change any risk value."""
        s = data.draw(evaluation_sets())
        permutation = data.draw(st.permutations(range(s.n)))
        shuffled = s.subset(permutation)
        assert risk_report(shuffled) == risk_report(s)
        for before, after in zip(all_cw_counts(s), all_cw_counts(shuffled)):
            assert before == after


class TestRankingProperties:
    """Properties of AUC and cwAUC."""

    @PROPERTY_SETTINGS
    @given(evaluation_sets(), st.data())
    def test_curve_area_matches_pairwise(self, s, data):
        """Test trapezoidal areas equal the pairwise statistics."""
        class_id = data.draw(st.integers(min_value=0, max_value=s.k - 1))
        positives = s.true_labels == class_id
        assume(0 < np.count_nonzero(positives) < s.n)

        auc, cw_auc = class_auc(s, class_id)
        expected_auc, expected_cw = pairwise_auc(class_scores(s, class_id), positives, s.confs)
        assert abs(auc - expected_auc) <= 1e-12
        assert abs(cw_auc - expected_cw) <= 1e-12
        assert 0.0 <= cw_auc <= 1.0

    @PROPERTY_SETTINGS
    @given(evaluation_sets(), st.data())
    def test_gap_matches_covariance(self, s, data):
        """Test cwAUC - AUC equals Cov(w, z) / E[w]."""
        class_id = data.draw(st.integers(min_value=0, max_value=s.k - 1))
        positives = s.true_labels == class_id
        assume(0 < np.count_nonzero(positives) < s.n)

        gap = auc_gap(s, class_id)
        assert abs(gap.delta - gap.cov_form) <= 1e-10
        assert abs(gap.cw_auc - gap.auc - gap.delta) <= 1e-15

    @PROPERTY_SETTINGS
    @given(
        evaluation_sets(max_k=2, class_confs=False),
        st.sampled_from(sorted(INCREASING_MAPS)),
    )
    def test_auc_monotone_invariance(self, s, name):
        """Test strictly increasing maps leave classical AUC unchanged."""
        positives = s.true_labels == 1
        assume(0 < np.count_nonzero(positives) < s.n)
        assert monotone_invariance_check(s, 1, INCREASING_MAPS[name]) <= 1e-12
