import math

import numpy as np
import pytest

import oracles
from compriskacc.data import CompetingRiskSample
from compriskacc.errors import NoCases, NoControls, NoPairs, RawMarkerNotAllowed
from compriskacc.kernel import CaseWeightMatrix, case_weights
from compriskacc.metrics import (
    abs_err,
    accuracy_report,
    auc_concordance,
    brier,
    kullback_leibler,
    roc_curve,
    sensitivity,
    specificity,
)


def matrix(w1, w2=None):
    w1 = np.asarray(w1, dtype=float)
    w2 = np.zeros_like(w1) if w2 is None else np.asarray(w2, dtype=float)
    return CaseWeightMatrix(tau=1.0, weights=np.column_stack([w1, w2]))


@pytest.fixture
def four():
    return matrix([1, 0.5, 0, 0]), np.array([0.9, 0.6, 0.4, 0.2])


def test_four_subject_sensitivity(four):
    w, u = four
    assert sensitivity(w, u, 0.5) == pytest.approx(1.0)


def test_four_subject_specificity(four):
    w, u = four
    assert specificity(w, u, 0.5, "A") == pytest.approx(0.8)


def test_definition_b_control_mass():
    w = matrix([0.2, 0, 1, 0], [0.3, 1, 0, 0])
    u = np.array([0.1, 0.2, 0.8, 0.7])
    # B control mass: (0.5, 0, 0, 1); U <= 0.5 holds for the first only
    assert specificity(w, u, 0.5, "B") == pytest.approx(0.5 / 1.5)
    assert specificity(w, u, 0.5, "A") == pytest.approx((0.8 + 1.0) / 2.8)


def test_roc_endpoints_and_point_count(rng):
    u = np.round(rng.random(30), 1)
    w = matrix(rng.random(30))
    roc = roc_curve(w, u, "A")
    assert roc.thresholds.size == np.unique(u).size + 2
    assert (roc.sensitivity[0], roc.specificity[0]) == (0.0, 1.0)
    assert (roc.sensitivity[-1], roc.specificity[-1]) == (1.0, 0.0)
    assert np.all(np.diff(roc.sensitivity) >= 0)
    assert np.all(np.diff(roc.specificity) <= 0)
    for c, se, sp in roc.points[1:-1]:
        assert se == pytest.approx(sensitivity(w, u, c), abs=1e-12)
        assert sp == pytest.approx(specificity(w, u, c, "A"), abs=1e-12)


def test_perfect_separation():
    w = matrix([1, 1, 1, 0, 0, 0])
    u = np.array([0.9, 0.8, 0.7, 0.3, 0.2, 0.1])
    assert roc_curve(w, u).auc_trapezoid == pytest.approx(1.0)
    assert auc_concordance(w, u) == pytest.approx(1.0)


def test_constant_scores_give_diagonal():
    w = matrix([1, 0.3, 0, 0.7])
    u = np.full(4, 0.4)
    roc = roc_curve(w, u)
    assert roc.thresholds.size == 3
    assert roc.auc_trapezoid == pytest.approx(0.5)
    assert auc_concordance(w, u, "A") == pytest.approx(0.5)


def test_concordance_equals_weighted_brute_force(rng):
    n = 25
    w1 = rng.random(n) * 0.6
    w2 = rng.random(n) * 0.4
    u = np.round(rng.random(n), 1)
    w = matrix(w1, w2)
    for definition, ctrl in (("A", 1 - w1), ("B", 1 - w1 - w2)):
        num = den = 0.0
        for i in range(n):
            for j in range(n):
                m = w1[i] * ctrl[j]
                den += m
                num += m * (1.0 if u[i] > u[j] else 0.5 if u[i] == u[j] else 0.0)
        assert auc_concordance(w, u, definition) == pytest.approx(num / den, abs=1e-13)
        assert abs(roc_curve(w, u, definition).auc_trapezoid - num / den) < 1e-12


def test_strict_pairing_brute_force(rng):
    n = 15
    w1 = rng.random(n)
    u = rng.random(n)
    w = matrix(w1)
    num = den = 0.0
    for i in range(n):
        for j in range(n):
            m = w1[i] * (1 - w1[i])
            den += m
            num += m * (u[i] > u[j]) + 0.5 * m * (u[i] == u[j])
    assert auc_concordance(w, u, "A", pairing="strict") == pytest.approx(num / den)
    with pytest.raises(ValueError):
        auc_concordance(w, u, pairing="other")


def test_uncensored_matches_empirical(rng):
    t, st, u = oracles.random_uncensored(rng, 80)
    s = CompetingRiskSample.from_arrays(t, st, u)
    tau = float(np.median(s.time))
    w = case_weights(s, tau)
    ref = oracles.empirical_metrics(list(s.time), list(s.status), list(s.score), tau)
    for c in (0.1, 0.5, 0.77):
        assert sensitivity(w, s.score, c) == pytest.approx(oracles.empirical_se(s.score, ref["case"], c), abs=1e-12)
        for d in "AB":
            sp = oracles.empirical_sp(s.score, ref[f"ctrl_{d.lower()}"], c)
            assert specificity(w, s.score, c, d) == pytest.approx(sp, abs=1e-12)
    rep = accuracy_report(w, s.score)
    for key in ("auc_a", "auc_b", "brier", "kl", "abs_err"):
        assert getattr(rep, key) == pytest.approx(ref[key], abs=1e-12)


def test_calibration_constant_prediction():
    w = matrix([1, 0, 0.4, 0.25])
    u = np.full(4, 0.5)
    assert brier(w, u) == pytest.approx(0.25)
    assert abs_err(w, u) == pytest.approx(0.5)
    assert kullback_leibler(w, u) == pytest.approx(math.log(2))


def test_calibration_perfect_prediction():
    w = matrix([1, 0, 0, 1, 1])
    u = w.case_mass.copy()
    assert brier(w, u) == 0.0
    assert abs_err(w, u) == 0.0
    kl, clipped = kullback_leibler(w, u, return_clipped=True)
    assert 0.0 <= kl < 1e-11
    assert clipped == 5


def test_kl_against_binary_cross_entropy(rng):
    case = rng.random(40) < 0.4
    u = rng.uniform(0.01, 0.99, 40)
    w = matrix(case.astype(float))
    bce = -np.mean(np.where(case, np.log(u), np.log(1 - u)))
    assert kullback_leibler(w, u) == pytest.approx(bce, rel=1e-13)
    assert abs_err(w, u) == pytest.approx(np.mean(np.abs(case - u)), rel=1e-13)


def test_raw_marker_rejected_for_calibration():
    w = matrix([1, 0, 0])
    u = np.array([2.0, -1.0, 0.3])
    for f in (brier, abs_err, kullback_leibler):
        with pytest.raises(RawMarkerNotAllowed):
            f(w, u)
    rep = accuracy_report(w, u)
    assert rep.brier is None and rep.kl is None and rep.abs_err is None
    assert rep.auc_a == pytest.approx(1.0)


def test_degenerate_masses():
    u = np.array([0.1, 0.2])
    with pytest.raises(NoCases):
        sensitivity(matrix([0, 0]), u, 0.1)
    with pytest.raises(NoControls):
        specificity(matrix([1, 1]), u, 0.1)
    with pytest.raises(NoControls):
        auc_concordance(matrix([1, 1]), u)
    with pytest.raises(NoCases):
        auc_concordance(matrix([0, 0]), u)
    # case and control mass exist but never on a common pair
    w = matrix([1.0, 0.0])
    with pytest.raises(NoPairs):
        auc_concordance(w, u, pairing="strict")
