import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mifm.gibbs import HyperState, PosteriorSamples, SampleRecord
from mifm.metrics import metric_amape, metric_recovery, metric_rmse
from mifm.model import (Dataset, ModelParams, Schema, SyntheticTruth, effective_coefficient, hypergraph_from_codes,
                        one_hot_encode, predict_mean, verify_representability)
from mifm.selection import (MarginalReport, SelectionRule, interaction_marginals, marginals_from_codes,
                            posterior_predictive, refit_least_squares, select_interactions)
from mifm.synth import REALISTIC_PLAN, ExperimentSpec, SpecError, sample_supports, synth_generate


def _samples(code_lists, n_units=4, K=1):
    recs = []
    for t, codes in enumerate(code_lists):
        Z = hypergraph_from_codes(codes, n_units)
        th = ModelParams(0.0, np.zeros(n_units), np.ones((n_units, K)), Z)
        recs.append(SampleRecord(t + 1, th, HyperState(0.0, 1.0, np.zeros(K), np.ones(K))))
    return PosteriorSamples(recs, n_units)


# -- marginals and selection ----------------------------------------------------------------

def test_marginal_counting():
    rep = interaction_marginals(_samples([["1+2", ""], ["1+2", "3"], ["2+4", "3"]]))
    assert rep.entries["1+2"] == pytest.approx(2 / 3)
    assert rep.total_samples == 3
    assert "" not in rep.entries


def test_duplicates_within_sample_count_once():
    rep = interaction_marginals(_samples([["1+2", "1+2"], ["3", "3"]]))
    assert rep.entries == {"1+2": 0.5, "3": 0.5}


def test_linear_and_nonlinear_split():
    rep = marginals_from_codes([["1", "2+3"], ["1+2+4"]])
    assert rep.linear() == ["1"]
    assert rep.nonlinear() == ["1+2+4", "2+3"]


code_st = st.sets(st.integers(1, 5), min_size=1).map(lambda s: "+".join(map(str, sorted(s))))


@given(st.lists(st.lists(code_st, min_size=1, max_size=3), min_size=1, max_size=12), st.randoms())
def test_marginals_bounds_and_permutation_invariance(per_sample, rnd):
    rep = marginals_from_codes(per_sample)
    assert all(0 < f <= 1 for f in rep.entries.values())
    assert len(rep.entries) <= min(2 ** 5 - 1, sum(len(c) for c in per_sample))
    shuffled = list(per_sample)
    rnd.shuffle(shuffled)
    assert marginals_from_codes(shuffled).entries == rep.entries


def test_threshold_selection():
    rep = MarginalReport({"1+2": 0.9, "3": 0.4}, 10)
    assert select_interactions(rep, SelectionRule(threshold=0.5)) == ["1+2"]
    assert select_interactions(rep, SelectionRule(threshold=0.0)) == ["1+2", "3"]
    # strict inequality
    assert select_interactions(MarginalReport({"1": 0.5}, 2), SelectionRule(threshold=0.5)) == []


def test_top_selection_tie_break():
    rep = MarginalReport({"1+3": 0.6, "1+2": 0.6, "4": 0.1}, 10)
    assert select_interactions(rep, SelectionRule(top=1)) == ["1+2"]
    assert select_interactions(rep, SelectionRule(top=5)) == ["1+2", "1+3", "4"]


def test_selection_rule_validation():
    for kw in ({}, {"threshold": 0.5, "top": 2}, {"threshold": 1.0}, {"top": -1}):
        with pytest.raises(ValueError):
            SelectionRule(**kw)


def test_report_csv_roundtrip(tmp_path):
    rep = marginals_from_codes([["1+2", "3"], ["1+2"], ["2+3+4"]])
    rep.to_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "encoding,depth,frequency"
    assert lines[1].startswith("1+2,2,")
    assert MarginalReport.read_csv(tmp_path / "r.csv").entries == rep.entries


# -- prediction and refit -------------------------------------------------------------------

def test_posterior_predictive_single_and_pair():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(10, 3))
    data = Dataset.from_continuous(X)
    ths = [ModelParams(rng.normal(), rng.normal(size=3), rng.normal(size=(3, 2)), rng.random((3, 2)) < 0.5)
           for _ in range(2)]
    recs = [SampleRecord(i, t, HyperState(0, 1, np.zeros(2), np.ones(2))) for i, t in enumerate(ths)]
    one = posterior_predictive(PosteriorSamples(recs[:1], 3), data)
    np.testing.assert_array_equal(one, predict_mean(ths[0], data))
    two = posterior_predictive(PosteriorSamples(recs, 3), data)
    np.testing.assert_allclose(two, (predict_mean(ths[0], data) + predict_mean(ths[1], data)) / 2, atol=1e-14)
    with pytest.raises(ValueError):
        posterior_predictive(PosteriorSamples([], 3), data)


def test_refit_recovers_true_betas():
    truth = SyntheticTruth([1.5, -2.0, 0.8], [(0, 1), (1, 2, 3), (4,)])
    rng = np.random.default_rng(1)
    X = rng.uniform(-1, 1, size=(300, 5))
    data = Dataset.from_continuous(X, truth.mean(X))
    res = refit_least_squares(truth.codes, data)
    for code, b in zip(truth.codes, truth.betas):
        assert res.coefficients[code] == pytest.approx(b, abs=1e-8)
    assert res.intercept == pytest.approx(0.0, abs=1e-8)


def test_refit_recovers_effective_coefficients_of_model():
    rng = np.random.default_rng(2)
    truth = SyntheticTruth([1.0, -1.5], [(0, 1, 2), (1, 3)])
    V = verify_representability(truth, K=1, rng=rng, n_units=4)
    Z = hypergraph_from_codes(truth.codes, 4)
    th = ModelParams(0.0, np.zeros(4), V, Z)
    X = rng.uniform(-1, 1, size=(200, 4))
    data = Dataset.from_continuous(X)
    data.y = predict_mean(th, data)
    res = refit_least_squares(truth.codes, data)
    for code, s in zip(truth.codes, truth.supports):
        assert res.coefficients[code] == pytest.approx(effective_coefficient(V, s), abs=1e-6)


def test_refit_empty_selection_is_linear_regression():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(50, 3))
    y = 1.0 + X @ [0.5, -1.0, 2.0]
    res = refit_least_squares([], Dataset.from_continuous(X, y))
    assert res.intercept == pytest.approx(1.0)
    np.testing.assert_allclose(res.linear, [0.5, -1.0, 2.0], atol=1e-10)
    assert res.coefficients == {}


def test_refit_deduplicates_and_warns_on_rank_deficiency():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(40, 3))
    data = Dataset.from_continuous(X, X[:, 0] * X[:, 1])
    res = refit_least_squares(["1+2", "1+2"], data)
    assert res.rank == 5
    assert res.coefficients["1+2"] == pytest.approx(1.0)
    Xb = np.ones((10, 2))
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        refit_least_squares(["1+2"], Dataset.from_continuous(Xb, np.ones(10)))
    assert any(issubclass(x.category, RuntimeWarning) for x in w)


def test_refit_rejects_categorical():
    schema = Schema((("c", ("a", "b")),))
    data = one_hot_encode(schema, [{"c": "a", "y": "1"}], require_response=True)
    with pytest.raises(ValueError):
        refit_least_squares([], data)


# -- metrics --------------------------------------------------------------------------------

def test_rmse_examples():
    assert metric_rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert metric_rmse([3.0, 4.0], [0.0, 0.0]) == pytest.approx(math.sqrt(12.5))
    with pytest.raises(ValueError):
        metric_rmse([1.0], [1.0, 2.0])


def test_amape_examples():
    assert metric_amape([110.0, 90.0], [100.0, 100.0]) == pytest.approx(10.0)
    assert metric_amape([5.0, 6.0], [5.0, 6.0]) == 0.0
    with pytest.raises(ZeroDivisionError):
        metric_amape([1.0, 2.0], [1.0, -1.0])


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.1, 100))
def test_metrics_against_hand_oracles_and_scaling(seed, c):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 30))
    p, t = rng.normal(size=n), rng.uniform(0.5, 2, size=n)
    rmse = math.sqrt(sum((a - b) ** 2 for a, b in zip(p, t)) / n)
    amape = 100 * sum(abs(a - b) for a, b in zip(p, t)) / sum(t)
    assert metric_rmse(p, t) == pytest.approx(rmse, abs=1e-12)
    assert metric_amape(p, t) == pytest.approx(amape, rel=1e-12)
    assert metric_rmse(c * p, c * t) == pytest.approx(c * rmse, rel=1e-12)
    assert metric_amape(c * p, c * t) == pytest.approx(amape, rel=1e-12)


def test_recovery_examples():
    truth = SyntheticTruth([1, 2, 3, 4], [(0, 1), (2,), (1, 3), (0, 2, 3)])
    assert metric_recovery(truth.codes, truth) == 1.0
    assert metric_recovery(["1+3"], truth) == 0.0
    assert metric_recovery(["1+2", "3", "2+4", "9"], truth) == 0.75


# -- synthetic generation -------------------------------------------------------------------

def test_linear_identity_scenario():
    truth = SyntheticTruth([1.0], [(0,)])
    spec = ExperimentSpec(D=3, n_train=50, n_test=10, plan=((1, 1),), noise_precision=None, truth=truth)
    train, test, _ = synth_generate(spec)
    np.testing.assert_array_equal(train.y, train.val[:, 0])


def test_generated_response_matches_independent_evaluator():
    spec = ExperimentSpec(D=8, n_train=100, n_test=20, plan=((1, 2), (2, 2), (3, 1)), noise_precision=None, seed=4)
    train, test, truth = synth_generate(spec)
    for data in (train, test):
        for x, y in zip(data.val, data.y):
            total = 0.0
            for b, s in zip(truth.betas, truth.supports):
                term = b
                for i in s:
                    term *= x[i]
                total += term
            assert y == pytest.approx(total, abs=1e-12)


def test_realistic_plan():
    spec = ExperimentSpec(n_train=20, n_test=5)
    _, _, truth = synth_generate(spec)
    depths = sorted(len(s) for s in truth.supports)
    assert depths == [1] * 5 + [2] * 5 + [3] * 3 + [4, 5, 6, 7, 8]
    assert spec.plan == REALISTIC_PLAN
    assert all(0.1 <= abs(b) <= 5.0 for b in truth.betas)


def test_synth_determinism_and_independent_sets():
    spec = ExperimentSpec(D=5, n_train=30, n_test=30, plan=((2, 2),), seed=9)
    a, b = synth_generate(spec), synth_generate(spec)
    np.testing.assert_array_equal(a[0].val, b[0].val)
    np.testing.assert_array_equal(a[1].y, b[1].y)
    assert not np.array_equal(a[0].val, a[1].val)


def test_design_types():
    for vt in ("binary", "mixed"):
        spec = ExperimentSpec(D=6, n_train=200, n_test=1, plan=((2, 1),), var_type=vt, seed=1)
        X = synth_generate(spec)[0].val
        binary_cols = [c for c in range(6) if set(np.unique(X[:, c])) <= {0.0, 1.0}]
        assert len(binary_cols) == (6 if vt == "binary" else 3)


def test_spec_errors():
    with pytest.raises(SpecError):
        ExperimentSpec(D=4, plan=((3, 5),))
    with pytest.raises(SpecError):
        ExperimentSpec(D=4, plan=((5, 1),))
    with pytest.raises(SpecError):
        ExperimentSpec(n_train=0)


def test_sample_supports_distinct_uniform():
    rng = np.random.default_rng(0)
    s = sample_supports(30, 8, 50, rng)
    assert len(set(s)) == 50 and all(len(x) == 8 for x in s)
    counts = {}
    for _ in range(6000):
        (x,) = sample_supports(4, 2, 1, rng)
        counts[x] = counts.get(x, 0) + 1
    assert len(counts) == 6 and max(counts.values()) - min(counts.values()) < 200
