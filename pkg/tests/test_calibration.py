import json
import warnings

import numpy as np
import pytest

from sigpayoff.calibration import (
    ConditionRanges,
    Dataset,
    DatasetMode,
    FitResult,
    build_dataset,
    evaluate,
    fit,
    r_squared,
    sample_conditions,
    signature_price,
)
from sigpayoff.expected_signature import phi
from sigpayoff.market import MarketCondition, SimConfig
from sigpayoff.payoffs import GroundTruthConfig, PayoffSpec, black_scholes_price
from sigpayoff.tensor_algebra import LinearFunctional, n_words

SMALL_SIM = SimConfig(steps=16, paths=1, seed=3)
SMALL_GT = GroundTruthConfig(binomial_steps=100, mc_paths=200, mc_steps=8, seed=3)


def random_dataset(rng, n, order=2, noise=0.0):
    features = rng.normal(size=(n, n_words(order)))
    features[:, 0] = 1.0
    weights = rng.normal(size=n_words(order))
    targets = features @ weights + noise * rng.normal(size=n)
    conditions = [MarketCondition(100, 0.01, 0.2, 1)] * n
    return Dataset("pricewise", order, features, targets, conditions, [str(i) for i in range(n)]), weights


def test_r_squared_hand_example():
    assert r_squared([1, 2, 3, 4], [1.1, 1.9, 3.2, 3.8]) == pytest.approx(0.98, abs=1e-12)
    assert r_squared([1, 2, 3], [1, 2, 3]) == 1.0
    assert np.isnan(r_squared([2, 2, 2], [1, 2, 3]))
    with pytest.raises(ValueError):
        r_squared([1.0], [1.0])


def test_sample_conditions_deterministic_and_in_range():
    ranges = ConditionRanges(spot=(50, 150))
    a = sample_conditions(50, 7, ranges)
    assert a == sample_conditions(50, 7, ranges)
    assert a != sample_conditions(50, 8, ranges)
    spots = np.array([m.spot for m in a])
    vols = np.array([m.vol for m in a])
    assert spots.min() >= 50 and spots.max() <= 150
    assert vols.min() >= 0.1 and vols.max() <= 0.4
    assert all(m.maturity == 1.0 for m in a)
    assert all(m.spot == 100.0 for m in sample_conditions(5, 7))


def test_condition_ranges_round_trip():
    r = ConditionRanges(spot=(90.0, 110.0), maturity=2.0)
    assert ConditionRanges.from_dict(r.to_dict()) == r


def test_pricewise_dataset_shape(canonical_mc):
    conditions = sample_conditions(100, 1)
    ds = build_dataset(PayoffSpec("EuropeanCall"), conditions, "pricewise", 4)
    assert ds.features.shape == (100, 121)
    assert np.all(ds.features[:, 0] == 1.0)
    assert ds.targets[0] == black_scholes_price(conditions[0], 100.0)


def test_single_condition_dataset():
    ds = build_dataset(PayoffSpec("EuropeanCall"), sample_conditions(1, 2), "pricewise", 4)
    assert ds.features.shape == (1, 121)


def test_pathwise_rejects_american_put():
    with pytest.raises(ValueError):
        build_dataset(PayoffSpec("AmericanPut"), sample_conditions(2, 0), "pathwise", 2, SMALL_SIM)


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset("pricewise", 1, np.ones((2, 3)), np.zeros(2), [], [])
    bad = np.ones((2, 4))
    bad[1, 0] = 0.5
    with pytest.raises(ValueError):
        Dataset("pricewise", 1, bad, np.zeros(2), [], [])


def test_exact_recovery_in_row_space(rng):
    ds, _ = random_dataset(rng, 60, order=2)
    result = fit(ds, ridge=0.0)
    np.testing.assert_allclose(ds.features @ result.functional.weights, ds.targets, atol=1e-10)
    assert result.train_r2 == pytest.approx(1.0, abs=1e-12)


def test_underdetermined_recovery(rng):
    ds, _ = random_dataset(rng, 5, order=2)
    result = fit(ds, ridge=0.0)
    np.testing.assert_allclose(ds.features @ result.functional.weights, ds.targets, atol=1e-10)


def test_noise_r2(rng):
    ds, _ = random_dataset(rng, 4000, order=1, noise=0.5)
    result = fit(ds)
    expected = 1 - 0.25 / ds.targets.var()
    assert result.train_r2 == pytest.approx(expected, abs=0.02)


def test_ridge_continuity(rng):
    ds, _ = random_dataset(rng, 40, order=2, noise=0.1)
    w0 = fit(ds, 0.0).functional.weights
    w1 = fit(ds, 1e-14).functional.weights
    np.testing.assert_allclose(w1, w0, atol=1e-8)
    with pytest.raises(ValueError):
        fit(ds, -1.0)


def test_row_permutation_invariance(rng):
    ds, _ = random_dataset(rng, 30, order=2, noise=0.1)
    perm = rng.permutation(30)
    shuffled = Dataset(ds.mode, ds.order, ds.features[perm], ds.targets[perm], ds.conditions, ds.ids)
    np.testing.assert_allclose(fit(shuffled).functional.weights, fit(ds).functional.weights, rtol=1e-9, atol=1e-12)


def test_pathwise_forward_is_exact():
    spec = PayoffSpec("Forward", moneyness=0.9)
    ds = build_dataset(spec, sample_conditions(20, 4), "pathwise", 2, SMALL_SIM, paths_per_condition=5)
    assert ds.features.shape == (100, n_words(2))
    assert fit(ds, 0.0).train_r2 == pytest.approx(1.0, abs=1e-12)


def test_pathwise_degenerate_targets_give_nan_r2():
    # a constant target has no variance to explain
    ds, _ = random_dataset(np.random.default_rng(0), 10, order=1)
    flat = Dataset(ds.mode, ds.order, ds.features, np.full(10, 3.0), ds.conditions, ds.ids)
    assert np.isnan(fit(flat).train_r2)


def test_fit_result_json_round_trip(rng):
    ds, _ = random_dataset(rng, 30, order=2, noise=0.1)
    result = fit(ds)
    result.meta["train_seed"] = 17
    back = FitResult.from_json(result.to_json())
    assert back.functional == result.functional
    assert back.ridge == result.ridge and back.train_r2 == result.train_r2
    assert back.meta == {"train_seed": 17}
    doc = json.loads(result.to_json())
    assert [w["word"] for w in doc["weights"][:4]] == ["", "1", "2", "3"]


def test_fit_result_rejects_bad_weights(rng):
    ds, _ = random_dataset(rng, 10, order=1)
    doc = json.loads(fit(ds).to_json())
    doc["weights"] = doc["weights"][::-1]
    with pytest.raises(ValueError):
        FitResult.from_json(json.dumps(doc))


def test_signature_price_discounts_pathwise(canonical_mc):
    weights = np.zeros(n_words(2))
    weights[0] = 1.0
    f = LinearFunctional(weights, 2)
    assert signature_price(FitResult(f, 0, 1, 0, "pricewise"), canonical_mc) == 1.0
    assert signature_price(FitResult(f, 0, 1, 0, "pathwise"), canonical_mc) == pytest.approx(np.exp(-0.05))


def test_evaluate_small_pricewise():
    spec = PayoffSpec("EuropeanCall")
    train = build_dataset(spec, sample_conditions(40, 1), "pricewise", 3)
    result = fit(train)
    r2, rows = evaluate(result, sample_conditions(20, 2), spec)
    assert len(rows) == 20 and r2 > 0.99
    assert rows[0].sig_price == pytest.approx(float(result.functional.weights @ phi(rows[0].condition, 3).coeffs))


def test_evaluate_constant_prices_warns():
    spec = PayoffSpec("Forward")
    result = fit(build_dataset(spec, sample_conditions(5, 1), "pricewise", 1))
    same = [MarketCondition(100, 0.02, 0.2, 1)] * 3
    with pytest.warns(RuntimeWarning):
        r2, _ = evaluate(result, same, spec)
    assert np.isnan(r2)
    with pytest.raises(ValueError):
        evaluate(result, [], spec)


def test_evaluate_uses_test_stream():
    spec = PayoffSpec("LookbackFloatingCall")
    conds = sample_conditions(3, 1)
    train = build_dataset(spec, conds, "pricewise", 1, gt=SMALL_GT)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        _, rows = evaluate(fit(train), conds, spec, SMALL_GT)
    assert [r.true_price for r in rows] != list(train.targets)
