import numpy as np
import pytest

from sigpayoff.market import (
    MarketCondition,
    SimConfig,
    discount_factor,
    mc_expected_signature,
    path_stream,
    simulate_gbm_path,
    simulate_gbm_values,
    stream_key,
)
from sigpayoff.tensor_algebra import project


def terminal_values(mc, n, seed=11, steps=1):
    return simulate_gbm_values(mc, steps, 0, n, seed, "test-terminal")[:, -1]


def test_market_condition_validation():
    with pytest.raises(ValueError):
        MarketCondition(-1, 0.0, 0.2, 1)
    with pytest.raises(ValueError):
        MarketCondition(1, 0.0, 0.0, 1)
    with pytest.raises(ValueError):
        MarketCondition(1, 0.0, 0.2, 0)
    MarketCondition(1, -0.01, 0.2, 1)


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(steps=0)
    with pytest.raises(ValueError):
        SimConfig(paths=0)
    with pytest.raises(ValueError):
        SimConfig(seed=-1)


def test_vanishing_vol_is_deterministic_growth():
    mc = MarketCondition(100.0, 0.05, 1e-12, 2.0)
    path = simulate_gbm_path(mc, 50, path_stream(3, 0, "t"))
    assert path.values[-1] == pytest.approx(100 * np.exp(0.1), rel=1e-10)
    assert path.times[-1] == 2.0
    assert path.values[0] == 100.0


@pytest.mark.parametrize("n", [1, 2, 3])
def test_terminal_moments(canonical_mc, n):
    x = terminal_values(canonical_mc, 50_000) ** n
    mc = canonical_mc
    exact = mc.spot**n * np.exp(n * mc.rate * mc.maturity + n * (n - 1) * mc.vol**2 * mc.maturity / 2)
    se = x.std(ddof=1) / np.sqrt(x.size)
    assert abs(x.mean() - exact) < 3 * se


def test_martingale(canonical_mc):
    disc = discount_factor(canonical_mc) * terminal_values(canonical_mc, 100_000, seed=5)
    se = disc.std(ddof=1) / np.sqrt(disc.size)
    assert abs(disc.mean() - canonical_mc.spot) < 3 * se


def test_discount_factor():
    assert discount_factor(MarketCondition(1, 0.0, 0.2, 3)) == 1.0
    assert discount_factor(MarketCondition(1, 0.05, 0.2, 1)) == pytest.approx(np.exp(-0.05), rel=1e-15)
    assert discount_factor(MarketCondition(1, -0.01, 0.2, 1)) > 1.0


def test_path_streams_independent_of_batching(canonical_mc):
    block = simulate_gbm_values(canonical_mc, 12, 3, 9, 42, "x")
    for row, k in zip(block, range(3, 9)):
        single = simulate_gbm_path(canonical_mc, 12, path_stream(42, k, "x"))
        np.testing.assert_array_equal(row, single.values)


def test_stream_keys_differ_by_tag_and_seed():
    keys = {stream_key(0, "train"), stream_key(0, "test"), stream_key(1, "train"), stream_key(0, "train", 1)}
    assert len(keys) == 4


def test_mc_expected_signature_exact_coordinates(canonical_mc):
    mean, se = mc_expected_signature(canonical_mc, SimConfig(steps=16, paths=3000, seed=1), 3)
    assert project(mean, ()) == 1.0 and project(se, ()) == 0.0
    assert project(mean, (1,)) == pytest.approx(canonical_mc.maturity, abs=1e-12)
    assert project(se, (1,)) < 1e-12
    assert project(mean, (3,)) == pytest.approx(canonical_mc.spot, rel=1e-12)


def test_mc_expected_signature_level_one_drift(canonical_mc):
    mc = canonical_mc
    mean, se = mc_expected_signature(mc, SimConfig(steps=8, paths=20_000, seed=2), 2)
    exact = mc.spot * np.expm1(mc.rate * mc.maturity)
    assert abs(project(mean, (2,)) - exact) < 3 * project(se, (2,))


def test_mc_expected_signature_deterministic_under_parallelism(canonical_mc):
    cfg = SimConfig(steps=5, paths=5000, seed=9)
    serial = mc_expected_signature(canonical_mc, cfg, 3)
    parallel = mc_expected_signature(canonical_mc, cfg, 3, n_jobs=2)
    assert serial[0] == parallel[0]
    assert serial[1] == parallel[1]
