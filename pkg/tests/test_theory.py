import math

import numpy as np
import pytest
from scipy import stats

from bricksketch.embedding import EmbeddingTable
from bricksketch.streams import ZipfSpec
from bricksketch.theory import (
    SubSkewnessParams,
    domain_invariance_check,
    error_bound,
    expected_sub_skewness,
    ks_component_test,
    mc_error_check,
    random_integer_items,
    random_string_items,
    sub_skewness_mc,
    sub_skewness_point,
    truncation_tail_mass,
    verify_theorem1,
    verify_theorem2,
    verify_theorem3,
)
from bricksketch import hashing


def test_point_formula_degenerate_case_returns_alpha():
    for alpha in (0.5, 0.8, 1.3):
        for r in (1, 5, 100):
            assert sub_skewness_point(alpha, r, 1, r) == pytest.approx(alpha)


def test_point_formula_zero_alpha():
    assert sub_skewness_point(0.0, 3, 4, 9) == 0.0


def test_point_formula_log_ratio():
    assert sub_skewness_point(1.0, 1, 2, 1) == pytest.approx(math.log(3) / math.log(2))


def test_point_formula_preconditions():
    with pytest.raises(ValueError):
        sub_skewness_point(1.0, 1, 0, 1)
    with pytest.raises(ValueError):
        sub_skewness_point(1.0, 5, 1, 4)


def test_expected_sub_skewness_k1_is_alpha_exactly():
    for alpha in (0.0, 0.5, 0.8, 1.5):
        for r_prime in (1, 7, 50):
            value = expected_sub_skewness(SubSkewnessParams(alpha=alpha, k=1, r_prime=r_prime))
            assert abs(value - alpha) < 1e-9


def test_expected_sub_skewness_zero_alpha():
    assert expected_sub_skewness(SubSkewnessParams(alpha=0.0, k=10, r_prime=5)) == 0.0


def test_expected_sub_skewness_rejects_thin_truncation():
    with pytest.raises(ValueError, match="truncation too small"):
        expected_sub_skewness(SubSkewnessParams(alpha=0.8, k=10, r_prime=50, d_max=5, r_max=60))


def test_expected_sub_skewness_converged_at_defaults():
    params = SubSkewnessParams(alpha=0.8, k=10, r_prime=50)
    d_max, r_max = params.resolved()
    wider = SubSkewnessParams(alpha=0.8, k=10, r_prime=50, d_max=d_max * 2, r_max=r_max * 2)
    a = expected_sub_skewness(params)
    b = expected_sub_skewness(wider)
    assert abs(a - b) <= max(truncation_tail_mass(10, 50, d_max, r_max) * 2.0, 1e-12)


def test_expected_sub_skewness_matches_mc_thinning_oracle():
    params = SubSkewnessParams(alpha=0.9, k=3, r_prime=10)
    expected = expected_sub_skewness(params)
    mc_mean, mc_se = sub_skewness_mc(0.9, 3, 10, trials=20000, seed=7)
    assert abs(expected - mc_mean) <= 3 * mc_se


def test_error_bound_values():
    assert error_bound(0.01, 5120) == pytest.approx(0.01953125)
    assert error_bound(1.0, 1) == 1.0


def test_error_bound_monotone():
    assert error_bound(0.02, 5120) < error_bound(0.01, 5120)
    assert error_bound(0.01, 10240) < error_bound(0.01, 5120)
    assert error_bound(0.01, 2560) == 2 * error_bound(0.01, 5120)


def test_error_bound_preconditions():
    with pytest.raises(ValueError):
        error_bound(0.0, 512)
    with pytest.raises(ValueError):
        error_bound(0.5, 0)


def test_mc_error_check_trivial_pass_for_huge_epsilon():
    # epsilon > d1 makes the overshoot structurally impossible: even with
    # every row's whole mass in one cell, min(m/v) - f stays below d1 * N.
    spec = ZipfSpec(n=200, alpha=0.7, length=2000, seed=1)
    result = mc_error_check(spec, epsilon=6.0, trials=3, seed=2)
    assert result["exceed_rate"] == 0.0
    assert result["pass"]


def test_mc_error_check_small_run_passes_and_never_underestimates():
    spec = ZipfSpec(n=2000, alpha=0.7, length=20000, seed=3)
    result = mc_error_check(spec, epsilon=0.01, trials=5, seed=4)
    assert result["pass"]
    assert result["exceed_rate"] <= result["bound"] + 3 * result["stderr"]
    assert result["min_overshoot"] >= -1e-4


def test_mc_error_check_with_halved_d2():
    spec = ZipfSpec(n=1000, alpha=0.7, length=10000, seed=5)
    result = mc_error_check(spec, epsilon=0.01, trials=3, seed=6, d2=2560)
    assert result["bound"] == pytest.approx(2 * error_bound(0.01, 5120))
    assert result["pass"]


def test_ks_exact_small_sample_value():
    # Fully separated samples of 4 and 4: D = 1 and the exact two-sided
    # p-value is 2 / C(8, 4) = 1/35.
    stat, p = stats.ks_2samp([1, 2, 3, 4], [5, 6, 7, 8])
    assert stat == 1.0
    assert p == pytest.approx(2 / 70, rel=1e-9)


def test_ks_statistic_matches_brute_force_ecdf_oracle():
    rng = np.random.default_rng(8)
    a = rng.normal(0, 1, 37)
    b = rng.normal(0.3, 1.2, 53)
    grid = np.concatenate([a, b])
    d_oracle = max(
        abs((a <= x).mean() - (b <= x).mean()) for x in grid
    )
    stat, _ = stats.ks_2samp(a, b)
    assert stat == pytest.approx(d_oracle, rel=1e-12)


def test_same_domain_split_passes():
    table = EmbeddingTable.default(seed=5)
    rng = np.random.default_rng(9)
    items = random_integer_items(20000, rng)
    emb = table.embed_digests(hashing.base_hash_many(items))
    _, passed = ks_component_test(emb[:10000], emb[10000:])
    assert passed


def test_integer_vs_string_domains_pass():
    table = EmbeddingTable.default(seed=6)
    results, passed = domain_invariance_check(table, samples=20000, seed=10)
    assert passed
    assert len(results) == table.d1


def test_biased_lookup_negative_control_rejects():
    # Bypass hashing: one domain reads only the low half of the table, the
    # other only the high half. The KS test must notice.
    table = EmbeddingTable.default(seed=7)
    rng = np.random.default_rng(11)
    half = table.v_dim // 2

    def biased(base):
        idx = rng.integers(0, half, size=(5000, table.d1))
        raw = table.values[base + idx]
        return raw / raw.sum(axis=1, keepdims=True)

    _, passed = ks_component_test(biased(0), biased(half))
    assert not passed


def test_random_item_generators_shapes():
    rng = np.random.default_rng(12)
    ints = random_integer_items(100, rng)
    strs = random_string_items(100, rng)
    assert all(len(i) == 8 for i in ints)
    assert all(4 <= len(s) <= 16 for s in strs)


def test_verify_theorem1_verdict_shape():
    verdict = verify_theorem1(samples=5000, seed=13)
    assert verdict["theorem"] == 1
    assert verdict["pass"] is True
    assert 0 <= verdict["bound_or_pvalue"] <= 1


def test_verify_theorem2_verdict_shape():
    verdict = verify_theorem2(alpha=0.8, k=3, r_prime=10, trials=10000, seed=14)
    assert verdict["theorem"] == 2
    assert verdict["pass"] is True
    assert verdict["statistic"] == pytest.approx(0.8, rel=0.05)


def test_verify_theorem3_verdict_shape():
    verdict = verify_theorem3(n=500, length=5000, trials=3, seed=15)
    assert verdict["theorem"] == 3
    assert verdict["pass"] is True
    assert verdict["statistic"] <= verdict["bound_or_pvalue"] + 3 * verdict["stderr"]
