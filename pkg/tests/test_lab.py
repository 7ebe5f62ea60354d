import numpy as np
import pytest

from coach_flow.advantage.estimators import leave_one_out
from coach_flow.advantage.lab import (
    check_variance_ordering,
    check_zero_sum_and_shift,
    exact_gradient,
    family_wise_critical_value,
    gradient_stats,
    random_oracle,
    run_estimator_lab,
    shift_tolerance,
)
from coach_flow.model.advantage import BanditOracle, EstimatorTag
from coach_flow.model.config import LabConfig

SMALL_LAB = LabConfig(
    oracles=3,
    ks=[2, 4],
    samples=5000,
    variance_oracles=5,
    shift_groups=200,
    shard_size=1000,
)


def test_exact_gradient_constant_payoff():
    oracle = BanditOracle(probabilities=[0.25] * 4, q_values=[0.7] * 4)

    np.testing.assert_allclose(exact_gradient(oracle), 0.0, atol=1e-15)


def test_exact_gradient_two_arms():
    oracle = BanditOracle(probabilities=[0.5, 0.5], q_values=[1.0, 0.0])

    np.testing.assert_allclose(exact_gradient(oracle), [0.25, -0.25])


def test_exact_gradient_three_arms():
    oracle = BanditOracle(probabilities=[1 / 3] * 3, q_values=[3.0, 0.0, 0.0])

    np.testing.assert_allclose(exact_gradient(oracle), [2 / 3, -1 / 3, -1 / 3])


def test_oracle_rejects_bad_distribution():
    with pytest.raises(ValueError):
        BanditOracle(probabilities=[0.5, 0.6], q_values=[1.0, 0.0])


def test_random_oracle_is_deterministic():
    assert random_oracle(4, seed=1) == random_oracle(4, seed=1)
    assert random_oracle(4, seed=1) != random_oracle(5, seed=1)
    assert 2 <= random_oracle(4, seed=1, min_arms=2, max_arms=8).arms <= 8


@pytest.mark.parametrize("estimator", ["acloo", "no_baseline", "mc_value", "rloo"])
def test_unbiased_estimators(estimator):
    for oracle_id in range(3):
        oracle = random_oracle(oracle_id, seed=0)
        mean, variance = gradient_stats(estimator, oracle, 4, 20_000, seed=oracle_id)

        standard_error = np.sqrt(variance / 20_000)
        assert np.all(np.abs(mean - exact_gradient(oracle)) <= 4.5 * standard_error + 1e-12)


def test_leave_one_out_reduces_variance():
    for oracle_id in range(5):
        oracle = random_oracle(oracle_id, seed=0)
        _, acloo_variance = gradient_stats(EstimatorTag.ACLOO, oracle, 4, 20_000, seed=1)
        _, plain_variance = gradient_stats(EstimatorTag.NO_BASELINE, oracle, 4, 20_000, seed=1)

        assert acloo_variance.sum() < plain_variance.sum()


def test_workers_do_not_change_statistics():
    oracle = random_oracle(2, seed=0)

    single = gradient_stats("acloo", oracle, 4, 5000, seed=9, shard_size=1000, workers=1)
    threaded = gradient_stats("acloo", oracle, 4, 5000, seed=9, shard_size=1000, workers=4)

    np.testing.assert_array_equal(single[0], threaded[0])
    np.testing.assert_array_equal(single[1], threaded[1])


def test_unknown_estimator():
    with pytest.raises(ValueError):
        gradient_stats("vtrace", random_oracle(0, seed=0), 4, 5000, seed=0)


def test_too_few_samples():
    with pytest.raises(ValueError):
        gradient_stats("acloo", random_oracle(0, seed=0), 4, 999, seed=0)


def test_family_wise_critical_value():
    assert family_wise_critical_value(3.0, 1) == pytest.approx(3.0)
    assert family_wise_critical_value(3.0, 100) > family_wise_critical_value(3.0, 10) > 3.0


def test_identities_hold():
    assert check_zero_sum_and_shift(SMALL_LAB) == (True, True)


def test_shift_tolerance_grows_with_the_constant():
    assert shift_tolerance(0.5, 0.2) == 1e-12
    assert shift_tolerance(-1e6, 2.0) == pytest.approx(1e-12 * (1e6 + 2.0))


@pytest.mark.parametrize("constant", [1e6, -1e6])
def test_large_shift_is_within_tolerance(constant):
    q = np.array([0.3, -1.2, 0.7, 2.1, 0.05])

    difference = np.max(np.abs(leave_one_out(q + constant) - leave_one_out(q)))

    assert difference <= shift_tolerance(constant, float(np.abs(q).max()))
    assert shift_tolerance(constant, float(np.abs(q).max())) > 1e-7


def test_variance_ordering_counts_coordinates():
    ordering = check_variance_ordering(SMALL_LAB)
    arms = sum(
        random_oracle(10_000 + oracle_id, SMALL_LAB.seed, SMALL_LAB.min_arms, SMALL_LAB.max_arms).arms
        for oracle_id in range(SMALL_LAB.variance_oracles)
    )

    assert ordering.oracles == SMALL_LAB.variance_oracles
    assert 0 <= ordering.trace_wins <= ordering.oracles
    assert ordering.coordinates_total == arms
    assert 0 <= ordering.coordinates_ordered <= ordering.coordinates_total
    assert ordering.coordinate_fraction == ordering.coordinates_ordered / arms


def test_small_battery_passes():
    outcome = run_estimator_lab(SMALL_LAB)

    assert outcome.passed
    assert len(outcome.rows) == 3 * 2 * 4
    assert {row.result for row in outcome.rows if row.estimator == EstimatorTag.GRPO} == {"report"}
    assert all(row.result == "pass" for row in outcome.rows if row.estimator == EstimatorTag.ACLOO)
    assert outcome.variance_fraction >= 0.95
    assert outcome.variance_coordinates_total == check_variance_ordering(SMALL_LAB).coordinates_total
    assert 0 < outcome.variance_coordinates_ordered <= outcome.variance_coordinates_total
    assert outcome.z_critical > SMALL_LAB.z_threshold


def test_lab_config_rejects_small_groups():
    with pytest.raises(ValueError):
        LabConfig(ks=[1, 4])


@pytest.mark.slow
def test_default_battery_passes():
    outcome = run_estimator_lab(LabConfig(workers=4))

    assert outcome.passed
    assert len(outcome.rows) == 20 * 3 * 4
