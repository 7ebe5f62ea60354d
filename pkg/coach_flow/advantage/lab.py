"""
Statistical checks of the group advantage estimators on single-state bandit problems whose
exact policy gradient is known in closed form.
"""
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from loguru import logger
from pydantic import BaseModel
from scipy.stats import norm

from coach_flow.advantage.estimators import leave_one_out
from coach_flow.model.advantage import BanditOracle, EstimatorTag, LabRow
from coach_flow.model.config import LabConfig
from coach_flow.utils import derive_seed

UNBIASED_ESTIMATORS = {EstimatorTag.ACLOO, EstimatorTag.RLOO, EstimatorTag.NO_BASELINE, EstimatorTag.MC_VALUE}
GRPO_STD_FLOOR = 1e-4


class LabOutcome(BaseModel):
    rows: list[LabRow]
    z_critical: float
    unbiased_pass: bool
    zero_sum_pass: bool
    shift_pass: bool
    variance_fraction: float
    variance_coordinates_ordered: int
    variance_coordinates_total: int
    variance_pass: bool

    @property
    def passed(self) -> bool:
        return self.unbiased_pass and self.zero_sum_pass and self.shift_pass and self.variance_pass


def exact_gradient(oracle: BanditOracle) -> np.ndarray:
    """Gradient of J = sum_a pi_a Q_a with respect to the logits: pi_a (Q_a - J)."""
    if oracle.arms > 10_000:
        raise ValueError("exact enumeration is limited to 10^4 arms")
    pi, q = oracle.pi, oracle.q
    return pi * (q - pi @ q)


def random_oracle(oracle_id: int, seed: int, min_arms: int = 2, max_arms: int = 8) -> BanditOracle:
    """Logits ~ N(0, 1); values U(0, 1) plus a per-oracle offset U(0.5, 1.5)."""
    rng = np.random.default_rng(derive_seed(seed, oracle_id))
    arms = int(rng.integers(min_arms, max_arms + 1))
    logits = rng.normal(size=arms)
    pi = np.exp(logits - logits.max())
    pi /= pi.sum()
    q = rng.uniform(0.0, 1.0, size=arms) + rng.uniform(0.5, 1.5)
    return BanditOracle(oracle_id=oracle_id, probabilities=pi.tolist(), q_values=q.tolist())


def _group_advantages(estimator: EstimatorTag, q: np.ndarray, expected: float) -> np.ndarray:
    match estimator:
        case EstimatorTag.ACLOO | EstimatorTag.RLOO:
            return leave_one_out(q)
        case EstimatorTag.NO_BASELINE:
            return q
        case EstimatorTag.MC_VALUE:
            return q - expected
        case EstimatorTag.GRPO:
            if q.shape[-1] < 2:
                raise ValueError("group normalization needs k >= 2")
            return (q - q.mean(axis=-1, keepdims=True)) / (q.std(axis=-1, keepdims=True) + GRPO_STD_FLOOR)
    raise ValueError(f"unknown estimator {estimator}")


def _shard_moments(
    estimator: EstimatorTag,
    oracle: BanditOracle,
    k: int,
    size: int,
    seed_sequence: np.random.SeedSequence,
) -> tuple[int, np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed_sequence)
    pi, q = oracle.pi, oracle.q
    actions = rng.choice(oracle.arms, size=(size, k), p=pi)
    advantages = _group_advantages(estimator, q[actions], float(pi @ q))

    # group estimate (1/k) sum_i A_i (e_{a_i} - pi), the score of a softmax over logits
    gradients = np.zeros((size, oracle.arms))
    rows = np.arange(size)
    for i in range(k):
        gradients[rows, actions[:, i]] += advantages[:, i]
    gradients = (gradients - advantages.sum(axis=1, keepdims=True) * pi) / k

    mean = gradients.mean(axis=0)
    return size, mean, ((gradients - mean) ** 2).sum(axis=0)


def gradient_stats(
    estimator: EstimatorTag | str,
    oracle: BanditOracle,
    k: int,
    num_samples: int,
    seed: int,
    shard_size: int = 32768,
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Monte Carlo mean and per-coordinate variance of the group policy-gradient estimate under
    the given advantage scheme, with exact values supplied by the oracle.

    Samples are split in shards of fixed size with their own seeds and combined in shard order,
    so the result depends on `seed` only, not on `workers`.
    """
    try:
        estimator = EstimatorTag(estimator)
    except ValueError:
        logger.error("unknown estimator tag {estimator}", estimator=estimator)
        raise
    if num_samples < 1000:
        raise ValueError("gradient_stats needs at least 1000 samples")

    shard_count = math.ceil(num_samples / shard_size)
    sizes = [min(shard_size, num_samples - i * shard_size) for i in range(shard_count)]
    seeds = np.random.SeedSequence(seed).spawn(shard_count)

    def _run(index: int):
        return _shard_moments(estimator, oracle, k, sizes[index], seeds[index])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            shards = list(executor.map(_run, range(shard_count)))
    else:
        shards = [_run(index) for index in range(shard_count)]

    count, mean, squares = shards[0]
    for other_count, other_mean, other_squares in shards[1:]:
        total = count + other_count
        delta = other_mean - mean
        mean = mean + delta * other_count / total
        squares = squares + other_squares + delta**2 * count * other_count / total
        count = total
    return mean, squares / (count - 1)


def family_wise_critical_value(single_test_z: float, tests: int) -> float:
    """
    Per-test critical value whose family-wise level over `tests` two-sided tests equals the
    level of one test at `single_test_z`.
    """
    alpha = 2.0 * norm.sf(single_test_z)
    return float(norm.isf(alpha / (2.0 * max(tests, 1))))


def shift_tolerance(constant: float, scale: float) -> float:
    """Rounding of Q + C is relative to the magnitude of the shifted values."""
    return 1e-12 * max(1.0, abs(constant) + scale)


def check_zero_sum_and_shift(config: LabConfig) -> tuple[bool, bool]:
    rng = np.random.default_rng(derive_seed(config.seed, 1_000_003))
    zero_sum, shift = True, True
    for _ in range(config.shift_groups):
        k = int(rng.integers(2, 17))
        q = rng.normal(size=k) * rng.uniform(0.1, 10.0)
        constant = rng.uniform(-config.shift_max, config.shift_max)
        advantages = leave_one_out(q)
        scale = float(np.abs(q).max())
        if abs(advantages.sum()) > 1e-12 * k * max(scale, 1e-300):
            zero_sum = False
        if np.max(np.abs(leave_one_out(q + constant) - advantages)) > shift_tolerance(constant, scale):
            shift = False
    return zero_sum, shift


class VarianceOrdering(BaseModel):
    """
    Variance of the leave-one-out estimator against the estimator without baseline. The check
    is judged on the trace per oracle; per-coordinate outcomes are counted alongside.
    """

    oracles: int
    trace_wins: int
    coordinates_ordered: int
    coordinates_total: int

    @property
    def fraction(self) -> float:
        return self.trace_wins / self.oracles

    @property
    def coordinate_fraction(self) -> float:
        return self.coordinates_ordered / self.coordinates_total


def check_variance_ordering(config: LabConfig) -> VarianceOrdering:
    trace_wins, ordered, total = 0, 0, 0
    for oracle_id in range(config.variance_oracles):
        oracle = random_oracle(10_000 + oracle_id, config.seed, config.min_arms, config.max_arms)
        seed = derive_seed(config.seed, 10_000 + oracle_id, config.variance_k)
        _, acloo_variance = gradient_stats(
            EstimatorTag.ACLOO, oracle, config.variance_k, config.samples, seed,
            config.shard_size, config.workers,
        )
        _, plain_variance = gradient_stats(
            EstimatorTag.NO_BASELINE, oracle, config.variance_k, config.samples, seed,
            config.shard_size, config.workers,
        )
        trace_wins += int(acloo_variance.sum() <= plain_variance.sum())
        ordered += int(np.count_nonzero(acloo_variance <= plain_variance))
        total += oracle.arms
    return VarianceOrdering(
        oracles=config.variance_oracles,
        trace_wins=trace_wins,
        coordinates_ordered=ordered,
        coordinates_total=total,
    )


def run_estimator_lab(config: LabConfig) -> LabOutcome:
    """
    Run the full battery: unbiasedness of every unbiased estimator against the exact gradient,
    the zero-sum and shift-invariance identities, and the variance ordering against the
    estimator without baseline.
    """
    measurements = []
    for oracle_id in range(config.oracles):
        oracle = random_oracle(oracle_id, config.seed, config.min_arms, config.max_arms)
        exact = exact_gradient(oracle)
        for k in config.ks:
            for estimator in config.estimators:
                mean, variance = gradient_stats(
                    estimator, oracle, k, config.samples,
                    derive_seed(config.seed, oracle_id, k),
                    config.shard_size, config.workers,
                )
                measurements.append((estimator, oracle, k, mean - exact, variance))

    gated_tests = sum(o.arms for e, o, _, _, _ in measurements if e in UNBIASED_ESTIMATORS)
    z_critical = family_wise_critical_value(config.z_threshold, gated_tests)

    rows = []
    unbiased_pass = True
    for estimator, oracle, k, bias, variance in measurements:
        if estimator in UNBIASED_ESTIMATORS:
            standard_error = np.sqrt(variance / config.samples)
            within = np.abs(bias) <= np.maximum(z_critical * standard_error, 1e-12)
            result = "pass" if bool(np.all(within)) else "fail"
            unbiased_pass &= result == "pass"
        else:
            result = "report"
        rows.append(
            LabRow(
                estimator=estimator,
                oracle_id=oracle.oracle_id,
                k=k,
                samples=config.samples,
                bias_norm=float(np.linalg.norm(bias)),
                mean_variance=float(variance.mean()),
                result=result,
            )
        )
        if result == "fail":
            logger.warning(
                "estimator {estimator} biased on oracle {oracle_id} at k={k}, bias norm {bias_norm}",
                estimator=estimator.value,
                oracle_id=oracle.oracle_id,
                k=k,
                bias_norm=float(np.linalg.norm(bias)),
            )

    zero_sum_pass, shift_pass = check_zero_sum_and_shift(config)
    ordering = check_variance_ordering(config)
    variance_fraction = ordering.fraction
    outcome = LabOutcome(
        rows=rows,
        z_critical=z_critical,
        unbiased_pass=unbiased_pass,
        zero_sum_pass=zero_sum_pass,
        shift_pass=shift_pass,
        variance_fraction=variance_fraction,
        variance_coordinates_ordered=ordering.coordinates_ordered,
        variance_coordinates_total=ordering.coordinates_total,
        variance_pass=variance_fraction >= config.variance_fraction,
    )
    logger.info(
        "estimator lab: unbiased {unbiased}, zero-sum {zero_sum}, shift {shift}, "
        "variance ordering on {fraction} of oracles, {ordered} of {coordinates} coordinates",
        unbiased=unbiased_pass,
        zero_sum=zero_sum_pass,
        shift=shift_pass,
        fraction=variance_fraction,
        ordered=ordering.coordinates_ordered,
        coordinates=ordering.coordinates_total,
    )
    return outcome
