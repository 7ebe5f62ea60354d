import numpy as np
from loguru import logger

from coach_flow.exceptions import CorruptRecordError
from coach_flow.model.advantage import AdvantageRecord
from coach_flow.policy.optimizer import OptimizerState, apply_update
from coach_flow.policy.params import PolicyParams
from coach_flow.policy.policy import log_probs


def ppo_objective_terms(
    ratios: np.ndarray,
    advantages: np.ndarray,
    clip_ratio: float,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Per-record clipped surrogate min(rho A, clip(rho, 1 - eps, 1 + eps) A), and the mask of
    records whose gradient flows through the unclipped branch. Ties go to the unclipped branch.
    """
    unclipped = ratios * advantages
    clipped = np.clip(ratios, 1.0 - clip_ratio, 1.0 + clip_ratio) * advantages
    return np.minimum(unclipped, clipped), unclipped <= clipped


def _check_records(old_logprobs: np.ndarray, ratios: np.ndarray | None = None):
    bad = ~np.isfinite(old_logprobs) if ratios is None else ~np.isfinite(ratios)
    if np.any(bad):
        index = int(np.argmax(bad))
        logger.error(
            "corrupt actor record {index}: old log-probability {old_logprob}",
            index=index,
            old_logprob=float(old_logprobs[index]),
        )
        raise CorruptRecordError(f"record {index} has a non-finite importance ratio")


def actor_update(
    policy: PolicyParams,
    records: list[AdvantageRecord],
    opt: OptimizerState,
    clip_ratio: float = 0.2,
    epochs: int = 1,
    temperature: float = 1.0,
) -> float:
    """
    Ascend the clipped surrogate objective over the records, taking one gradient step on the
    mean negated objective per epoch.

    :param policy: the policy to update in place
    :param records: advantage records with their state features attached
    :param opt: the actor optimizer
    :param clip_ratio: the clip range eps, in (0, 1)
    :param epochs: number of gradient steps
    :param temperature: the temperature the old log-probabilities were recorded at
    :return: the mean loss over the epochs
    :raises CorruptRecordError: when a record's importance ratio is not finite
    """
    if not 0 < clip_ratio < 1:
        raise ValueError("clip ratio must lie in (0, 1)")
    if not records:
        logger.warning("actor update called without records")
        return 0.0
    if any(record.features is None for record in records):
        raise ValueError("actor records need their state features")

    features = np.array([record.features for record in records], dtype=np.float64)
    actions = np.array([record.action for record in records], dtype=np.int64)
    advantages = np.array([record.advantage for record in records], dtype=np.float64)
    old_logprobs = np.array([record.old_logprob for record in records], dtype=np.float64)
    _check_records(old_logprobs)

    rows = np.arange(len(records))
    indicator = np.zeros((len(records), policy.shape[0]))
    indicator[rows, actions] = 1.0

    losses = []
    for _ in range(epochs):
        logprobs = log_probs(policy, features, temperature)
        ratios = np.exp(logprobs[rows, actions] - old_logprobs)
        _check_records(old_logprobs, ratios)

        objective, unclipped = ppo_objective_terms(ratios, advantages, clip_ratio)
        # d(rho A)/d theta = rho A (e_a - pi) x^T / T on the unclipped branch, zero otherwise
        weights = np.where(unclipped, advantages * ratios, 0.0)
        score = (indicator - np.exp(logprobs)) * weights[:, None]
        gradient = -(score.T @ features) / (len(records) * temperature)

        apply_update(policy, gradient, opt)
        losses.append(-float(objective.mean()))

    return float(np.mean(losses))
