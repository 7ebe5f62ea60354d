from typing import Sequence

import numpy as np
from loguru import logger

from coach_flow.exceptions import InsufficientGroupError
from coach_flow.model.advantage import AdvantageRecord, EstimatorTag, QGroup


def leave_one_out(values: np.ndarray) -> np.ndarray:
    """
    values_i minus the mean of the other k - 1 values, along the last axis. Written as
    k / (k - 1) * (values_i - mean) so the result sums to zero up to rounding.
    """
    k = values.shape[-1]
    if k < 2:
        logger.error("leave-one-out baseline needs at least 2 values, got {k}", k=k)
        raise InsufficientGroupError(f"group of {k} is too small for a leave-one-out baseline")
    return (k / (k - 1)) * (values - values.mean(axis=-1, keepdims=True))


def acloo(group: QGroup) -> list[AdvantageRecord]:
    """Leave-one-out advantages of the k critic values of a state's action group."""
    advantages = leave_one_out(np.asarray(group.q_values, dtype=np.float64))
    return [
        AdvantageRecord(
            action=action,
            advantage=float(advantage),
            old_logprob=old_logprob,
            estimator=EstimatorTag.ACLOO,
            features=group.features,
        )
        for action, advantage, old_logprob in zip(group.actions, advantages, group.old_logprobs)
    ]


def no_baseline(group: QGroup) -> list[AdvantageRecord]:
    """Raw critic values as advantages, the vanilla actor-critic estimator."""
    return [
        AdvantageRecord(
            action=action,
            advantage=q,
            old_logprob=old_logprob,
            estimator=EstimatorTag.NO_BASELINE,
            features=group.features,
        )
        for action, q, old_logprob in zip(group.actions, group.q_values, group.old_logprobs)
    ]


def rloo_rewards(rewards: Sequence[float]) -> list[float]:
    return leave_one_out(np.asarray(rewards, dtype=np.float64)).tolist()


def grpo_normalize(rewards: Sequence[float], std_floor: float = 1e-4, population: bool = True) -> list[float]:
    """(r - mean) / (std + std_floor) over a group of G >= 2 rewards."""
    values = np.asarray(rewards, dtype=np.float64)
    if values.size < 2:
        logger.error("group normalization needs at least 2 rewards, got {size}", size=values.size)
        raise InsufficientGroupError(f"group of {values.size} is too small to normalize")
    spread = values.std(ddof=0 if population else 1)
    return ((values - values.mean()) / (spread + std_floor)).tolist()


def mc_value_advantage(returns: Sequence[float], values: Sequence[float]) -> list[float]:
    if len(returns) != len(values):
        logger.error(
            "{returns} returns against {values} values",
            returns=len(returns),
            values=len(values),
        )
        raise ValueError("returns and values differ in length")
    return (np.asarray(returns, dtype=np.float64) - np.asarray(values, dtype=np.float64)).tolist()


def whiten(records: list[AdvantageRecord], eps: float = 1e-8) -> list[AdvantageRecord]:
    """Batch-normalize advantages to zero mean and unit variance."""
    if len(records) < 2:
        return records
    values = np.array([record.advantage for record in records])
    normalized = (values - values.mean()) / (values.std() + eps)
    return [record.model_copy(update={"advantage": float(value)}) for record, value in zip(records, normalized)]


GROUP_ESTIMATORS = {
    EstimatorTag.ACLOO: acloo,
    EstimatorTag.NO_BASELINE: no_baseline,
}
