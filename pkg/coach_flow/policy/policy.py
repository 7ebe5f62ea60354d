import numpy as np
from loguru import logger

from coach_flow.exceptions import NumericError
from coach_flow.policy.params import PolicyParams


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis=-1, keepdims=True)


def _check_logits(logits: np.ndarray):
    if not np.all(np.isfinite(logits)):
        logger.error("non-finite policy logits {logits}", logits=logits.tolist())
        raise NumericError("non-finite policy logits")


def action_distribution(
    policy: PolicyParams,
    features: np.ndarray,
    temperature: float = 1.0,
    use_snapshot: bool = False,
) -> np.ndarray:
    """
    Softmax over the logits theta . features / temperature.

    :param policy: the policy parameters
    :param features: a d-vector, or an n x d matrix for a batch of states
    :param temperature: sampling temperature, strictly positive
    :param use_snapshot: evaluate the frozen snapshot theta_old instead of theta
    :return: the action probabilities, one row per state for a batch
    :raises NumericError: when the logits are not finite
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    weights = policy.snapshot_weights if use_snapshot else policy.weights
    if weights is None:
        raise ValueError("policy has no snapshot")
    logits = (features @ weights.T) / temperature
    _check_logits(logits)
    return _softmax_rows(logits)


def log_probs(
    policy: PolicyParams,
    features: np.ndarray,
    temperature: float = 1.0,
    use_snapshot: bool = False,
) -> np.ndarray:
    weights = policy.snapshot_weights if use_snapshot else policy.weights
    if weights is None:
        raise ValueError("policy has no snapshot")
    logits = (features @ weights.T) / temperature
    _check_logits(logits)
    top = logits.max(axis=-1, keepdims=True)
    return logits - top - np.log(np.exp(logits - top).sum(axis=-1, keepdims=True))


def grad_log_prob(
    policy: PolicyParams,
    features: np.ndarray,
    action: int,
    temperature: float = 1.0,
) -> np.ndarray:
    """
    Gradient of log pi(action | features) with respect to theta: row `action` receives
    (1 - pi_a) x / T and every other row b receives -pi_b x / T.
    """
    probabilities = action_distribution(policy, features, temperature)
    if not 0 <= action < probabilities.shape[0]:
        raise ValueError(f"action {action} outside the action set")
    indicator = -probabilities
    indicator[action] += 1.0
    return np.outer(indicator, features) / temperature


def sample_action(probabilities: np.ndarray, rng: np.random.Generator) -> int:
    cumulative = np.cumsum(probabilities)
    index = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
    return min(index, probabilities.shape[0] - 1)


def greedy_action(policy: PolicyParams, features: np.ndarray) -> int:
    """Argmax of the logits; ties go to the lowest action index."""
    logits = policy.weights @ features
    _check_logits(logits)
    return int(np.argmax(logits))


def snapshot(policy: PolicyParams) -> PolicyParams:
    return policy.snapshot()
