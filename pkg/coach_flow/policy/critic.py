import math

import numpy as np

from coach_flow.policy.params import CriticParams


def q_value(critic: CriticParams, features: np.ndarray, action: int) -> float:
    return float(critic.weights[action] @ features)


def critic_loss_and_grad(
    critic: CriticParams,
    features: np.ndarray,
    action: int,
    target: float,
    q_old: float,
) -> tuple[float, np.ndarray]:
    """
    Clipped squared error of the Q head:

        loss = 1/2 max((Q - R)^2, (clip(Q, Q_old - eps, Q_old + eps) - R)^2)

    The gradient follows the branch attaining the max; ties go to the unclipped branch. When the
    clipped branch wins and Q lies outside the clip interval the clip is constant in the
    parameters and the gradient is exactly zero.
    """
    if not (math.isfinite(target) and math.isfinite(q_old)):
        raise ValueError("target and old prediction must be finite")

    q = q_value(critic, features, action)
    epsilon = critic.value_clip
    clipped = min(max(q, q_old - epsilon), q_old + epsilon)
    unclipped_error = (q - target) ** 2
    clipped_error = (clipped - target) ** 2

    gradient = np.zeros_like(critic.weights)
    if clipped_error > unclipped_error:
        # strictly larger only when Q sits outside the interval
        return 0.5 * clipped_error, gradient

    gradient[action] = (q - target) * features
    return 0.5 * unclipped_error, gradient


def squared_error_and_grad(
    critic: CriticParams,
    features: np.ndarray,
    action: int,
    target: float,
) -> tuple[float, np.ndarray]:
    """Unclipped 1/2 (Q - y)^2, used to warm-start the head on labelled steps."""
    q = q_value(critic, features, action)
    gradient = np.zeros_like(critic.weights)
    gradient[action] = (q - target) * features
    return 0.5 * (q - target) ** 2, gradient
