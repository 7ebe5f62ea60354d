import numpy as np
import pytest

from coach_flow.policy.critic import critic_loss_and_grad, q_value
from coach_flow.policy.params import CriticParams

E0 = np.array([1.0, 0.0])


def _critic_predicting(q: float) -> CriticParams:
    critic = CriticParams.zeros(2, 2, value_clip=0.5)
    critic.weights[0, 0] = q
    return critic


def test_q_value_of_zero_head():
    critic = CriticParams.zeros(3, 2)

    assert q_value(critic, np.array([0.3, -2.0]), 2) == 0.0


def test_q_value_of_one_hot():
    critic = CriticParams.zeros(2, 3)
    critic.weights[1, 2] = 1.0

    assert q_value(critic, np.array([0.0, 0.0, 1.0]), 1) == 1.0


def test_predictions_match_q_value(rng):
    critic = CriticParams(rng.normal(size=(3, 4)))
    features = rng.normal(size=(5, 4))
    actions = np.array([0, 2, 1, 1, 0])

    predicted = critic.predictions(features, actions)

    np.testing.assert_allclose(predicted, [q_value(critic, x, a) for x, a in zip(features, actions)])


def test_loss_takes_the_larger_branch():
    loss, gradient = critic_loss_and_grad(_critic_predicting(1.2), E0, 0, target=0.0, q_old=0.5)

    assert loss == pytest.approx(0.72)
    # unclipped (1.2)^2 beats clipped (1.0)^2, so the gradient is (Q - R) x
    np.testing.assert_allclose(gradient, [[1.2, 0.0], [0.0, 0.0]])


def test_loss_inside_clip_interval():
    loss, gradient = critic_loss_and_grad(_critic_predicting(0.6), E0, 0, target=0.5, q_old=0.5)

    assert loss == pytest.approx(0.005)
    np.testing.assert_allclose(gradient, [[0.1, 0.0], [0.0, 0.0]])


def test_exact_fit():
    loss, gradient = critic_loss_and_grad(_critic_predicting(0.7), E0, 0, target=0.7, q_old=0.7)

    assert loss == 0.0
    assert not gradient.any()


def test_clipped_branch_has_zero_gradient():
    # Q left the clip interval: clip(1.2) = 1.0 and (1.0 - 2.0)^2 > (1.2 - 2.0)^2
    loss, gradient = critic_loss_and_grad(_critic_predicting(1.2), E0, 0, target=2.0, q_old=0.5)

    assert loss == pytest.approx(0.5 * (1.0 - 2.0) ** 2)
    assert not gradient.any()


def test_gradient_matches_finite_differences(rng):
    h = 1e-5
    for _ in range(200):
        critic = CriticParams(rng.normal(size=(3, 4)), value_clip=0.5)
        features = rng.normal(size=4)
        action = int(rng.integers(3))
        target = float(rng.normal())
        q_old = q_value(critic, features, action) + float(rng.uniform(-0.2, 0.2))

        _, analytic = critic_loss_and_grad(critic, features, action, target, q_old)
        numeric = np.zeros_like(critic.weights)
        for index in np.ndindex(critic.weights.shape):
            plus, minus = critic.copy(), critic.copy()
            plus.weights[index] += h
            minus.weights[index] -= h
            numeric[index] = (
                critic_loss_and_grad(plus, features, action, target, q_old)[0]
                - critic_loss_and_grad(minus, features, action, target, q_old)[0]
            ) / (2 * h)

        np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-8)


def test_non_finite_target():
    with pytest.raises(ValueError):
        critic_loss_and_grad(CriticParams.zeros(2, 2), E0, 0, target=float("nan"), q_old=0.0)
