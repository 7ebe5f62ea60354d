import numpy as np
from loguru import logger

from coach_flow.model.rewards import CriticInitMode, StepLabelRecord
from coach_flow.policy.critic import squared_error_and_grad
from coach_flow.policy.features import FeatureMap
from coach_flow.policy.optimizer import OptimizerState, apply_update
from coach_flow.policy.params import CriticParams


def pretrain_critic(
    critic: CriticParams,
    dataset: list[StepLabelRecord],
    epochs: int,
    opt: OptimizerState,
    features: FeatureMap,
    mode: CriticInitMode = CriticInitMode.PRM_PRETRAIN,
    seed: int = 0,
) -> CriticParams:
    """
    Warm-start the Q head on the step-label dataset, regressing Q(s, a) onto the binary label
    with an unclipped squared error, one record per step. The modes `none` and
    `online_warmup` leave the critic as it is; online warm-up happens in the trainer.

    :return: the same critic object, updated in place
    """
    if mode != CriticInitMode.PRM_PRETRAIN:
        logger.debug("critic init mode {mode}, no pretraining", mode=mode.value)
        return critic
    if not dataset:
        logger.error("cannot pretrain the critic on an empty dataset")
        raise ValueError("empty step-label dataset")

    encoded = [(features.encode(r.task_id, r.screen), r.action, float(r.label)) for r in dataset]
    rng = np.random.default_rng(seed)
    loss = 0.0
    for epoch in range(epochs):
        loss = 0.0
        for index in rng.permutation(len(encoded)):
            x, action, label = encoded[index]
            record_loss, gradient = squared_error_and_grad(critic, x, action, label)
            apply_update(critic, gradient, opt)
            loss += record_loss
        loss /= len(encoded)

    logger.info(
        "pretrained critic for {epochs} epochs on {records} records, last epoch loss {loss}",
        epochs=epochs,
        records=len(encoded),
        loss=loss,
    )
    return critic
