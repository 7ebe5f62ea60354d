from typing import NamedTuple, Optional

import numpy as np
from loguru import logger

from coach_flow.env.tasks import oracle_action, oracle_path
from coach_flow.exceptions import DegenerateDatasetError
from coach_flow.model.config import PrmConfig
from coach_flow.model.rewards import PrmReport, RewardWeights, StepLabelRecord
from coach_flow.model.task import TaskSpec
from coach_flow.policy.features import FeatureMap
from coach_flow.policy.optimizer import OptimizerState, apply_update
from coach_flow.policy.params import PolicyParams, PrmParams
from coach_flow.policy.policy import action_distribution, sample_action


class PrmFit(NamedTuple):
    params: PrmParams
    report: PrmReport


def sample_step_labels(
    tasks: list[TaskSpec],
    policy: PolicyParams,
    samples_per_state: int,
    seed: int,
    features: FeatureMap,
    temperature: float = 1.0,
) -> list[StepLabelRecord]:
    """
    For every state on every task's oracle path, sample candidate actions from the policy and
    label each one against the oracle action. No class balancing.
    """
    if not tasks:
        logger.error("cannot build a step-label dataset without tasks")
        raise ValueError("empty task list")
    if samples_per_state < 1:
        raise ValueError("samples_per_state must be at least 1")

    rng = np.random.default_rng(seed)
    records = []
    for task in tasks:
        for screen in oracle_path(task):
            expected = oracle_action(task, screen)
            probabilities = action_distribution(policy, features.encode(task.task_id, screen), temperature)
            for _ in range(samples_per_state):
                action = sample_action(probabilities, rng)
                records.append(
                    StepLabelRecord(
                        task_id=task.task_id,
                        screen=screen,
                        action=action,
                        label=int(action == expected),
                    )
                )
    return records


def balance_step_labels(records: list[StepLabelRecord], seed: int) -> list[StepLabelRecord]:
    """
    Down-sample the majority class to a 1:1 ratio. Record order of the kept records is
    preserved. A dataset missing one class is returned as is, with a warning.
    """
    positives = [i for i, record in enumerate(records) if record.label == 1]
    negatives = [i for i, record in enumerate(records) if record.label == 0]
    if not positives or not negatives:
        logger.warning(
            "step-label dataset is degenerate: {positives} positive and {negatives} negative records",
            positives=len(positives),
            negatives=len(negatives),
        )
        return list(records)

    rng = np.random.default_rng(seed)
    keep = min(len(positives), len(negatives))
    majority, minority = (positives, negatives) if len(positives) > len(negatives) else (negatives, positives)
    kept = set(minority) | set(rng.choice(majority, size=keep, replace=False).tolist())
    return [record for i, record in enumerate(records) if i in kept]


def build_prm_dataset(
    tasks: list[TaskSpec],
    policy: PolicyParams,
    samples_per_state: int,
    seed: int,
    features: FeatureMap,
    temperature: float = 1.0,
) -> list[StepLabelRecord]:
    records = sample_step_labels(tasks, policy, samples_per_state, seed, features, temperature)
    balanced = balance_step_labels(records, seed + 1)
    logger.info(
        "built step-label dataset of {balanced} records from {sampled} samples, "
        "{positives} positive before balancing",
        balanced=len(balanced),
        sampled=len(records),
        positives=sum(record.label for record in records),
    )
    return balanced


def _design(records: list[StepLabelRecord], features: FeatureMap) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    inputs = PrmParams.augment(np.array([features.encode(r.task_id, r.screen) for r in records]))
    actions = np.array([r.action for r in records], dtype=np.int64)
    labels = np.array([r.label for r in records], dtype=np.float64)
    return inputs, actions, labels


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def prm_probabilities(prm: PrmParams, inputs: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """P(label = 1) for rows of augmented inputs and their actions."""
    return _sigmoid(np.einsum("ij,ij->i", prm.weights[actions], inputs))


def cross_entropy_and_grad(
    prm: PrmParams,
    inputs: np.ndarray,
    actions: np.ndarray,
    labels: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Mean of -log P(y | x, a) over the batch, with its gradient."""
    z = np.einsum("ij,ij->i", prm.weights[actions], inputs)
    # log(1 + e^z) - y z, written to stay finite for large |z|
    losses = np.logaddexp(0.0, z) - labels * z
    residual = (_sigmoid(z) - labels) / len(labels)
    gradient = np.zeros_like(prm.weights)
    np.add.at(gradient, actions, residual[:, None] * inputs)
    return float(losses.mean()), gradient


def _accuracy(prm: PrmParams, inputs, actions, labels, threshold: float) -> float:
    predicted = prm_probabilities(prm, inputs, actions) > threshold
    return float(np.mean(predicted == (labels == 1.0)))


def train_prm(
    dataset: list[StepLabelRecord],
    epochs: int,
    opt: OptimizerState,
    features: FeatureMap,
    actions: int,
    batch_size: int = 32,
    holdout_fraction: float = 0.2,
    seed: int = 0,
    threshold: float = 0.5,
    init: Optional[PrmParams] = None,
) -> PrmFit:
    """
    Fit the step classifier by minibatch descent on the cross-entropy loss.

    :param dataset: labelled step records with both classes present
    :param epochs: passes over the training split
    :param opt: optimizer state; updated in place
    :param features: the feature map the records are encoded with
    :param actions: size of the action set
    :param batch_size: records per gradient step
    :param holdout_fraction: share of records kept aside for the reported accuracy
    :param seed: seed of the split and of the batch order
    :param threshold: probability above which a step is predicted positive
    :param init: starting parameters, zeros when not given
    :return: the fitted parameters and a training report
    :raises DegenerateDatasetError: when the dataset is empty or holds a single class
    """
    labels_present = {record.label for record in dataset}
    if len(labels_present) < 2:
        logger.error(
            "cannot train the process reward model on {records} records with labels {labels}",
            records=len(dataset),
            labels=sorted(labels_present),
        )
        raise DegenerateDatasetError("the step-label dataset must contain both classes")

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(dataset))
    holdout_count = int(round(holdout_fraction * len(dataset)))
    holdout_index, train_index = order[:holdout_count], order[holdout_count:]

    inputs, record_actions, labels = _design(dataset, features)
    prm = init.copy() if init is not None else PrmParams.zeros(actions, features.dimension)

    loss = float("nan")
    for epoch in range(epochs):
        shuffled = train_index[rng.permutation(len(train_index))]
        for start in range(0, len(shuffled), batch_size):
            batch = shuffled[start : start + batch_size]
            loss, gradient = cross_entropy_and_grad(prm, inputs[batch], record_actions[batch], labels[batch])
            apply_update(prm, gradient, opt)
        logger.debug("process reward model epoch {epoch} loss {loss}", epoch=epoch, loss=loss)

    prm.assert_finite("process reward model")
    report = PrmReport(
        records=len(dataset),
        train_records=len(train_index),
        holdout_records=len(holdout_index),
        final_loss=cross_entropy_and_grad(prm, inputs[train_index], record_actions[train_index], labels[train_index])[0],
        train_accuracy=_accuracy(prm, inputs[train_index], record_actions[train_index], labels[train_index], threshold),
        holdout_accuracy=(
            _accuracy(prm, inputs[holdout_index], record_actions[holdout_index], labels[holdout_index], threshold)
            if holdout_count
            else None
        ),
    )
    logger.info(
        "trained process reward model: train accuracy {train_accuracy}, held-out accuracy {holdout_accuracy}",
        train_accuracy=report.train_accuracy,
        holdout_accuracy=report.holdout_accuracy,
    )
    return PrmFit(prm, report)


def prm_score(
    prm: PrmParams,
    features: np.ndarray,
    action: int,
    weights: RewardWeights,
    noise_seed: int,
) -> int:
    """
    Binary process reward: 1 iff the classifier probability exceeds the threshold, flipped
    with probability `prm_noise_rate`. Deterministic in (inputs, noise_seed).
    """
    if not 0 <= action < prm.weights.shape[0]:
        raise ValueError(f"action {action} outside the action set")
    probability = float(_sigmoid(np.array([prm.weights[action] @ PrmParams.augment(features)]))[0])
    reward = int(probability > weights.prm_threshold)
    if weights.prm_noise_rate > 0 and np.random.default_rng(noise_seed).random() < weights.prm_noise_rate:
        reward = 1 - reward
    return reward


def fit_process_reward_model(
    tasks: list[TaskSpec],
    policy: PolicyParams,
    features: FeatureMap,
    config: PrmConfig,
    threshold: float,
    dataset_seed: int,
    train_seed: int,
    temperature: float = 1.0,
) -> tuple[list[StepLabelRecord], PrmFit]:
    """Build the balanced step-label dataset under `policy` and fit the classifier on it."""
    dataset = build_prm_dataset(tasks, policy, config.samples_per_state, dataset_seed, features, temperature)
    fit = train_prm(
        dataset,
        epochs=config.epochs,
        opt=OptimizerState(
            kind=config.optimizer,
            learning_rate=config.learning_rate,
            grad_clip_norm=config.grad_clip_norm,
            weight_decay=config.weight_decay,
        ),
        features=features,
        actions=policy.shape[0],
        batch_size=config.batch_size,
        holdout_fraction=config.holdout_fraction,
        seed=train_seed,
        threshold=threshold,
    )
    return dataset, fit
