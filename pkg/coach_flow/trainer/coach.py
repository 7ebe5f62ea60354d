"""
The single-state multiple-actions iteration: one rollout phase, return assignment, a critic
update on the collected steps, then an actor update on k actions resampled per collected
state and scored by the just-updated critic instead of being executed.
"""
from typing import TYPE_CHECKING, Optional

import numpy as np
from loguru import logger

from coach_flow.advantage.estimators import GROUP_ESTIMATORS, whiten
from coach_flow.exceptions import ContractViolationError
from coach_flow.model.advantage import EstimatorTag, QGroup
from coach_flow.model.metrics import IterationBatch
from coach_flow.policy.critic import critic_loss_and_grad
from coach_flow.policy.optimizer import apply_update
from coach_flow.policy.policy import action_distribution, log_probs, sample_action
from coach_flow.rewards.prm import prm_score
from coach_flow.rewards.returns import assign_returns
from coach_flow.trainer.actor import actor_update
from coach_flow.trainer.phases import IterationPhases
from coach_flow.utils import SEED_PRM_SCORE, SEED_RESAMPLE, derive_seed

if TYPE_CHECKING:
    from coach_flow.model.metrics import TrainerMetricsRow
    from coach_flow.trainer.session import TrainingSession


def score_process_rewards(session: "TrainingSession", batch: IterationBatch, use_prm: bool = True):
    """
    Attach binary process rewards to every step. Without a process reward model, or with a zero
    process weight, every step gets r_p = 0 and the targets reduce to outcome-only returns.
    """
    weights = session.settings.rewards
    score = use_prm and session.prm is not None and weights.omega_p > 0
    for index, trajectory in enumerate(batch.trajectories):
        for t, step in enumerate(trajectory.steps):
            if not score:
                step.r_p = 0
                continue
            step.r_p = prm_score(
                session.prm,
                session.features.encode(trajectory.task_id, step.screen),
                step.action,
                weights,
                derive_seed(session.seed, session.iteration, SEED_PRM_SCORE, index, t),
            )


def buffer_arrays(session: "TrainingSession", batch: IterationBatch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Features, executed actions and return targets of every buffered step, in buffer order."""
    features, actions, targets = [], [], []
    for trajectory in batch.trajectories:
        if not trajectory.has_returns:
            raise ContractViolationError(f"trajectory of task {trajectory.task_id} has no return targets")
        for step in trajectory.steps:
            features.append(session.features.encode(trajectory.task_id, step.screen))
            actions.append(step.action)
            targets.append(step.ret)
    return np.array(features), np.array(actions, dtype=np.int64), np.array(targets, dtype=np.float64)


def update_critic(session: "TrainingSession", batch: IterationBatch) -> float:
    """
    Fit the Q head to the return targets with the clipped squared error, anchored at the
    predictions the critic made when the phase started.

    :return: the mean loss over all processed records
    """
    trainer = session.settings.trainer
    critic = session.critic
    features, actions, targets = buffer_arrays(session, batch)
    q_old = critic.predictions(features, actions)

    losses = []
    for _ in range(trainer.critic_epochs):
        for start in range(0, len(targets), trainer.critic_minibatch_size):
            gradient = np.zeros_like(critic.weights)
            end = min(start + trainer.critic_minibatch_size, len(targets))
            for index in range(start, end):
                loss, record_gradient = critic_loss_and_grad(
                    critic, features[index], int(actions[index]), float(targets[index]), float(q_old[index])
                )
                gradient += record_gradient
                losses.append(loss)
            apply_update(critic, gradient / (end - start), session.critic_opt)

    session.clock.charge_updates(len(targets) * trainer.critic_epochs)
    critic.assert_finite("critic parameters")
    return float(np.mean(losses))


def resample_groups(session: "TrainingSession", batch: IterationBatch) -> list[QGroup]:
    """
    For every collected state, sample k actions from the policy snapshot and score each with
    the critic. Sampling is charged to the clock as inference, unless configured otherwise.
    """
    trainer = session.settings.trainer
    rng = np.random.default_rng(derive_seed(session.seed, session.iteration, SEED_RESAMPLE))
    groups = []
    for trajectory in batch.trajectories:
        for step in trajectory.steps:
            features = session.features.encode(trajectory.task_id, step.screen)
            probabilities = action_distribution(
                session.policy, features, trainer.temperature, use_snapshot=True
            )
            sampled = trainer.k - 1 if trainer.include_executed else trainer.k
            actions = [sample_action(probabilities, rng) for _ in range(sampled)]
            if trainer.include_executed:
                actions.insert(0, step.action)
            session.clock.charge_samples(sampled, charge_time=trainer.charge_resampling)

            snapshot_logprobs = log_probs(session.policy, features, trainer.temperature, use_snapshot=True)
            q_values = session.critic.predictions(np.tile(features, (len(actions), 1)), np.array(actions))
            groups.append(
                QGroup(
                    features=features.tolist(),
                    actions=actions,
                    q_values=q_values.tolist(),
                    old_logprobs=[float(snapshot_logprobs[action]) for action in actions],
                )
            )
    return groups


def run_iteration_android_coach(session: "TrainingSession", phases: IterationPhases) -> "TrainerMetricsRow":
    trainer = session.settings.trainer
    batch: IterationBatch = phases.model

    phases.advance("collect")
    batch.trajectories = session.rollout(session.sample_batch_tasks())
    batch.record_phase(phases.current_state.id, session.clock)

    phases.advance("assign")
    score_process_rewards(session, batch)
    for trajectory in batch.trajectories:
        assign_returns(trajectory, session.settings.rewards)
    batch.record_phase(phases.current_state.id, session.clock)

    phases.advance("fit_critic")
    critic_loss = update_critic(session, batch)
    critic_version = session.critic.version
    batch.record_phase(phases.current_state.id, session.clock)

    actor_loss: Optional[float] = None
    if session.in_warmup:
        logger.debug("critic warm-up iteration {iteration}, actor untouched", iteration=session.iteration)
    else:
        phases.advance("fit_actor")
        session.policy.snapshot()
        batch.groups = resample_groups(session, batch)
        if session.critic.version != critic_version:
            raise ContractViolationError("the critic changed between its update and the actor update")

        estimator = GROUP_ESTIMATORS[EstimatorTag(trainer.advantage_estimator)]
        records = [record for group in batch.groups for record in estimator(group)]
        if trainer.normalize_advantages:
            records = whiten(records)
        batch.advantages = records

        actor_loss = actor_update(
            session.policy,
            records,
            session.actor_opt,
            trainer.clip_ratio,
            trainer.actor_epochs,
            trainer.temperature,
        )
        session.clock.charge_updates(len(records) * trainer.actor_epochs)
        batch.record_phase(phases.current_state.id, session.clock)

    phases.advance("finish")
    return session.finish_iteration(batch, critic_loss, actor_loss)
