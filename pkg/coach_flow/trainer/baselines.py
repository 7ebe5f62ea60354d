"""
Single-state single-action baselines run under the same clock as the multi-action trainer:
PPO with a linear state-value baseline and GRPO with group-normalized outcome rewards.
"""
from typing import TYPE_CHECKING

import numpy as np

from coach_flow.advantage.estimators import grpo_normalize, mc_value_advantage, whiten
from coach_flow.model.advantage import AdvantageRecord, EstimatorTag
from coach_flow.model.metrics import IterationBatch
from coach_flow.policy.optimizer import apply_update
from coach_flow.rewards.returns import assign_returns
from coach_flow.trainer.actor import actor_update
from coach_flow.trainer.coach import buffer_arrays, score_process_rewards
from coach_flow.trainer.phases import IterationPhases

if TYPE_CHECKING:
    from coach_flow.model.metrics import TrainerMetricsRow
    from coach_flow.trainer.session import TrainingSession


def update_value(session: "TrainingSession", features: np.ndarray, targets: np.ndarray) -> float:
    """Per-record squared-error descent of the state-value baseline toward the return targets."""
    trainer = session.settings.trainer
    value = session.value
    losses = []
    for _ in range(trainer.critic_epochs):
        for x, target in zip(features, targets):
            residual = value.value(x) - target
            losses.append(0.5 * residual**2)
            apply_update(value, (residual * x)[None, :], session.critic_opt)
    session.clock.charge_updates(len(targets) * trainer.critic_epochs)
    value.assert_finite("value parameters")
    return float(np.mean(losses))


def run_iteration_ppo(session: "TrainingSession", phases: IterationPhases) -> "TrainerMetricsRow":
    trainer = session.settings.trainer
    batch: IterationBatch = phases.model

    phases.advance("collect")
    batch.trajectories = session.rollout(session.sample_batch_tasks())
    batch.record_phase(phases.current_state.id, session.clock)

    phases.advance("assign")
    weights = session.settings.rewards
    if not trainer.ppo_use_process_reward:
        weights = weights.model_copy(update={"omega_p": 0.0})
    score_process_rewards(session, batch, use_prm=trainer.ppo_use_process_reward)
    for trajectory in batch.trajectories:
        assign_returns(trajectory, weights)
    batch.record_phase(phases.current_state.id, session.clock)

    phases.advance("fit_critic")
    features, actions, targets = buffer_arrays(session, batch)
    # advantages use the baseline as it was before this iteration's fit
    baseline = features @ session.value.weights[0]
    value_loss = update_value(session, features, targets)
    batch.record_phase(phases.current_state.id, session.clock)

    phases.advance("fit_actor")
    old_logprobs = [step.old_logprob for trajectory in batch.trajectories for step in trajectory.steps]
    advantages = mc_value_advantage(targets.tolist(), baseline.tolist())
    records = [
        AdvantageRecord(
            action=int(action),
            advantage=advantage,
            old_logprob=old_logprob,
            estimator=EstimatorTag.MC_VALUE,
            features=x.tolist(),
        )
        for x, action, advantage, old_logprob in zip(features, actions, advantages, old_logprobs)
    ]
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
    return session.finish_iteration(batch, value_loss, actor_loss)


def run_iteration_grpo(session: "TrainingSession", phases: IterationPhases) -> "TrainerMetricsRow":
    """
    Roll out `grpo_group_size` full episodes for each batch task, normalize the outcome rewards
    within each group and broadcast every trajectory's advantage to all its steps.
    """
    trainer = session.settings.trainer
    batch: IterationBatch = phases.model
    group_size = trainer.grpo_group_size

    phases.advance("collect")
    tasks = [task for task in session.sample_batch_tasks() for _ in range(group_size)]
    batch.trajectories = session.rollout(tasks)
    batch.record_phase(phases.current_state.id, session.clock)

    phases.advance("assign")
    outcome_only = session.settings.rewards.model_copy(update={"omega_p": 0.0})
    records = []
    for start in range(0, len(batch.trajectories), group_size):
        group = batch.trajectories[start : start + group_size]
        normalized = grpo_normalize(
            [trajectory.r_o for trajectory in group],
            std_floor=trainer.grpo_std_floor,
            population=trainer.grpo_population_std,
        )
        for trajectory, advantage in zip(group, normalized):
            for step in trajectory.steps:
                step.r_p = 0
            assign_returns(trajectory, outcome_only)
            records.extend(
                AdvantageRecord(
                    action=step.action,
                    advantage=advantage,
                    old_logprob=step.old_logprob,
                    estimator=EstimatorTag.GRPO,
                    features=session.features.encode(trajectory.task_id, step.screen).tolist(),
                )
                for step in trajectory.steps
            )
    batch.record_phase(phases.current_state.id, session.clock)

    phases.advance("fit_actor")
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
    return session.finish_iteration(batch, None, actor_loss)
