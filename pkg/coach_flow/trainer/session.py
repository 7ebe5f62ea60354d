import math
from typing import Callable, NamedTuple, Optional

import numpy as np
from loguru import logger

from coach_flow.env.pool import pool_rollout
from coach_flow.exceptions import InvalidConfigError
from coach_flow.model.clock import SimClock
from coach_flow.model.config import RunConfig
from coach_flow.model.episode import Trajectory
from coach_flow.model.metrics import IterationBatch, TrainerMetricsRow, TrainerState
from coach_flow.model.rewards import CriticInitMode, PrmReport, StepLabelRecord
from coach_flow.model.task import TaskSpec
from coach_flow.policy.features import FeatureMap
from coach_flow.policy.optimizer import OptimizerState
from coach_flow.policy.params import CriticParams, PolicyParams, PrmParams, ValueParams
from coach_flow.rewards.critic_init import pretrain_critic
from coach_flow.rewards.prm import fit_process_reward_model
from coach_flow.trainer.baselines import run_iteration_grpo, run_iteration_ppo
from coach_flow.trainer.coach import run_iteration_android_coach
from coach_flow.trainer.evaluation import evaluate
from coach_flow.trainer.phases import IterationPhases
from coach_flow.utils import (
    SEED_CRITIC_INIT,
    SEED_PRM_DATASET,
    SEED_PRM_TRAIN,
    SEED_ROLLOUT,
    SEED_TASKS,
    derive_seed,
)

SMOOTHING_WINDOW = 4

RUNNERS = {
    "android_coach": run_iteration_android_coach,
    "ppo": run_iteration_ppo,
    "grpo": run_iteration_grpo,
}


class _Checkpoint(NamedTuple):
    policy: PolicyParams
    critic: Optional[CriticParams]
    value: Optional[ValueParams]
    actor_opt: OptimizerState
    critic_opt: OptimizerState
    clock: SimClock
    outcome_history: list[float]


class TrainingSession:
    """
    The state of one training run of one method under one seed: parameters, optimizers,
    the simulated clock and the metrics recorded so far.

    Every iteration is atomic. When any phase raises, parameters, optimizer state and clock
    are put back to what they were before the iteration started and the error propagates.
    """

    def __init__(
        self,
        settings: RunConfig,
        task_split: tuple[list[TaskSpec], list[TaskSpec]],
        feature_map: FeatureMap,
        seed: int,
    ):
        self.settings = settings
        self.train_tasks, self.eval_tasks = task_split
        if not self.train_tasks or not self.eval_tasks:
            logger.error(
                "session needs training and evaluation tasks, got {train} and {held_out}",
                train=len(self.train_tasks),
                held_out=len(self.eval_tasks),
            )
            raise InvalidConfigError(
                "the task pool must hold training and held-out tasks",
                key="pool.holdout_per_family",
            )
        self.features = feature_map
        self.seed = seed
        self.method = settings.trainer.method
        self.actions = self.train_tasks[0].actions

        trainer = settings.trainer
        self.clock = SimClock(latency=settings.latency)
        self.iteration = 0
        self.outcome_history: list[float] = []
        self.metrics: list[TrainerMetricsRow] = []
        self.last_batch: Optional[IterationBatch] = None

        self.policy = PolicyParams.zeros(self.actions, feature_map.dimension)
        self.actor_opt = self._optimizer(trainer.actor_lr)
        self.critic_opt = self._optimizer(trainer.critic_lr)
        self.critic: Optional[CriticParams] = None
        self.value: Optional[ValueParams] = None
        self.prm: Optional[PrmParams] = None
        self.prm_report: Optional[PrmReport] = None
        self.prm_dataset: list[StepLabelRecord] = []

        match self.method:
            case "android_coach":
                self._setup_android_coach()
            case "ppo":
                self.value = ValueParams.zeros(feature_map.dimension)
                if trainer.ppo_use_process_reward and settings.rewards.omega_p > 0:
                    self._fit_prm()
            case "grpo":
                pass

        logger.info(
            "created {method} session for seed {seed} on {train} training and {held_out} held-out tasks",
            method=self.method,
            seed=seed,
            train=len(self.train_tasks),
            held_out=len(self.eval_tasks),
        )

    def _optimizer(self, learning_rate: float) -> OptimizerState:
        trainer = self.settings.trainer
        return OptimizerState(
            kind=trainer.optimizer,
            learning_rate=learning_rate,
            grad_clip_norm=trainer.grad_clip_norm,
            weight_decay=0.01 if trainer.optimizer == "adamw" else 0.0,
        )

    def _fit_prm(self):
        """Label oracle-path steps under the initial policy and fit the step classifier."""
        self.prm_dataset, fit = fit_process_reward_model(
            self.train_tasks,
            self.policy,
            self.features,
            self.settings.prm,
            threshold=self.settings.rewards.prm_threshold,
            dataset_seed=derive_seed(self.seed, SEED_PRM_DATASET),
            train_seed=derive_seed(self.seed, SEED_PRM_TRAIN),
            temperature=self.settings.trainer.temperature,
        )
        self.prm, self.prm_report = fit.params, fit.report

    def _setup_android_coach(self):
        trainer = self.settings.trainer
        needs_labels = trainer.critic_init == CriticInitMode.PRM_PRETRAIN
        if self.settings.rewards.omega_p > 0 or needs_labels:
            self._fit_prm()

        if needs_labels:
            self.critic = CriticParams.zeros(self.actions, self.features.dimension, trainer.value_clip)
            pretrain_critic(
                self.critic,
                self.prm_dataset,
                trainer.critic_pretrain_epochs,
                OptimizerState(learning_rate=trainer.critic_lr, grad_clip_norm=trainer.grad_clip_norm),
                self.features,
                mode=CriticInitMode.PRM_PRETRAIN,
                seed=derive_seed(self.seed, SEED_CRITIC_INIT),
            )
        else:
            self.critic = CriticParams.random(
                self.actions,
                self.features.dimension,
                trainer.critic_init_scale,
                derive_seed(self.seed, SEED_CRITIC_INIT),
                trainer.value_clip,
            )

    @property
    def in_warmup(self) -> bool:
        """Critic-only iterations at the start of an `online_warmup` run."""
        trainer, run = self.settings.trainer, self.settings.run
        if self.method != "android_coach" or trainer.critic_init != CriticInitMode.ONLINE_WARMUP:
            return False
        if run.iterations is not None:
            return self.iteration < math.ceil(trainer.critic_warmup_ratio * run.iterations)
        return self.clock.total_time < trainer.critic_warmup_ratio * run.time_budget

    @property
    def budget_exhausted(self) -> bool:
        run = self.settings.run
        if run.iterations is not None and self.iteration >= run.iterations:
            return True
        return run.time_budget is not None and self.clock.total_time >= run.time_budget

    def sample_batch_tasks(self) -> list[TaskSpec]:
        rng = np.random.default_rng(derive_seed(self.seed, self.iteration, SEED_TASKS))
        batch_size = self.settings.trainer.batch_size
        chosen = rng.choice(len(self.train_tasks), size=batch_size, replace=len(self.train_tasks) < batch_size)
        return [self.train_tasks[index] for index in chosen]

    def rollout(self, tasks: list[TaskSpec]) -> list[Trajectory]:
        return pool_rollout(
            tasks,
            self.policy,
            self.clock,
            derive_seed(self.seed, self.iteration, SEED_ROLLOUT),
            self.features,
            self.settings.trainer.temperature,
            self.settings.run.effective_workers,
        )

    def _checkpoint(self) -> _Checkpoint:
        return _Checkpoint(
            policy=self.policy.copy(),
            critic=None if self.critic is None else self.critic.copy(),
            value=None if self.value is None else self.value.copy(),
            actor_opt=self.actor_opt.clone(),
            critic_opt=self.critic_opt.clone(),
            clock=self.clock.model_copy(),
            outcome_history=list(self.outcome_history),
        )

    def _restore(self, checkpoint: _Checkpoint):
        self.policy.restore(checkpoint.policy)
        if checkpoint.critic is not None:
            self.critic.restore(checkpoint.critic)
        if checkpoint.value is not None:
            self.value.restore(checkpoint.value)
        self.actor_opt = checkpoint.actor_opt
        self.critic_opt = checkpoint.critic_opt
        self.clock.restore(checkpoint.clock)
        self.outcome_history = checkpoint.outcome_history

    def run_iteration(self) -> TrainerMetricsRow:
        batch = IterationBatch(iteration=self.iteration)
        phases = IterationPhases(batch)
        checkpoint = self._checkpoint()
        try:
            row = RUNNERS[self.method](self, phases)
        except Exception as error:
            logger.error(
                "iteration {iteration} of {method} failed in phase {phase}: {error}",
                iteration=self.iteration,
                method=self.method,
                phase=phases.current_state.id,
                error=str(error),
            )
            if phases.current_state.id != "idle":
                phases.send("abort")
            self._restore(checkpoint)
            raise

        self.metrics.append(row)
        self.last_batch = batch
        self.iteration += 1
        logger.info(
            "{method} iteration {iteration}: time {total_time}, outcome {outcome}, eval SR {success_rate}",
            method=self.method,
            iteration=row.iteration,
            total_time=row.total_time,
            outcome=row.mean_outcome_reward,
            success_rate=row.eval_success_rate,
        )
        return row

    def train(self, on_iteration: Optional[Callable[[TrainerMetricsRow, IterationBatch], None]] = None):
        """Run iterations until the iteration or simulated-time budget is used up."""
        while not self.budget_exhausted:
            row = self.run_iteration()
            if on_iteration is not None:
                on_iteration(row, self.last_batch)
        return self.metrics

    def finish_iteration(
        self,
        batch: IterationBatch,
        critic_loss: Optional[float],
        actor_loss: Optional[float],
    ) -> TrainerMetricsRow:
        """Evaluate the updated policy and build the metrics row of the iteration."""
        outcomes = [trajectory.r_o for trajectory in batch.trajectories]
        mean_outcome = float(np.mean(outcomes)) if outcomes else 0.0
        self.outcome_history.append(mean_outcome)
        window = self.outcome_history[-SMOOTHING_WINDOW:]
        return TrainerMetricsRow(
            iteration=batch.iteration,
            total_time=self.clock.total_time,
            env_time=self.clock.env_time,
            inference_time=self.clock.inference_time,
            update_time=self.clock.update_time,
            interaction_count=self.clock.interaction_count,
            sampled_action_count=self.clock.sampled_action_count,
            mean_outcome_reward=mean_outcome,
            outcome_reward_avg4=float(np.mean(window)),
            eval_success_rate=evaluate(
                self.policy,
                self.eval_tasks,
                self.settings.eval.episodes_per_task,
                self.features,
            ),
            mean_critic_loss=critic_loss,
            mean_actor_loss=actor_loss,
            critic_version=0 if self.critic is None else self.critic.version,
        )

    def trainer_state(self) -> TrainerState:
        return TrainerState(
            method=self.method,
            seed=self.seed,
            iteration=self.iteration,
            clock=self.clock,
            policy_version=self.policy.version,
            critic_version=0 if self.critic is None else self.critic.version,
            outcome_history=self.outcome_history,
        )
