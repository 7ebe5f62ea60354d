import os
from typing import Literal, Optional

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

from coach_flow.model.advantage import EstimatorTag
from coach_flow.model.clock import LatencyModel
from coach_flow.model.rewards import CriticInitMode, RewardWeights
from coach_flow.model.task import GraphParams

THREADS_ENVIRONMENT_VARIABLE = "SSMA_RL_THREADS"

Method = Literal["android_coach", "ppo", "grpo"]
OptimizerKind = Literal["sgd", "adamw"]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RunSection(_Section):
    output_dir: str = Field(default="runs/default", description="run directory, guarded by a lock file")
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)
    workers: int = Field(default=4, ge=1, description="rollout worker threads")
    iterations: Optional[int] = Field(default=None, ge=1, description="iteration budget")
    time_budget: Optional[float] = Field(default=40000.0, ge=0, description="simulated-seconds budget")
    save_trajectories: bool = Field(default=False, description="append rollouts to trajectories.jsonl")
    save_buffers: bool = Field(default=False, description="persist every iteration buffer")
    compress_buffers: bool = Field(default=True, description="snappy-compress persisted buffers")

    @model_validator(mode="after")
    def _check_budget(self) -> "RunSection":
        if self.iterations is None and self.time_budget is None:
            raise ValueError("either run.iterations or run.time_budget must be set")
        if any(seed < 0 for seed in self.seeds):
            raise ValueError("seeds must be non-negative")
        return self

    @property
    def effective_workers(self) -> int:
        cap = os.environ.get(THREADS_ENVIRONMENT_VARIABLE)
        if cap is None:
            return self.workers
        try:
            return max(1, min(self.workers, int(cap)))
        except ValueError:
            logger.warning(
                "ignoring non-integer {variable}={value}",
                variable=THREADS_ENVIRONMENT_VARIABLE,
                value=cap,
            )
            return self.workers


class PoolConfig(_Section):
    seed: int = Field(default=7, ge=0)
    count: int = Field(default=32, ge=1)
    min_screens: int = 5
    max_screens: int = 8
    actions: int = 6
    min_depth: int = 3
    terminal_action_index: Optional[int] = None
    tasks_per_family: int = 4
    holdout_per_family: int = 1

    def graph_params(self, max_steps: int) -> GraphParams:
        return GraphParams(
            min_screens=self.min_screens,
            max_screens=self.max_screens,
            min_depth=self.min_depth,
            actions=self.actions,
            terminal_action_index=self.terminal_action_index,
            max_steps=max_steps,
            tasks_per_family=self.tasks_per_family,
            holdout_per_family=self.holdout_per_family,
        )


class TrainConfig(_Section):
    method: Method = "android_coach"
    batch_size: int = Field(default=8, ge=1)
    k: int = Field(default=4, ge=1, description="actions resampled per collected state")
    grpo_group_size: int = Field(default=4, ge=2)
    clip_ratio: float = Field(default=0.2, gt=0, lt=1)
    value_clip: float = Field(default=0.5, gt=0)
    actor_lr: float = Field(default=0.05, ge=0)
    critic_lr: float = Field(default=0.1, ge=0)
    grad_clip_norm: float = Field(default=1.0, gt=0)
    optimizer: OptimizerKind = "sgd"
    temperature: float = Field(default=1.0, gt=0)
    max_turns: int = Field(default=25, ge=2)
    critic_init: CriticInitMode = CriticInitMode.PRM_PRETRAIN
    critic_init_scale: float = Field(default=1.0, ge=0, description="std of a fresh critic head")
    critic_warmup_ratio: float = Field(default=0.1, ge=0, lt=1)
    critic_pretrain_epochs: int = Field(default=50, ge=1)
    critic_epochs: int = Field(default=1, ge=1)
    critic_minibatch_size: int = Field(default=1, ge=1)
    actor_epochs: int = Field(default=1, ge=1)
    advantage_estimator: Literal["acloo", "no_baseline"] = "acloo"
    normalize_advantages: bool = False
    include_executed: bool = False
    charge_resampling: bool = True
    ppo_use_process_reward: bool = False
    grpo_std_floor: float = Field(default=1e-4, ge=0)
    grpo_population_std: bool = True

    @model_validator(mode="after")
    def _check_group(self) -> "TrainConfig":
        if self.method == "android_coach" and self.k < 2 and self.advantage_estimator == "acloo":
            raise ValueError("trainer.k must be at least 2 for the acloo estimator")
        return self


class PrmConfig(_Section):
    samples_per_state: int = Field(default=64, ge=1)
    batch_size: int = Field(default=32, ge=1)
    epochs: int = Field(default=2, ge=1)
    optimizer: OptimizerKind = "adamw"
    learning_rate: float = Field(default=0.1, ge=0)
    weight_decay: float = Field(default=0.01, ge=0)
    grad_clip_norm: float = Field(default=1.0, gt=0)
    holdout_fraction: float = Field(default=0.2, ge=0, lt=1)


class LabConfig(_Section):
    seed: int = Field(default=0, ge=0)
    oracles: int = Field(default=20, ge=1)
    min_arms: int = Field(default=2, ge=2)
    max_arms: int = Field(default=8, ge=2)
    ks: list[int] = Field(default_factory=lambda: [2, 4, 8], min_length=1)
    samples: int = Field(default=100_000, ge=1000)
    estimators: list[EstimatorTag] = Field(
        default_factory=lambda: [
            EstimatorTag.ACLOO,
            EstimatorTag.NO_BASELINE,
            EstimatorTag.MC_VALUE,
            EstimatorTag.GRPO,
        ]
    )
    z_threshold: float = Field(default=3.0, gt=0, description="single-test critical value")
    variance_oracles: int = Field(default=50, ge=1)
    variance_k: int = Field(default=4, ge=2)
    variance_fraction: float = Field(default=0.95, gt=0, le=1)
    shift_groups: int = Field(default=1000, ge=1)
    shift_max: float = Field(default=1e6, gt=0)
    shard_size: int = Field(default=32768, ge=1000)
    workers: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check_ranges(self) -> "LabConfig":
        if self.max_arms < self.min_arms:
            raise ValueError("lab.max_arms is smaller than lab.min_arms")
        if min(self.ks) < 2:
            raise ValueError("lab.ks values must be at least 2")
        return self


class EvalConfig(_Section):
    episodes_per_task: int = Field(default=1, ge=1)
    target_sr: float = Field(default=0.8, gt=0, le=1)


class CompareConfig(_Section):
    methods: list[Method] = Field(default_factory=lambda: ["android_coach", "ppo", "grpo"])


class LoggingConfig(_Section):
    level: Literal["TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR"] = "INFO"


class RunConfig(_Section):
    """The complete, validated configuration document."""

    run: RunSection = Field(default_factory=RunSection)
    pool: PoolConfig = Field(default_factory=PoolConfig)
    latency: LatencyModel = Field(default_factory=LatencyModel)
    trainer: TrainConfig = Field(default_factory=TrainConfig)
    rewards: RewardWeights = Field(default_factory=RewardWeights)
    prm: PrmConfig = Field(default_factory=PrmConfig)
    lab: LabConfig = Field(default_factory=LabConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    compare: CompareConfig = Field(default_factory=CompareConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)

    @property
    def graph_params(self) -> GraphParams:
        return self.pool.graph_params(self.trainer.max_turns)

    def with_method(self, method: str) -> "RunConfig":
        document = self.model_dump(mode="json")
        document["trainer"]["method"] = method
        return RunConfig.model_validate(document)
