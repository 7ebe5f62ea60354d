from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from coach_flow.model.advantage import AdvantageRecord, QGroup
from coach_flow.model.clock import SimClock
from coach_flow.model.episode import Trajectory
from coach_flow.model.versioned import VersionedModel

METRICS_SCHEMA_VERSION = 1


class TrainerMetricsRow(BaseModel):
    """One row of the metrics CSV; the field order is the column order."""

    iteration: int
    total_time: float
    env_time: float
    inference_time: float
    update_time: float
    interaction_count: int
    sampled_action_count: int
    mean_outcome_reward: float
    outcome_reward_avg4: float = Field(description="trailing mean over the last four iterations")
    eval_success_rate: float
    mean_critic_loss: Optional[float] = None
    mean_actor_loss: Optional[float] = None
    critic_version: int = 0

    @classmethod
    def columns(cls) -> list[str]:
        return list(cls.model_fields)

    def csv_row(self) -> dict[str, str]:
        row = {}
        for column in self.columns():
            value = getattr(self, column)
            row[column] = "" if value is None else repr(value)
        return row


class PhaseTiming(BaseModel):
    phase: str
    total_time: float
    interaction_count: int
    sampled_action_count: int


class IterationBatch(VersionedModel):
    """
    The per-iteration replay buffer. The `state` field is owned by the iteration phase
    machine and always names the phase the buffer is in.
    """

    model_config = ConfigDict(json_schema_extra={"schema_version": 0})

    iteration: int
    state: Optional[str] = Field(default=None, description="current phase of the iteration")
    trajectories: list[Trajectory] = Field(default_factory=list)
    groups: list[QGroup] = Field(default_factory=list)
    advantages: list[AdvantageRecord] = Field(default_factory=list)
    phase_timings: list[PhaseTiming] = Field(default_factory=list)

    def record_phase(self, phase: str, clock: SimClock):
        self.phase_timings.append(
            PhaseTiming(
                phase=phase,
                total_time=clock.total_time,
                interaction_count=clock.interaction_count,
                sampled_action_count=clock.sampled_action_count,
            )
        )


class TrainerState(VersionedModel):
    """Everything besides the parameter files needed to resume or audit a run."""

    model_config = ConfigDict(json_schema_extra={"schema_version": 0})

    method: str
    seed: int = Field(description="base seed; per-iteration streams derive from it")
    iteration: int = 0
    clock: SimClock
    policy_version: int = 0
    critic_version: int = 0
    outcome_history: list[float] = Field(default_factory=list)


class EfficiencyRatio(BaseModel):
    per_seed: list[Optional[float]]
    median: Optional[float] = None
    reason: Optional[Literal["budget_exhausted"]] = None
    censored: list[Literal["baseline", "reference"]] = Field(
        default_factory=list,
        description="which side failed to reach the target on at least one seed",
    )
    lower_bound: Optional[float] = Field(
        default=None,
        description="median lower bound when only the baseline missed the target",
    )
    upper_bound: Optional[float] = Field(
        default=None,
        description="median upper bound when only the reference missed the target",
    )


class ComparisonReport(BaseModel):
    target_sr: float
    time_budget: float
    seeds: list[int]
    reference: str = Field(description="label of the android_coach configuration")
    time_to_target: dict[str, list[Optional[float]]]
    ratios: dict[str, EfficiencyRatio]
    curves: dict[str, list[list[TrainerMetricsRow]]] = Field(default_factory=dict)

    def summary(self) -> dict:
        return self.model_dump(mode="json", exclude={"curves"})
