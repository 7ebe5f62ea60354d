from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from coach_flow.model.versioned import VersionedModel


class StepRecord(BaseModel):
    screen: int = Field(description="screen the action was executed on")
    action: int
    old_logprob: float = Field(description="log-probability under the rollout policy")
    r_p: Optional[int] = Field(default=None, description="binary process reward")
    ret: Optional[float] = Field(default=None, description="return target R_t")


class Trajectory(VersionedModel):
    """One complete episode, the unit that flows through all phases of an iteration."""

    model_config = ConfigDict(json_schema_extra={"schema_version": 0})

    task_id: int
    steps: list[StepRecord] = Field(default_factory=list)
    done: bool = False
    succeeded: bool = False
    r_o: Optional[int] = Field(default=None, description="binary outcome reward")
    sim_times: dict[str, float] = Field(
        default_factory=dict,
        description="simulated env and inference seconds charged by this episode",
    )

    @property
    def length(self) -> int:
        return len(self.steps)

    @property
    def has_returns(self) -> bool:
        return all(step.ret is not None for step in self.steps)

    def to_json_line(self) -> str:
        """Archive line: the executed steps without their return targets."""
        return self.model_dump_json(exclude={"done": True, "succeeded": True, "steps": {"__all__": {"ret"}}})
