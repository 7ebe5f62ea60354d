from pydantic import BaseModel, ConfigDict, Field, computed_field


class LatencyModel(BaseModel):
    """Simulated seconds charged per environment and model operation."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    init_cost: float = Field(default=20.0, gt=0, description="environment initialization")
    step_cost: float = Field(default=2.5, gt=0, description="one executed environment step")
    recovery_cost: float = Field(default=10.0, gt=0, description="recovery after a failed episode")
    inference_cost: float = Field(default=1.0, gt=0, description="one action generation")
    model_load_cost: float = Field(
        default=160.0,
        gt=0,
        description="loading the policy into the rollout workers, once per rollout phase",
    )
    update_cost: float = Field(
        default=0.05,
        gt=0,
        description="one record processed by a gradient computation",
    )

    def env_to_inference_ratio(
        self,
        expected_steps: float,
        failure_rate: float,
        batch_size: int,
    ) -> float:
        """
        Ratio of environment time to inference time per episode of a rollout phase.
        """
        environment = self.init_cost + expected_steps * self.step_cost + failure_rate * self.recovery_cost
        inference = expected_steps * self.inference_cost + self.model_load_cost / batch_size
        return environment / inference


class SimClock(BaseModel):
    """
    Accounting of simulated time. Rollout workers charge their own shard, which is merged
    back in task order so totals do not depend on scheduling.
    """

    latency: LatencyModel = Field(default_factory=LatencyModel)
    env_time: float = 0.0
    inference_time: float = 0.0
    update_time: float = 0.0
    interaction_count: int = 0
    sampled_action_count: int = 0

    @computed_field
    @property
    def total_time(self) -> float:
        return self.env_time + self.inference_time + self.update_time

    def charge_init(self):
        self.env_time += self.latency.init_cost

    def charge_step(self, failed_termination: bool = False):
        self.env_time += self.latency.step_cost
        if failed_termination:
            self.env_time += self.latency.recovery_cost
        self.interaction_count += 1

    def charge_samples(self, count: int = 1, charge_time: bool = True):
        if charge_time:
            self.inference_time += count * self.latency.inference_cost
        self.sampled_action_count += count

    def charge_model_load(self):
        self.inference_time += self.latency.model_load_cost

    def charge_updates(self, records: int):
        self.update_time += records * self.latency.update_cost

    def shard(self) -> "SimClock":
        return SimClock(latency=self.latency)

    def merge(self, shard: "SimClock"):
        self.env_time += shard.env_time
        self.inference_time += shard.inference_time
        self.update_time += shard.update_time
        self.interaction_count += shard.interaction_count
        self.sampled_action_count += shard.sampled_action_count

    def restore(self, other: "SimClock"):
        for field in ("env_time", "inference_time", "update_time", "interaction_count", "sampled_action_count"):
            setattr(self, field, getattr(other, field))
