import enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class DiscountMode(str, enum.Enum):
    AS_WRITTEN = "as_written"  # gamma ** (T - tau)
    STANDARD = "standard"  # gamma ** (tau - t)


class CriticInitMode(str, enum.Enum):
    NONE = "none"
    ONLINE_WARMUP = "online_warmup"
    PRM_PRETRAIN = "prm_pretrain"


class RewardWeights(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    omega_p: float = Field(default=0.2, ge=0, description="process reward weight")
    omega_o: float = Field(default=1.0, ge=0, description="outcome reward weight")
    gamma: float = Field(default=0.95, gt=0, le=1, description="discount factor")
    prm_threshold: float = Field(default=0.5, gt=0, lt=1)
    prm_noise_rate: float = Field(default=0.05, ge=0, lt=0.5)
    discount_mode: DiscountMode = DiscountMode.AS_WRITTEN

    @model_validator(mode="after")
    def _check_weights(self) -> "RewardWeights":
        if self.omega_p + self.omega_o <= 0:
            raise ValueError("omega_p + omega_o must be positive")
        return self


class StepLabelRecord(BaseModel):
    """A candidate action on a state of an oracle path, labelled against the oracle action."""

    task_id: int
    screen: int
    action: int
    label: int = Field(ge=0, le=1)


class PrmReport(BaseModel):
    records: int
    train_records: int
    holdout_records: int
    final_loss: float
    train_accuracy: float
    holdout_accuracy: Optional[float] = Field(
        default=None,
        description="accuracy on the held-out split, absent when nothing was held out",
    )
