import enum
import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator


class EstimatorTag(str, enum.Enum):
    ACLOO = "acloo"
    NO_BASELINE = "no_baseline"
    MC_VALUE = "mc_value"
    GRPO = "grpo"
    RLOO = "rloo"


class QGroup(BaseModel):
    """k actions sampled for a single state together with their critic values."""

    features: list[float]
    actions: list[int]
    q_values: list[float]
    old_logprobs: list[float]

    @model_validator(mode="after")
    def _check_lengths(self) -> "QGroup":
        if not len(self.actions) == len(self.q_values) == len(self.old_logprobs):
            raise ValueError("actions, q_values and old_logprobs differ in length")
        if not all(math.isfinite(q) for q in self.q_values):
            raise ValueError("non-finite q value in group")
        return self

    @property
    def k(self) -> int:
        return len(self.actions)


class AdvantageRecord(BaseModel):
    action: int
    advantage: float
    old_logprob: float
    estimator: EstimatorTag
    features: Optional[list[float]] = Field(
        default=None,
        description="state features, attached when the record feeds an actor update",
    )


class BanditOracle(BaseModel):
    """Single-state problem with exact action probabilities and values."""

    oracle_id: int = 0
    probabilities: list[float]
    q_values: list[float]

    @model_validator(mode="after")
    def _check_distribution(self) -> "BanditOracle":
        if len(self.probabilities) != len(self.q_values):
            raise ValueError("probabilities and q_values differ in length")
        if min(self.probabilities) <= 0 or abs(sum(self.probabilities) - 1.0) > 1e-9:
            raise ValueError("probabilities must be positive and sum to one")
        return self

    @property
    def arms(self) -> int:
        return len(self.probabilities)

    @property
    def pi(self) -> np.ndarray:
        return np.asarray(self.probabilities, dtype=np.float64)

    @property
    def q(self) -> np.ndarray:
        return np.asarray(self.q_values, dtype=np.float64)


class LabRow(BaseModel):
    estimator: EstimatorTag
    oracle_id: int
    k: int
    samples: int
    bias_norm: float
    mean_variance: float
    result: str = Field(description="pass, fail or report (not gated)")
