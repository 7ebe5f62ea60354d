from typing import Literal, Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, PrivateAttr

from coach_flow.exceptions import NumericError
from coach_flow.policy.params import LinearParams


class OptimizerState(BaseModel):
    """
    Optimizer settings and counters. AdamW moment estimates live next to the json state in
    their own parameter files.
    """

    kind: Literal["sgd", "adamw"] = "sgd"
    learning_rate: float = Field(default=0.05, ge=0)
    grad_clip_norm: float = Field(default=1.0, gt=0)
    step_count: int = Field(default=0, ge=0)
    betas: tuple[float, float] = (0.9, 0.95)
    eps: float = Field(default=1e-8, gt=0)
    weight_decay: float = Field(default=0.0, ge=0)

    _first_moment: Optional[np.ndarray] = PrivateAttr(default=None)
    _second_moment: Optional[np.ndarray] = PrivateAttr(default=None)

    @property
    def moments(self) -> tuple[Optional[np.ndarray], Optional[np.ndarray]]:
        return self._first_moment, self._second_moment

    def set_moments(self, first: Optional[np.ndarray], second: Optional[np.ndarray]):
        self._first_moment = None if first is None else np.array(first, dtype=np.float64)
        self._second_moment = None if second is None else np.array(second, dtype=np.float64)

    def clone(self) -> "OptimizerState":
        twin = self.model_copy()
        twin.set_moments(*self.moments)
        return twin


def clip_gradient(gradient: np.ndarray, max_norm: float) -> np.ndarray:
    norm = float(np.linalg.norm(gradient))
    if norm > max_norm:
        return gradient * (max_norm / norm)
    return gradient


def apply_update(params: LinearParams, gradient: np.ndarray, opt: OptimizerState) -> LinearParams:
    """
    Take one descent step: rescale the gradient to global L2 norm at most `grad_clip_norm`,
    then step with plain SGD or AdamW. Nothing is mutated when the gradient is not finite.

    :raises NumericError: on a non-finite gradient
    :raises ValueError: when the gradient shape does not match the parameters
    """
    if gradient.shape != params.weights.shape:
        logger.error(
            "gradient of shape {gradient_shape} for parameters of shape {params_shape}",
            gradient_shape=gradient.shape,
            params_shape=params.weights.shape,
        )
        raise ValueError("gradient and parameter shapes differ")
    if not np.all(np.isfinite(gradient)):
        logger.error(
            "non-finite gradient at optimizer step {step_count}",
            step_count=opt.step_count,
        )
        raise NumericError("non-finite gradient")

    gradient = clip_gradient(gradient, opt.grad_clip_norm)
    opt.step_count += 1

    if opt.kind == "sgd":
        params.weights -= opt.learning_rate * gradient
    else:
        first, second = opt.moments
        if first is None:
            first, second = np.zeros_like(gradient), np.zeros_like(gradient)
        beta1, beta2 = opt.betas
        first = beta1 * first + (1 - beta1) * gradient
        second = beta2 * second + (1 - beta2) * gradient**2
        first_hat = first / (1 - beta1**opt.step_count)
        second_hat = second / (1 - beta2**opt.step_count)
        params.weights -= opt.learning_rate * opt.weight_decay * params.weights
        params.weights -= opt.learning_rate * first_hat / (np.sqrt(second_hat) + opt.eps)
        opt.set_moments(first, second)

    params.version += 1
    return params
