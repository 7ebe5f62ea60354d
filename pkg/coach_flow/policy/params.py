from os import PathLike
from pathlib import Path
from typing import Optional, Self

import numpy as np
from loguru import logger

from coach_flow.exceptions import NumericError

PARAMS_MAGIC = b"CFPARAM1"
_HEADER_DTYPE = np.dtype("<u8")
_DATA_DTYPE = np.dtype("<f8")


class LinearParams:
    """
    A dense real matrix of model parameters with a version counter. The counter increments on
    every applied update, which lets callers assert which update produced the values they use.
    """

    def __init__(self, weights: np.ndarray):
        self.weights = np.array(weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError(f"parameters must be a matrix, got shape {self.weights.shape}")
        self.version = 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape

    def assert_finite(self, what: str = "parameters"):
        if not np.all(np.isfinite(self.weights)):
            logger.error(
                "non-finite entries in {what} of {cls}",
                what=what,
                cls=self.__class__.__name__,
            )
            raise NumericError(f"non-finite {what} in {self.__class__.__name__}")

    def copy(self) -> Self:
        clone = self.__class__.__new__(self.__class__)
        clone.__dict__.update(
            {
                key: value.copy() if isinstance(value, np.ndarray) else value
                for key, value in self.__dict__.items()
            }
        )
        return clone

    def restore(self, other: "LinearParams"):
        self.__dict__.update(other.copy().__dict__)

    def to_bytes(self) -> bytes:
        rows, cols = self.weights.shape
        header = np.array([rows, cols], dtype=_HEADER_DTYPE).tobytes()
        return PARAMS_MAGIC + header + np.ascontiguousarray(self.weights, dtype=_DATA_DTYPE).tobytes()

    @classmethod
    def from_bytes(cls, payload: bytes) -> Self:
        if payload[: len(PARAMS_MAGIC)] != PARAMS_MAGIC:
            logger.error("parameter payload does not start with the expected magic")
            raise ValueError("not a parameter file")
        offset = len(PARAMS_MAGIC)
        rows, cols = np.frombuffer(payload, dtype=_HEADER_DTYPE, count=2, offset=offset)
        offset += 2 * _HEADER_DTYPE.itemsize
        data = np.frombuffer(payload, dtype=_DATA_DTYPE, offset=offset)
        if data.size != rows * cols:
            raise ValueError(f"parameter payload holds {data.size} values, header says {rows}x{cols}")
        instance = cls.__new__(cls)
        LinearParams.__init__(instance, data.reshape(int(rows), int(cols)))
        return instance

    def save(self, path: str | PathLike):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | PathLike) -> Self:
        return cls.from_bytes(Path(path).read_bytes())


class PolicyParams(LinearParams):
    """Softmax policy weights theta (A x d) with an optional frozen snapshot theta_old."""

    def __init__(self, weights: np.ndarray):
        super().__init__(weights)
        self.snapshot_weights: Optional[np.ndarray] = None

    @classmethod
    def zeros(cls, actions: int, dimension: int) -> "PolicyParams":
        return cls(np.zeros((actions, dimension)))

    @classmethod
    def from_bytes(cls, payload: bytes) -> "PolicyParams":
        instance = super().from_bytes(payload)
        instance.snapshot_weights = None
        return instance

    def snapshot(self) -> "PolicyParams":
        self.snapshot_weights = self.weights.copy()
        return self


class CriticParams(LinearParams):
    """Per-action linear Q head (A x d) with the value clip range of its loss."""

    def __init__(self, weights: np.ndarray, value_clip: float = 0.5):
        super().__init__(weights)
        if value_clip <= 0:
            raise ValueError("value clip must be positive")
        self.value_clip = value_clip

    @classmethod
    def zeros(cls, actions: int, dimension: int, value_clip: float = 0.5) -> "CriticParams":
        return cls(np.zeros((actions, dimension)), value_clip)

    @classmethod
    def random(
        cls,
        actions: int,
        dimension: int,
        scale: float,
        seed: int,
        value_clip: float = 0.5,
    ) -> "CriticParams":
        """A fresh value head with N(0, scale^2) weights."""
        rng = np.random.default_rng(seed)
        return cls(rng.normal(0.0, scale, size=(actions, dimension)), value_clip)

    @classmethod
    def from_bytes(cls, payload: bytes, value_clip: float = 0.5) -> "CriticParams":
        instance = super().from_bytes(payload)
        instance.value_clip = value_clip
        return instance

    def predictions(self, features: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Q values for a batch of (features row, action) pairs."""
        return np.einsum("ij,ij->i", self.weights[actions], features)


class ValueParams(LinearParams):
    """Linear state-value baseline (1 x d) of the PPO baseline."""

    @classmethod
    def zeros(cls, dimension: int) -> "ValueParams":
        return cls(np.zeros((1, dimension)))

    def value(self, features: np.ndarray) -> float:
        return float(self.weights[0] @ features)


class PrmParams(LinearParams):
    """
    Per-action logistic classifier. Stored as one A x (d + 1) matrix whose last column is the
    bias, so the parameter file format is shared with the other models.
    """

    @classmethod
    def zeros(cls, actions: int, dimension: int) -> "PrmParams":
        return cls(np.zeros((actions, dimension + 1)))

    @property
    def beta(self) -> np.ndarray:
        return self.weights[:, :-1]

    @property
    def bias(self) -> np.ndarray:
        return self.weights[:, -1]

    @staticmethod
    def augment(features: np.ndarray) -> np.ndarray:
        if features.ndim == 1:
            return np.append(features, 1.0)
        return np.hstack([features, np.ones((features.shape[0], 1))])
