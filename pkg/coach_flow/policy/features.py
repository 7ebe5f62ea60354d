import numpy as np
from loguru import logger

from coach_flow.model.task import TaskSpec


class FeatureMap:
    """
    One-hot encoding over (task family, screen) pairs. Tasks of one family share their rows,
    so what is learned on a screen carries over to every task that passes it.
    """

    def __init__(self, family_of_task: dict[int, int], max_screens: int):
        families = sorted(set(family_of_task.values()))
        self._family_slot = {family: slot for slot, family in enumerate(families)}
        self._family_of_task = dict(family_of_task)
        self.max_screens = max_screens
        self.dimension = len(families) * max_screens

    @classmethod
    def from_tasks(cls, tasks: list[TaskSpec]) -> "FeatureMap":
        return cls(
            family_of_task={task.task_id: task.family_id for task in tasks},
            max_screens=max(len(task.graph.screens) for task in tasks),
        )

    def index(self, task_id: int, screen: int) -> int:
        try:
            slot = self._family_slot[self._family_of_task[task_id]]
        except KeyError:
            logger.error("task {task_id} is not part of the feature map", task_id=task_id)
            raise
        if not 0 <= screen < self.max_screens:
            raise ValueError(f"screen {screen} outside the encoded range")
        return slot * self.max_screens + screen

    def encode(self, task_id: int, screen: int) -> np.ndarray:
        features = np.zeros(self.dimension)
        features[self.index(task_id, screen)] = 1.0
        return features
