from os import PathLike
from typing import Optional

from coach_flow.charts import ChartEnvironment
from coach_flow.cli.config import load_settings
from coach_flow.cli.store import RunStore
from coach_flow.containers.coachflow import CoachFlowContainer
from coach_flow.model.config import RunConfig
from coach_flow.model.task import TaskSpec
from coach_flow.policy.features import FeatureMap
from coach_flow.trainer.session import TrainingSession


class CoachFlow:

    def __init__(self, container: CoachFlowContainer):
        self.container = container

    @classmethod
    def from_yaml(cls, config_file_path: str | PathLike) -> "CoachFlow":
        """Read, expand and validate a YAML configuration the way the command line does."""
        return cls.from_config(load_settings(config_file_path))

    @classmethod
    def from_config(cls, settings: RunConfig) -> "CoachFlow":
        container = CoachFlowContainer()
        container.config.from_dict(settings.model_dump(mode="json"))
        return cls(container)

    @property
    def settings(self) -> RunConfig:
        return self.container.core.settings()

    @property
    def task_pool(self) -> list[TaskSpec]:
        return self.container.environment.task_pool()

    @property
    def task_split(self) -> tuple[list[TaskSpec], list[TaskSpec]]:
        return self.container.environment.task_split()

    @property
    def feature_map(self) -> FeatureMap:
        return self.container.environment.feature_map()

    @property
    def pool_hash(self) -> str:
        return self.container.environment.pool_hash()

    @property
    def chart_environment(self) -> ChartEnvironment:
        return self.container.chart_environment()

    def run_store(self) -> RunStore:
        """The store of the configured output directory; enter it to take the directory lock."""
        return self.container.run_store()

    def session(self, seed: int, settings: Optional[RunConfig] = None) -> TrainingSession:
        """A fresh training session on the shared task pool, for another configuration if given."""
        return self.container.session_factory(settings=settings or self.settings, seed=seed)
