import numpy as np
import pytest
from loguru import logger

from coach_flow import CoachFlow
from coach_flow.cli.config import set_dotted
from coach_flow.env.tasks import generate_task_pool, split_task_pool
from coach_flow.model.clock import LatencyModel, SimClock
from coach_flow.model.config import RunConfig
from coach_flow.model.task import GraphParams, ScreenGraph, TaskSpec
from coach_flow.policy.features import FeatureMap
from coach_flow.trainer.session import TrainingSession


def line_graph(screens: int = 3, actions: int = 3) -> ScreenGraph:
    """Screens 0..n-1 in a line: action 0 moves forward, every other navigation action resets to 0."""
    terminal = actions - 1
    edges = []
    for screen in range(screens):
        for action in range(actions):
            if action == terminal:
                continue
            successor = min(screen + 1, screens - 1) if action == 0 else 0
            edges.append((screen, action, successor))
    return ScreenGraph(
        screens=list(range(screens)),
        actions_per_screen=actions,
        terminal_action_index=terminal,
        edges=edges,
    )


def line_task(task_id: int = 0, screens: int = 3, actions: int = 3, max_steps: int = 5, start: int = 0) -> TaskSpec:
    return TaskSpec(
        task_id=task_id,
        family_id=0,
        graph=line_graph(screens, actions),
        start_screen=start,
        goal_screen=screens - 1,
        max_steps=max_steps,
        seed=task_id,
    )


@pytest.fixture
def tiny_task() -> TaskSpec:
    return line_task()


@pytest.fixture
def tiny_features() -> FeatureMap:
    return FeatureMap({0: 0, 1: 0}, max_screens=3)


@pytest.fixture
def clock() -> SimClock:
    return SimClock(latency=LatencyModel())


@pytest.fixture(scope="session")
def default_pool() -> list[TaskSpec]:
    return generate_task_pool(7, 32, GraphParams())


@pytest.fixture(scope="session")
def default_split(default_pool) -> tuple[list[TaskSpec], list[TaskSpec]]:
    return split_task_pool(default_pool)


@pytest.fixture(scope="session")
def default_features(default_pool) -> FeatureMap:
    return FeatureMap.from_tasks(default_pool)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def fast_settings(tmp_path) -> RunConfig:
    """A configuration small enough for unit tests of the trainer and the command line."""
    return RunConfig.model_validate(
        {
            "run": {
                "output_dir": str(tmp_path / "run"),
                "iterations": 2,
                "time_budget": None,
                "workers": 1,
            },
            "pool": {"count": 8},
            "prm": {"samples_per_state": 16},
            "trainer": {"critic_pretrain_epochs": 5},
            "logging": {"level": "WARNING"},
        }
    )


@pytest.fixture
def make_session(fast_settings):
    """
    Build a training session on the small pool of `fast_settings`, with dotted-key overrides
    such as `make_session(seed=1, **{"trainer.method": "ppo"})`.
    """

    def _make(seed: int = 0, **overrides) -> TrainingSession:
        document = fast_settings.model_dump(mode="json")
        for dotted_key, value in overrides.items():
            set_dotted(document, dotted_key, value)
        settings = RunConfig.model_validate(document)
        return CoachFlow.from_config(settings).session(seed)

    return _make


@pytest.fixture(autouse=True)
def quiet_logger():
    logger.remove()
    logger.add(lambda message: None, level="WARNING")
    yield
    # the command line replaces handlers on its own
    logger.remove()
