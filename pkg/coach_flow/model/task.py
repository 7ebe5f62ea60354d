from collections import deque
from typing import Literal

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from coach_flow.exceptions import InvalidConfigError


class GraphParams(BaseModel):
    """Size ranges for generated task families."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    min_screens: int = Field(default=5, description="minimum number of screens per family graph")
    max_screens: int = Field(default=8, description="maximum number of screens per family graph")
    actions: int = Field(default=6, description="actions per screen, including the terminal action")
    terminal_action_index: int | None = Field(
        default=None,
        description="index of the terminal action; the last action when not given",
    )
    max_steps: int = Field(default=25, description="episode step budget T_max")
    min_depth: int = Field(
        default=3,
        description="oracle distance of the farthest start screen, capped by the graph size and step budget",
    )
    tasks_per_family: int = Field(default=4, description="tasks drawn from one graph and goal")
    holdout_per_family: int = Field(
        default=1,
        description="tasks per family reserved for held-out evaluation",
    )

    @property
    def terminal_action(self) -> int:
        return self.actions - 1 if self.terminal_action_index is None else self.terminal_action_index

    def validate_ranges(self):
        problems = []
        if self.min_screens < 3:
            problems.append(("min_screens", "a graph needs at least 3 screens"))
        if self.max_screens < self.min_screens:
            problems.append(("max_screens", "max_screens is smaller than min_screens"))
        if self.actions < 2:
            problems.append(("actions", "at least one navigation and one terminal action needed"))
        if not 0 <= self.terminal_action < self.actions:
            problems.append(("terminal_action_index", "terminal action outside the action set"))
        if self.max_steps < 2:
            problems.append(("max_steps", "a goal one step away needs two steps to finish"))
        if self.min_depth < 1:
            problems.append(("min_depth", "the farthest start must be at least one step from the goal"))
        if self.tasks_per_family < 1 or not 0 <= self.holdout_per_family < self.tasks_per_family:
            problems.append(("holdout_per_family", "every family needs at least one training task"))

        for key, reason in problems:
            logger.error(
                "invalid graph parameter {key}: {reason}",
                key=key,
                reason=reason,
            )
        if problems:
            key, reason = problems[0]
            raise InvalidConfigError(f"pool.{key}: {reason}", key=f"pool.{key}")


class ScreenGraph(BaseModel):
    """
    Directed graph of screens. Every non-terminal action on every screen leads to exactly
    one successor screen; self-loops are allowed.
    """

    screens: list[int] = Field(description="screen identifiers, 0..n-1")
    actions_per_screen: int = Field(gt=0, description="the uniform action count A")
    terminal_action_index: int = Field(ge=0, description="the distinguished finish action")
    edges: list[tuple[int, int, int]] = Field(
        description="explicit (screen, action, successor) triples",
    )

    _successors: dict[tuple[int, int], int] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def _check_edges(self) -> "ScreenGraph":
        if self.terminal_action_index >= self.actions_per_screen:
            raise ValueError("terminal action index outside the action set")
        known = set(self.screens)
        successors = {}
        for screen, action, successor in self.edges:
            if action == self.terminal_action_index:
                raise ValueError(f"terminal action has an edge on screen {screen}")
            if screen not in known or successor not in known:
                raise ValueError(f"edge ({screen}, {action}) refers to an unknown screen")
            if (screen, action) in successors:
                raise ValueError(f"duplicate edge for ({screen}, {action})")
            successors[(screen, action)] = successor

        expected = len(self.screens) * (self.actions_per_screen - 1)
        if len(successors) != expected:
            raise ValueError(f"graph has {len(successors)} edges, expected {expected}")
        self._successors = successors
        return self

    @property
    def navigation_actions(self) -> list[int]:
        return [a for a in range(self.actions_per_screen) if a != self.terminal_action_index]

    def successor(self, screen: int, action: int) -> int:
        return self._successors[(screen, action)]

    def distances_to(self, goal: int) -> dict[int, int]:
        """Shortest number of navigation steps from every screen that can reach `goal`."""
        predecessors: dict[int, list[int]] = {screen: [] for screen in self.screens}
        for (screen, _), successor in self._successors.items():
            predecessors[successor].append(screen)

        distances = {goal: 0}
        queue = deque([goal])
        while queue:
            current = queue.popleft()
            for previous in predecessors[current]:
                if previous not in distances:
                    distances[previous] = distances[current] + 1
                    queue.append(previous)
        return distances


class TaskSpec(BaseModel):
    task_id: int = Field(description="identifies (graph, start, goal) within a pool")
    family_id: int = Field(description="tasks of one family share graph and goal")
    graph: ScreenGraph
    start_screen: int
    goal_screen: int
    max_steps: int = Field(gt=0, description="episode step budget T_max")
    seed: int = Field(ge=0, lt=2**64)
    split: Literal["train", "eval"] = Field(default="train")

    _distances: dict[int, int] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def _check_reachable(self) -> "TaskSpec":
        self._distances = self.graph.distances_to(self.goal_screen)
        distance = self._distances.get(self.start_screen)
        if distance is None or distance > self.max_steps - 1:
            raise ValueError(
                f"task {self.task_id}: goal not reachable from the start within "
                f"{self.max_steps - 1} navigation steps"
            )
        return self

    @property
    def actions(self) -> int:
        return self.graph.actions_per_screen

    @property
    def terminal_action(self) -> int:
        return self.graph.terminal_action_index

    def distance(self, screen: int) -> int | None:
        return self._distances.get(screen)


class EnvState(BaseModel):
    task_id: int
    current_screen: int
    step_index: int = Field(default=0, ge=0)
    history: list[int] = Field(default_factory=list, description="executed action indices")
    done: bool = False
    succeeded: bool = False
