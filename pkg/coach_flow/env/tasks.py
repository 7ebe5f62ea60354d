from os import PathLike
from pathlib import Path

import numpy as np
from loguru import logger
from pydantic import TypeAdapter

from coach_flow.exceptions import InvalidConfigError
from coach_flow.model.task import GraphParams, ScreenGraph, TaskSpec
from coach_flow.utils import canonical_json, sha256_hex

_task_list = TypeAdapter(list[TaskSpec])
_FAMILY_ATTEMPTS = 100


def _generate_graph(rng: np.random.Generator, params: GraphParams) -> tuple[ScreenGraph, int]:
    """
    A random in-tree toward the goal, grown from a spine of `params.min_depth` screens so the
    farthest start needs that many navigation steps. The remaining navigation edges never lead
    closer to the goal, so the oracle distance of a screen is its depth in the tree.
    """
    screen_count = int(rng.integers(params.min_screens, params.max_screens + 1))
    screens = list(range(screen_count))
    goal = int(rng.integers(screen_count))
    navigation = [a for a in range(params.actions) if a != params.terminal_action]
    spine_length = min(params.min_depth, screen_count - 1, params.max_steps - 1)

    successors: dict[tuple[int, int], int] = {}
    depth = {goal: 0}
    attached = [goal]
    for index, screen in enumerate(rng.permutation([s for s in screens if s != goal]).tolist()):
        if index < spine_length:
            parent = attached[-1]
        else:
            candidates = [s for s in attached if depth[s] < params.max_steps - 1]
            parent = candidates[int(rng.integers(len(candidates)))]
        tree_action = navigation[int(rng.integers(len(navigation)))]
        successors[(screen, tree_action)] = parent
        depth[screen] = depth[parent] + 1
        attached.append(screen)

    for screen in screens:
        # distractors: same depth or deeper, self-loops included
        away = [s for s in screens if depth[s] >= depth[screen]]
        for action in navigation:
            if (screen, action) not in successors:
                successors[(screen, action)] = away[int(rng.integers(len(away)))]

    graph = ScreenGraph(
        screens=screens,
        actions_per_screen=params.actions,
        terminal_action_index=params.terminal_action,
        edges=[(s, a, successor) for (s, a), successor in sorted(successors.items())],
    )
    return graph, goal


def oracle_action(task: TaskSpec, screen: int) -> int:
    """
    The shortest-path action from `screen`: the terminal action on the goal screen, otherwise
    the lowest-index navigation action that brings the goal one step closer.
    """
    if screen == task.goal_screen:
        return task.terminal_action

    distance = task.distance(screen)
    if distance is None:
        logger.error(
            "screen {screen} of task {task_id} cannot reach the goal",
            screen=screen,
            task_id=task.task_id,
        )
        raise ValueError(f"screen {screen} of task {task.task_id} cannot reach the goal")

    for action in task.graph.navigation_actions:
        if task.distance(task.graph.successor(screen, action)) == distance - 1:
            return action
    raise ValueError(f"no shortest-path action on screen {screen} of task {task.task_id}")


def oracle_path(task: TaskSpec) -> list[int]:
    """Screens visited by the oracle policy, start and goal included."""
    screens = [task.start_screen]
    while screens[-1] != task.goal_screen:
        screens.append(task.graph.successor(screens[-1], oracle_action(task, screens[-1])))
    return screens


def _family_tasks(
    rng: np.random.Generator,
    family_id: int,
    params: GraphParams,
) -> list[tuple[ScreenGraph, int, int, str]]:
    """
    Tasks of one family: the farthest start screens train, held-out tasks start on screens
    along the training tasks' oracle paths, never on the goal. A graph without enough such
    screens is dropped and another one is drawn.
    """
    train_count = params.tasks_per_family - params.holdout_per_family
    for _ in range(_FAMILY_ATTEMPTS):
        graph, goal = _generate_graph(rng, params)
        distances = graph.distances_to(goal)
        by_distance = sorted(
            (s for s in graph.screens if s != goal and s in distances),
            key=lambda s: (-distances[s], s),
        )
        train_starts = by_distance[:train_count]
        family = [(graph, start, goal, "train") for start in train_starts]
        if not params.holdout_per_family:
            return family

        template = TaskSpec(
            task_id=-1, family_id=family_id, graph=graph, start_screen=goal,
            goal_screen=goal, max_steps=params.max_steps, seed=0,
        )
        on_paths = set()
        for start in train_starts:
            on_paths.update(oracle_path(template.model_copy(update={"start_screen": start})))
        candidates = sorted(
            (s for s in on_paths if s not in train_starts and s != goal),
            key=lambda s: (-distances[s], s),
        )
        if len(candidates) >= params.holdout_per_family:
            family.extend((graph, start, goal, "eval") for start in candidates[: params.holdout_per_family])
            return family
        logger.debug(
            "family {family_id} graph has {found} held-out start screens, {needed} needed; drawing again",
            family_id=family_id,
            found=len(candidates),
            needed=params.holdout_per_family,
        )

    logger.error(
        "no graph for family {family_id} offers {needed} held-out start screens in {attempts} attempts",
        family_id=family_id,
        needed=params.holdout_per_family,
        attempts=_FAMILY_ATTEMPTS,
    )
    raise InvalidConfigError(
        "pool.holdout_per_family is too large for the graph sizes",
        key="pool.holdout_per_family",
    )


def generate_task_pool(pool_seed: int, count: int, params: GraphParams | None = None) -> list[TaskSpec]:
    """
    Generate `count` tasks, deterministic in `pool_seed`. Tasks come in families sharing a
    screen graph and goal; the farthest start screens of a family are training tasks and the
    held-out tasks start on screens along the training tasks' oracle paths.

    :param pool_seed: seed of the pool
    :param count: number of tasks to return
    :param params: graph size ranges and family layout
    :return: the list of tasks, with task ids 0..count-1
    :raises InvalidConfigError: when the parameters admit no valid task
    """
    params = params or GraphParams()
    if count < 1:
        logger.error("cannot generate a task pool of {count} tasks", count=count)
        raise InvalidConfigError("pool.count must be at least 1", key="pool.count")
    params.validate_ranges()

    rng = np.random.default_rng(pool_seed)
    tasks: list[TaskSpec] = []
    family_id = 0
    while len(tasks) < count:
        for graph, start, goal, split in _family_tasks(rng, family_id, params):
            if len(tasks) == count:
                break
            tasks.append(
                TaskSpec(
                    task_id=len(tasks),
                    family_id=family_id,
                    graph=graph,
                    start_screen=start,
                    goal_screen=goal,
                    max_steps=params.max_steps,
                    seed=int(rng.integers(0, 2**63)),
                    split=split,
                )
            )
        family_id += 1

    logger.info(
        "generated {count} tasks in {families} families from pool seed {pool_seed}",
        count=len(tasks),
        families=family_id,
        pool_seed=pool_seed,
    )
    return tasks


def split_task_pool(tasks: list[TaskSpec]) -> tuple[list[TaskSpec], list[TaskSpec]]:
    train = [task for task in tasks if task.split == "train"]
    held_out = [task for task in tasks if task.split == "eval"]
    return train, held_out


def task_pool_json(tasks: list[TaskSpec]) -> bytes:
    return _task_list.dump_json(tasks, indent=2)


def save_task_pool(path: str | PathLike, tasks: list[TaskSpec]):
    Path(path).write_bytes(task_pool_json(tasks))


def load_task_pool(path: str | PathLike) -> list[TaskSpec]:
    return _task_list.validate_json(Path(path).read_bytes())


def pool_hash(tasks: list[TaskSpec]) -> str:
    return sha256_hex(canonical_json(_task_list.dump_python(tasks, mode="json")))
