import pytest

from coach_flow.env.tasks import (
    generate_task_pool,
    load_task_pool,
    oracle_action,
    oracle_path,
    pool_hash,
    save_task_pool,
    split_task_pool,
    task_pool_json,
)
from coach_flow.exceptions import InvalidConfigError
from coach_flow.model.task import GraphParams, ScreenGraph

SMALL = GraphParams(min_screens=4, max_screens=8, actions=4)


def test_pool_is_deterministic():
    first = generate_task_pool(7, 100, SMALL)
    second = generate_task_pool(7, 100, SMALL)

    assert len(first) == 100
    assert task_pool_json(first) == task_pool_json(second)


def test_single_task_pool():
    assert generate_task_pool(7, 1, SMALL) == generate_task_pool(7, 1, SMALL)


def test_pools_differ_across_seeds():
    first = generate_task_pool(7, 100, SMALL)
    second = generate_task_pool(8, 100, SMALL)

    assert any(a.graph != b.graph for a, b in zip(first, second))
    assert pool_hash(first) != pool_hash(second)


def test_every_task_is_solvable(default_pool):
    for task in default_pool:
        path = oracle_path(task)
        assert path[0] == task.start_screen
        assert path[-1] == task.goal_screen
        # navigation steps plus the terminal action fit the budget
        assert len(path) <= task.max_steps
        assert oracle_action(task, task.goal_screen) == task.terminal_action


def test_task_ids_and_families(default_pool):
    assert [task.task_id for task in default_pool] == list(range(len(default_pool)))
    for task in default_pool:
        assert task.actions == 6
        assert task.terminal_action == 5


def test_split_is_disjoint(default_pool, default_split):
    train, held_out = default_split

    assert train and held_out
    assert len(train) + len(held_out) == len(default_pool)
    assert not {t.task_id for t in train} & {t.task_id for t in held_out}
    assert all(task.split == "train" for task in train)


def test_held_out_tasks_share_family_with_training(default_split):
    train, held_out = default_split
    train_families = {task.family_id for task in train}

    assert all(task.family_id in train_families for task in held_out)


def test_held_out_start_lies_on_a_training_path(default_split):
    train, held_out = default_split
    for task in held_out:
        on_paths = set()
        for sibling in train:
            if sibling.family_id == task.family_id:
                on_paths.update(oracle_path(sibling))
        assert task.start_screen in on_paths


def test_held_out_tasks_need_navigation(default_split):
    _, held_out = default_split

    for task in held_out:
        assert task.start_screen != task.goal_screen
        assert len(oracle_path(task)) >= 2


def test_farthest_start_has_minimum_depth(default_pool, default_split):
    train, _ = default_split
    families = {task.family_id for task in default_pool}

    for family_id in families:
        depths = [len(oracle_path(task)) - 1 for task in train if task.family_id == family_id]
        assert max(depths) >= 3


def test_oracle_distance_is_tree_depth(default_pool):
    # no navigation edge leads more than one step closer to the goal
    for task in default_pool:
        for screen in task.graph.screens:
            distance = task.distance(screen)
            for action in task.graph.navigation_actions:
                assert task.distance(task.graph.successor(screen, action)) >= distance - 1


def test_too_many_held_out_tasks():
    params = GraphParams(min_screens=3, max_screens=3, actions=3, tasks_per_family=3, holdout_per_family=2)

    with pytest.raises(InvalidConfigError) as error:
        generate_task_pool(7, 3, params)

    assert error.value.key == "pool.holdout_per_family"


def test_invalid_min_depth():
    with pytest.raises(InvalidConfigError) as error:
        generate_task_pool(7, 4, GraphParams(min_depth=0))

    assert error.value.key == "pool.min_depth"


def test_invalid_count():
    with pytest.raises(InvalidConfigError):
        generate_task_pool(7, 0)


def test_invalid_ranges():
    with pytest.raises(InvalidConfigError) as error:
        generate_task_pool(7, 4, GraphParams(min_screens=6, max_screens=5))

    assert error.value.key == "pool.max_screens"


def test_graph_rejects_missing_edges():
    with pytest.raises(ValueError):
        ScreenGraph(screens=[0, 1], actions_per_screen=2, terminal_action_index=1, edges=[(0, 0, 1)])


def test_graph_rejects_terminal_edge():
    with pytest.raises(ValueError):
        ScreenGraph(
            screens=[0, 1],
            actions_per_screen=2,
            terminal_action_index=1,
            edges=[(0, 0, 1), (1, 0, 0), (1, 1, 0)],
        )


def test_pool_file_round_trip(tmp_path, default_pool):
    save_task_pool(tmp_path / "task_pool.json", default_pool)

    restored = load_task_pool(tmp_path / "task_pool.json")

    assert pool_hash(restored) == pool_hash(default_pool)
    assert restored[0].distance(restored[0].start_screen) == default_pool[0].distance(default_pool[0].start_screen)
