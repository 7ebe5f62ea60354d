import json
from functools import cache

import pytest

from coach_flow.env.pool import pool_rollout, run_episode, write_trajectories
from coach_flow.exceptions import NumericError
from coach_flow.model.clock import LatencyModel, SimClock
from coach_flow.model.episode import Trajectory
from coach_flow.model.task import ScreenGraph, TaskSpec
from coach_flow.policy.features import FeatureMap
from coach_flow.policy.params import PolicyParams


def _uniform(task, features) -> PolicyParams:
    return PolicyParams.zeros(task.actions, features.dimension)


def exact_success_rate(task) -> float:
    """Success probability of the uniform policy, by recursion over (screen, steps left)."""
    share = 1.0 / task.actions

    @cache
    def success(screen: int, steps_left: int) -> float:
        if steps_left == 0:
            return 0.0
        value = share if screen == task.goal_screen else 0.0
        for action in task.graph.navigation_actions:
            value += share * success(task.graph.successor(screen, action), steps_left - 1)
        return value

    return success(task.start_screen, task.max_steps)


def test_rollout_completes_every_episode(default_split, default_features):
    tasks = default_split[0][:8]
    clock = SimClock()

    trajectories = pool_rollout(tasks, _uniform(tasks[0], default_features), clock, 11, default_features)

    assert len(trajectories) == 8
    assert all(t.done and t.r_o is not None for t in trajectories)
    assert [t.task_id for t in trajectories] == [task.task_id for task in tasks]
    assert clock.interaction_count == sum(t.length for t in trajectories)
    assert clock.sampled_action_count == clock.interaction_count


def test_workers_do_not_change_results(default_split, default_features):
    tasks = default_split[0][:8]
    policy = _uniform(tasks[0], default_features)
    single, parallel = SimClock(), SimClock()

    first = pool_rollout(tasks, policy, single, 11, default_features, workers=1)
    second = pool_rollout(tasks, policy, parallel, 11, default_features, workers=8)

    assert [t.serialize() for t in first] == [t.serialize() for t in second]
    assert single == parallel


def test_model_load_charged_once_per_rollout(default_split, default_features):
    tasks = default_split[0][:8]
    clock = SimClock()

    trajectories = pool_rollout(tasks, _uniform(tasks[0], default_features), clock, 3, default_features)

    steps = sum(t.length for t in trajectories)
    assert clock.inference_time == pytest.approx(160.0 + steps * 1.0)
    assert sum(t.sim_times["inference"] for t in trajectories) == pytest.approx(steps * 1.0)


def test_recovery_charged_for_failures(default_split, default_features):
    tasks = default_split[0][:8]
    clock = SimClock()

    trajectories = pool_rollout(tasks, _uniform(tasks[0], default_features), clock, 5, default_features)

    failures = sum(not t.succeeded for t in trajectories)
    steps = sum(t.length for t in trajectories)
    assert clock.env_time == pytest.approx(8 * 20.0 + steps * 2.5 + failures * 10.0)


def test_environment_dominates_inference(default_split, default_features):
    train = default_split[0]
    policy = _uniform(train[0], default_features)
    clock = SimClock()

    for batch in range(32):
        tasks = [train[(8 * batch + i) % len(train)] for i in range(8)]
        pool_rollout(tasks, policy, clock, batch, default_features)

    assert 1.6 <= clock.env_time / clock.inference_time <= 1.8


def test_latency_ratio_formula():
    # uniform policy over six actions, 25-step budget: mean length 5.94, nearly always failing
    assert 1.6 <= LatencyModel().env_to_inference_ratio(5.94, 0.9, 8) <= 1.8


def test_uniform_success_on_trivial_task():
    # every navigation action stays put, the goal is the start screen
    graph = ScreenGraph(
        screens=[0, 1],
        actions_per_screen=3,
        terminal_action_index=2,
        edges=[(0, 0, 0), (0, 1, 0), (1, 0, 1), (1, 1, 1)],
    )
    task = TaskSpec(task_id=0, family_id=0, graph=graph, start_screen=0, goal_screen=0, max_steps=5, seed=0)
    features = FeatureMap({0: 0}, max_screens=2)

    trajectories = pool_rollout([task] * 1000, _uniform(task, features), SimClock(), 17, features)

    # goal is the start screen: success iff the terminal action comes within the budget
    expected = 1 - (2 / 3) ** 5
    assert exact_success_rate(task) == pytest.approx(expected)
    assert sum(t.r_o for t in trajectories) / 1000 == pytest.approx(expected, abs=0.05)


def test_uniform_success_matches_enumeration(tiny_task, tiny_features):
    trajectories = pool_rollout([tiny_task] * 4000, _uniform(tiny_task, tiny_features), SimClock(), 23, tiny_features)

    expected = exact_success_rate(tiny_task)
    assert 0 < expected < 1
    assert sum(t.r_o for t in trajectories) / 4000 == pytest.approx(expected, abs=0.03)


def test_rollout_rejects_non_finite_policy(tiny_task, tiny_features):
    policy = _uniform(tiny_task, tiny_features)
    policy.weights[0, 0] = float("nan")

    with pytest.raises(NumericError):
        pool_rollout([tiny_task], policy, SimClock(), 0, tiny_features)


def test_trajectory_lines(tmp_path, tiny_task, tiny_features, rng):
    trajectory = run_episode(tiny_task, _uniform(tiny_task, tiny_features), tiny_features, SimClock(), rng)
    path = tmp_path / "trajectories.jsonl"

    write_trajectories(path, [trajectory, trajectory])

    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2
    restored = Trajectory.model_validate_json(lines[0])
    assert restored.steps == trajectory.steps
    assert restored.r_o == trajectory.r_o
    line = json.loads(lines[0])
    assert set(line) == {"task_id", "steps", "r_o", "sim_times"}
    assert all(set(step) == {"screen", "action", "old_logprob", "r_p"} for step in line["steps"])
