from concurrent.futures import ThreadPoolExecutor
from os import PathLike
from typing import Iterable

import numpy as np
from loguru import logger

from coach_flow.env.minigui import outcome_verify, reset, step
from coach_flow.model.clock import SimClock
from coach_flow.model.episode import StepRecord, Trajectory
from coach_flow.model.task import TaskSpec
from coach_flow.policy.features import FeatureMap
from coach_flow.policy.params import PolicyParams
from coach_flow.policy.policy import action_distribution, sample_action


def run_episode(
    task: TaskSpec,
    policy: PolicyParams,
    features: FeatureMap,
    clock: SimClock,
    rng: np.random.Generator,
    temperature: float = 1.0,
) -> Trajectory:
    """Roll out one complete episode, charging `clock` for every sample and step."""
    env_before, inference_before = clock.env_time, clock.inference_time
    state = reset(task, clock)
    steps = []
    while not state.done:
        probabilities = action_distribution(
            policy, features.encode(task.task_id, state.current_screen), temperature
        )
        action = sample_action(probabilities, rng)
        clock.charge_samples(1)
        steps.append(
            StepRecord(
                screen=state.current_screen,
                action=action,
                old_logprob=float(np.log(probabilities[action])),
            )
        )
        state = step(task, state, action, clock)

    trajectory = Trajectory(
        task_id=task.task_id,
        steps=steps,
        done=True,
        succeeded=state.succeeded,
        sim_times={
            "env": clock.env_time - env_before,
            "inference": clock.inference_time - inference_before,
        },
    )
    trajectory.r_o = outcome_verify(trajectory, task)
    return trajectory


def pool_rollout(
    tasks: list[TaskSpec],
    policy: PolicyParams,
    clock: SimClock,
    rollout_seed: int,
    features: FeatureMap,
    temperature: float = 1.0,
    workers: int = 1,
) -> list[Trajectory]:
    """
    Roll out one episode per task on a pool of parallel environments.

    Every episode draws from its own random stream, seeded by (rollout_seed, task index), and
    charges its own clock shard; shards are merged in task order after all episodes finished.
    Results and clock totals are therefore identical for any number of workers.
    The policy is loaded into the pool once per call.

    :raises NumericError: when the policy holds non-finite parameters
    """
    if not tasks:
        raise ValueError("pool_rollout needs at least one task")
    policy.assert_finite("policy parameters")

    shards = [clock.shard() for _ in tasks]

    def _rollout(index: int) -> Trajectory:
        rng = np.random.default_rng([rollout_seed, index])
        return run_episode(tasks[index], policy, features, shards[index], rng, temperature)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            trajectories = list(executor.map(_rollout, range(len(tasks))))
    else:
        trajectories = [_rollout(index) for index in range(len(tasks))]

    clock.charge_model_load()
    for shard in shards:
        clock.merge(shard)

    logger.debug(
        "rolled out {episodes} episodes, {successes} successful, {interactions} interactions",
        episodes=len(trajectories),
        successes=sum(t.succeeded for t in trajectories),
        interactions=sum(s.interaction_count for s in shards),
    )
    return trajectories


def write_trajectories(path: str | PathLike, trajectories: Iterable[Trajectory], append: bool = True):
    with open(path, "a" if append else "w", encoding="utf-8") as output:
        for trajectory in trajectories:
            output.write(trajectory.to_json_line())
            output.write("\n")
