from loguru import logger

from coach_flow.env.minigui import outcome_verify, reset, step
from coach_flow.model.clock import SimClock
from coach_flow.model.episode import StepRecord, Trajectory
from coach_flow.model.task import TaskSpec
from coach_flow.policy.features import FeatureMap
from coach_flow.policy.params import PolicyParams
from coach_flow.policy.policy import greedy_action


def greedy_episode(task: TaskSpec, policy: PolicyParams, features: FeatureMap, clock: SimClock) -> Trajectory:
    state = reset(task, clock)
    steps = []
    while not state.done:
        action = greedy_action(policy, features.encode(task.task_id, state.current_screen))
        steps.append(StepRecord(screen=state.current_screen, action=action, old_logprob=0.0))
        state = step(task, state, action, clock)
    trajectory = Trajectory(task_id=task.task_id, steps=steps, done=True, succeeded=state.succeeded)
    trajectory.r_o = outcome_verify(trajectory, task)
    return trajectory


def evaluate(
    policy: PolicyParams,
    eval_tasks: list[TaskSpec],
    episodes_per_task: int,
    features: FeatureMap,
) -> float:
    """
    Success rate of the greedy policy on the evaluation tasks. Episodes run on a scratch clock,
    so evaluation never charges training time.
    """
    if not eval_tasks:
        logger.error("evaluation needs at least one task")
        raise ValueError("empty evaluation task list")
    if episodes_per_task < 1:
        raise ValueError("episodes_per_task must be at least 1")

    scratch = SimClock()
    successes = 0
    for task in eval_tasks:
        for _ in range(episodes_per_task):
            successes += greedy_episode(task, policy, features, scratch).r_o
    return successes / (len(eval_tasks) * episodes_per_task)
