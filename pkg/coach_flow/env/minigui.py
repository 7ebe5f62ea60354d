from loguru import logger

from coach_flow.exceptions import ContractViolationError, EpisodeFinishedError
from coach_flow.model.clock import SimClock
from coach_flow.model.episode import Trajectory
from coach_flow.model.task import EnvState, TaskSpec


def reset(task: TaskSpec, clock: SimClock) -> EnvState:
    clock.charge_init()
    return EnvState(task_id=task.task_id, current_screen=task.start_screen)


def step(task: TaskSpec, state: EnvState, action: int, clock: SimClock) -> EnvState:
    """
    Execute one action. The terminal action ends the episode, successfully only on the goal
    screen; reaching the step budget ends it unsuccessfully.

    :raises EpisodeFinishedError: when `state` is already done
    :raises ValueError: for an action outside the action set
    """
    if state.done:
        logger.error(
            "cannot step task {task_id}, episode finished after {steps} steps",
            task_id=state.task_id,
            steps=state.step_index,
        )
        raise EpisodeFinishedError(f"episode of task {state.task_id} is already finished")
    if not 0 <= action < task.actions:
        logger.error("action {action} outside [0, {actions})", action=action, actions=task.actions)
        raise ValueError(f"action {action} outside [0, {task.actions})")

    step_index = state.step_index + 1
    if action == task.terminal_action:
        screen = state.current_screen
        done = True
        succeeded = screen == task.goal_screen
    else:
        screen = task.graph.successor(state.current_screen, action)
        done = step_index >= task.max_steps
        succeeded = False

    clock.charge_step(failed_termination=done and not succeeded)
    return EnvState(
        task_id=state.task_id,
        current_screen=screen,
        step_index=step_index,
        history=state.history + [action],
        done=done,
        succeeded=succeeded,
    )


def outcome_verify(trajectory: Trajectory, task: TaskSpec) -> int:
    """
    Rule-based outcome reward: 1 iff the terminal action was executed on the goal screen within
    the step budget. The recorded screens are replayed against the task graph first.

    :raises ContractViolationError: for an incomplete or inconsistent trajectory
    """
    if not trajectory.done or not trajectory.steps:
        logger.error(
            "cannot verify an incomplete trajectory of task {task_id}",
            task_id=trajectory.task_id,
        )
        raise ContractViolationError(f"trajectory of task {trajectory.task_id} is not complete")

    screen = task.start_screen
    for index, record in enumerate(trajectory.steps):
        if record.screen != screen:
            logger.error(
                "trajectory of task {task_id} records screen {recorded} at step {index}, "
                "replay gives {screen}",
                task_id=task.task_id,
                recorded=record.screen,
                index=index,
                screen=screen,
            )
            raise ContractViolationError(f"trajectory of task {task.task_id} does not replay")
        if record.action != task.terminal_action:
            screen = task.graph.successor(screen, record.action)

    last = trajectory.steps[-1]
    within_budget = trajectory.length <= task.max_steps
    return int(within_budget and last.action == task.terminal_action and last.screen == task.goal_screen)
