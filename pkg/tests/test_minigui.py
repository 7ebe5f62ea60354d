import pytest

from coach_flow.env.minigui import outcome_verify, reset, step
from coach_flow.exceptions import ContractViolationError, EpisodeFinishedError
from coach_flow.model.episode import StepRecord, Trajectory


def _trajectory(task, actions) -> Trajectory:
    screen, steps = task.start_screen, []
    for action in actions:
        steps.append(StepRecord(screen=screen, action=action, old_logprob=0.0))
        if action != task.terminal_action:
            screen = task.graph.successor(screen, action)
    return Trajectory(task_id=task.task_id, steps=steps, done=True)


def test_reset(tiny_task, clock):
    state = reset(tiny_task, clock)

    assert state.current_screen == tiny_task.start_screen
    assert state.step_index == 0
    assert not state.done
    assert clock.env_time == 20.0
    assert reset(tiny_task, clock) == state


def test_terminal_on_goal(tiny_task, clock):
    state = reset(tiny_task, clock)
    state = step(tiny_task, state, 0, clock)
    state = step(tiny_task, state, 0, clock)
    state = step(tiny_task, state, tiny_task.terminal_action, clock)

    assert state.done
    assert state.succeeded
    assert state.history == [0, 0, 2]
    # three steps at 2.5 after a 20.0 init, no recovery on success
    assert clock.env_time == 27.5
    assert clock.interaction_count == 3


def test_terminal_off_goal(tiny_task, clock):
    state = step(tiny_task, reset(tiny_task, clock), tiny_task.terminal_action, clock)

    assert state.done
    assert not state.succeeded
    assert clock.env_time == 20.0 + 2.5 + 10.0


def test_navigation_follows_edges(tiny_task, clock):
    state = step(tiny_task, reset(tiny_task, clock), 0, clock)
    assert state.current_screen == 1

    state = step(tiny_task, state, 1, clock)
    assert state.current_screen == 0
    assert state.step_index == 2


def test_budget_ends_episode(tiny_task, clock):
    state = reset(tiny_task, clock)
    for _ in range(tiny_task.max_steps):
        state = step(tiny_task, state, 1, clock)

    assert state.done
    assert not state.succeeded
    assert state.step_index == tiny_task.max_steps


def test_step_after_done(tiny_task, clock):
    state = step(tiny_task, reset(tiny_task, clock), tiny_task.terminal_action, clock)

    with pytest.raises(EpisodeFinishedError):
        step(tiny_task, state, 0, clock)


@pytest.mark.parametrize("action", [-1, 3])
def test_action_out_of_range(tiny_task, clock, action):
    with pytest.raises(ValueError):
        step(tiny_task, reset(tiny_task, clock), action, clock)


def test_outcome_success(tiny_task):
    assert outcome_verify(_trajectory(tiny_task, [0, 0, 2]), tiny_task) == 1


def test_outcome_budget_exhausted(tiny_task):
    assert outcome_verify(_trajectory(tiny_task, [1, 1, 1, 1, 1]), tiny_task) == 0


def test_outcome_terminal_on_wrong_screen(tiny_task):
    assert outcome_verify(_trajectory(tiny_task, [0, 2]), tiny_task) == 0


def test_outcome_terminal_after_budget(tiny_task):
    assert outcome_verify(_trajectory(tiny_task, [1, 1, 0, 0, 0, 2]), tiny_task) == 0


def test_outcome_rejects_incomplete(tiny_task):
    trajectory = _trajectory(tiny_task, [0])
    trajectory.done = False

    with pytest.raises(ContractViolationError):
        outcome_verify(trajectory, tiny_task)


def test_outcome_rejects_inconsistent_screens(tiny_task):
    trajectory = _trajectory(tiny_task, [0, 0, 2])
    trajectory.steps[1].screen = 0

    with pytest.raises(ContractViolationError):
        outcome_verify(trajectory, tiny_task)
