import pytest

from coach_flow.exceptions import ContractViolationError
from coach_flow.model.metrics import IterationBatch
from coach_flow.trainer.phases import IterationPhases


@pytest.fixture
def phases() -> IterationPhases:
    return IterationPhases(IterationBatch(iteration=0))


def test_starts_idle(phases):
    assert phases.current_state.id == "idle"
    assert phases.model.state == "idle"


def test_full_cycle_writes_state(phases):
    visited = []
    for event in ("collect", "assign", "fit_critic", "fit_actor"):
        phases.advance(event)
        visited.append(phases.model.state)
    phases.advance("finish")

    assert visited == ["collecting", "assigning", "critic_update", "actor_update"]
    assert phases.model.state == "idle"


def test_actor_without_critic(phases):
    for event in ("collect", "assign", "fit_actor", "finish"):
        phases.advance(event)

    assert phases.model.state == "idle"


def test_warmup_finishes_after_critic(phases):
    for event in ("collect", "assign", "fit_critic", "finish"):
        phases.advance(event)

    assert phases.model.state == "idle"


def test_skipping_a_phase_is_a_violation(phases):
    phases.advance("collect")

    with pytest.raises(ContractViolationError):
        phases.advance("fit_critic")
    assert phases.model.state == "collecting"


def test_actor_before_collect_is_a_violation(phases):
    with pytest.raises(ContractViolationError):
        phases.advance("fit_actor")


def test_abort_returns_to_idle(phases):
    for event in ("collect", "assign", "fit_critic"):
        phases.advance(event)

    phases.advance("abort")

    assert phases.model.state == "idle"


def test_abort_while_idle_is_a_violation(phases):
    with pytest.raises(ContractViolationError):
        phases.advance("abort")
