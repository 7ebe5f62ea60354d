from loguru import logger
from statemachine import State, StateMachine
from statemachine.exceptions import TransitionNotAllowed

from coach_flow.exceptions import ContractViolationError
from coach_flow.model.metrics import IterationBatch


class IterationPhases(StateMachine):
    """
    The phases one training iteration moves through. The machine writes the value of its
    current state into the `state` field of the iteration buffer it manages, so a persisted
    buffer always tells which phase produced it.

    Methods without a critic go from `assigning` straight to `actor_update`; critic warm-up
    iterations finish right after `critic_update`.
    """

    idle = State(value="idle", initial=True)
    collecting = State(value="collecting")
    assigning = State(value="assigning")
    critic_update = State(value="critic_update")
    actor_update = State(value="actor_update")

    collect = idle.to(collecting)
    assign = collecting.to(assigning)
    fit_critic = assigning.to(critic_update)
    fit_actor = critic_update.to(actor_update) | assigning.to(actor_update)
    finish = actor_update.to(idle) | critic_update.to(idle)
    abort = (
        collecting.to(idle)
        | assigning.to(idle)
        | critic_update.to(idle)
        | actor_update.to(idle)
    )

    def __init__(self, model: IterationBatch):
        super(IterationPhases, self).__init__(model=model)

    def after_transition(self, event: str, source: State, target: State):
        logger.debug(
            "iteration {iteration} moved from {source} to {target} on {event}",
            iteration=self.model.iteration,
            source=source.id,
            target=target.id,
            event=event,
        )

    def advance(self, event: str):
        """
        Send `event`, turning a transition the current phase does not allow into a
        contract violation.
        """
        try:
            self.send(event)
        except TransitionNotAllowed:
            logger.error(
                "event {event} not allowed in phase {phase} of iteration {iteration}",
                event=event,
                phase=self.current_state.id,
                iteration=self.model.iteration,
            )
            raise ContractViolationError(f"event {event} not allowed in phase {self.current_state.id}")
