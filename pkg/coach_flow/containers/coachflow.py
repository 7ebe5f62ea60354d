from dependency_injector import containers, providers

from coach_flow.charts import ChartEnvironment
from coach_flow.cli.store import RunStore
from coach_flow.containers.core import CoachFlowCoreContainer
from coach_flow.containers.environment import CoachFlowEnvironmentContainer
from coach_flow.trainer.session import TrainingSession


class CoachFlowContainer(containers.DeclarativeContainer):

    config = providers.Configuration()

    core = providers.Container(
        CoachFlowCoreContainer,
        config=config,
    )

    environment = providers.Container(
        CoachFlowEnvironmentContainer,
        settings=core.settings,
    )

    session_factory = providers.Factory(
        TrainingSession,
        task_split=environment.task_split,
        feature_map=environment.feature_map,
    )

    run_store = providers.Factory(
        RunStore,
        output_dir=core.settings.provided.run.output_dir,
    )

    chart_environment = providers.Singleton(ChartEnvironment)
