from typing import Optional

from dependency_injector import containers, providers

from coach_flow.model.config import RunConfig


def validated_settings(document: Optional[dict]) -> RunConfig:
    return RunConfig.model_validate(document or {})


class CoachFlowCoreContainer(containers.DeclarativeContainer):

    config = providers.Configuration()

    settings = providers.Singleton(validated_settings, config)
