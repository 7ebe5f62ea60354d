from dependency_injector import containers, providers

from coach_flow.env import tasks
from coach_flow.model.config import RunConfig
from coach_flow.policy.features import FeatureMap


class CoachFlowEnvironmentContainer(containers.DeclarativeContainer):

    settings = providers.Dependency(instance_of=RunConfig)

    task_pool = providers.Singleton(
        tasks.generate_task_pool,
        pool_seed=settings.provided.pool.seed,
        count=settings.provided.pool.count,
        params=settings.provided.graph_params,
    )

    task_split = providers.Singleton(tasks.split_task_pool, task_pool)

    feature_map = providers.Singleton(FeatureMap.from_tasks, task_pool)

    pool_hash = providers.Singleton(tasks.pool_hash, task_pool)
