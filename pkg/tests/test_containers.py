from pathlib import Path

import pytest
import yaml

from coach_flow import CoachFlow
from coach_flow.env.tasks import pool_hash
from coach_flow.exceptions import InvalidConfigError


def test_environment_is_shared(fast_settings):
    flow = CoachFlow.from_config(fast_settings)

    assert flow.task_pool is flow.task_pool
    assert len(flow.task_pool) == 8
    assert flow.pool_hash == pool_hash(flow.task_pool)
    train, held_out = flow.task_split
    assert len(train) + len(held_out) == 8


def test_sessions_share_the_pool(fast_settings):
    flow = CoachFlow.from_config(fast_settings)

    first = flow.session(0)
    other_method = flow.session(1, fast_settings.with_method("ppo"))

    assert first.features is other_method.features
    assert first.eval_tasks == other_method.eval_tasks
    assert other_method.method == "ppo"
    assert first.seed == 0 and other_method.seed == 1


def test_from_yaml(tmp_path, fast_settings):
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(fast_settings.model_dump(mode="json")), encoding="utf-8")

    flow = CoachFlow.from_yaml(path)

    assert flow.settings == fast_settings
    assert flow.pool_hash == CoachFlow.from_config(fast_settings).pool_hash


def test_from_yaml_expands_dotted_keys(tmp_path, fast_settings):
    path = tmp_path / "config.yaml"
    document = fast_settings.model_dump(mode="json")
    document["trainer.k"] = 2
    path.write_text(yaml.safe_dump(document), encoding="utf-8")

    flow = CoachFlow.from_yaml(path)

    assert flow.settings.trainer.k == 2
    assert flow.settings.pool == fast_settings.pool


def test_from_yaml_names_unknown_key(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("trainer:\n  batch_sise: 8\n", encoding="utf-8")

    with pytest.raises(InvalidConfigError) as error:
        CoachFlow.from_yaml(path)

    assert error.value.key == "trainer.batch_sise"


def test_run_store_follows_output_dir(fast_settings):
    store = CoachFlow.from_config(fast_settings).run_store()

    with store:
        assert store.lock_path.exists()
    assert not store.lock_path.exists()
    assert str(store.root) == fast_settings.run.output_dir


def test_example_configuration_is_valid():
    flow = CoachFlow.from_yaml(Path(__file__).parent.parent / "config-example.yaml")

    assert flow.settings.run.seeds == [0, 1, 2, 3, 4]
    assert flow.settings.trainer.method == "android_coach"
