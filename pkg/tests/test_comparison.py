import pytest

from coach_flow import CoachFlow
from coach_flow.exceptions import InvalidConfigError
from coach_flow.model.config import RunConfig
from coach_flow.model.metrics import TrainerMetricsRow
from coach_flow.trainer.comparison import compare_methods, efficiency_ratio, time_to_target


def _row(iteration: int, total_time: float, success_rate: float) -> TrainerMetricsRow:
    return TrainerMetricsRow(
        iteration=iteration,
        total_time=total_time,
        env_time=total_time,
        inference_time=0.0,
        update_time=0.0,
        interaction_count=iteration,
        sampled_action_count=iteration,
        mean_outcome_reward=0.0,
        outcome_reward_avg4=0.0,
        eval_success_rate=success_rate,
    )


def test_time_to_target():
    rows = [_row(0, 100.0, 0.2), _row(1, 200.0, 0.8), _row(2, 300.0, 1.0)]

    assert time_to_target(rows, 0.8) == 200.0
    assert time_to_target(rows[:1], 0.8) is None
    assert time_to_target([], 0.8) is None


def test_efficiency_ratio_median():
    ratio = efficiency_ratio([300.0, 200.0, 600.0], [100.0, 100.0, 200.0], 1000.0)

    assert ratio.per_seed == [3.0, 2.0, 3.0]
    assert ratio.median == 3.0
    assert ratio.reason is None


def test_censored_baseline():
    ratio = efficiency_ratio([300.0, None, None], [100.0, 100.0, 500.0], 1000.0)

    assert ratio.per_seed == [3.0, None, None]
    assert ratio.median is None
    assert ratio.reason == "budget_exhausted"
    assert ratio.censored == ["baseline"]
    # the censored seeds count at the full budget: median of [3, 10, 2]
    assert ratio.lower_bound == 3.0
    assert ratio.upper_bound is None


def test_reference_never_reached():
    ratio = efficiency_ratio([300.0], [None], 1000.0)

    assert ratio.per_seed == [None]
    assert ratio.median is None
    assert ratio.reason == "budget_exhausted"
    assert ratio.censored == ["reference"]
    assert ratio.lower_bound is None
    assert ratio.upper_bound == pytest.approx(0.3)


def test_both_sides_censored():
    ratio = efficiency_ratio([None, 200.0], [None, 100.0], 1000.0)

    assert ratio.per_seed == [None, 2.0]
    assert ratio.reason == "budget_exhausted"
    assert ratio.censored == ["baseline", "reference"]
    assert ratio.lower_bound is None
    assert ratio.upper_bound is None


def test_censoring_is_in_the_summary(fast_settings):
    flow = CoachFlow.from_config(fast_settings)
    configs = [(method, fast_settings.with_method(method)) for method in ("android_coach", "ppo")]

    summary = compare_methods(configs, 0.0, [0], lambda config, seed: flow.session(seed, config)).summary()

    assert summary["ratios"]["ppo"]["reason"] == "budget_exhausted"
    assert summary["ratios"]["ppo"]["censored"] == ["baseline", "reference"]


def test_self_comparison(fast_settings):
    flow = CoachFlow.from_config(fast_settings)
    configs = [("first", fast_settings), ("second", fast_settings)]

    report = compare_methods(configs, 1200.0, [0, 1], lambda config, seed: flow.session(seed, config))

    assert report.reference == "first"
    assert report.time_to_target["first"] == report.time_to_target["second"]
    assert report.curves["first"] == report.curves["second"]
    if all(time is not None for time in report.time_to_target["first"]):
        assert report.ratios["second"].median == 1.0
    assert "curves" not in report.summary()


def test_zero_budget(fast_settings):
    flow = CoachFlow.from_config(fast_settings)
    configs = [(method, fast_settings.with_method(method)) for method in ("android_coach", "ppo")]

    report = compare_methods(configs, 0.0, [0], lambda config, seed: flow.session(seed, config))

    assert report.curves == {"android_coach": [[]], "ppo": [[]]}
    assert report.time_to_target == {"android_coach": [None], "ppo": [None]}
    assert report.ratios["ppo"].median is None


def test_configurations_must_share_the_pool(fast_settings):
    other = RunConfig.model_validate({**fast_settings.model_dump(mode="json"), "pool": {"seed": 8, "count": 8}})

    with pytest.raises(InvalidConfigError):
        compare_methods([("a", fast_settings), ("b", other)], 100.0, [0], lambda config, seed: None)


def test_labels_must_be_unique(fast_settings):
    with pytest.raises(InvalidConfigError):
        compare_methods([("a", fast_settings), ("a", fast_settings)], 100.0, [0], lambda config, seed: None)


@pytest.mark.slow
def test_multiple_actions_train_faster(tmp_path):
    settings = RunConfig.model_validate(
        {"run": {"output_dir": str(tmp_path), "seeds": [0, 1, 2, 3, 4]}, "logging": {"level": "WARNING"}}
    )
    flow = CoachFlow.from_config(settings)
    configs = [(method, settings.with_method(method)) for method in ("android_coach", "ppo", "grpo")]

    report = compare_methods(
        configs, settings.run.time_budget, settings.run.seeds, lambda config, seed: flow.session(seed, config)
    )

    for baseline in ("ppo", "grpo"):
        ratio = report.ratios[baseline]
        assert (ratio.median or ratio.lower_bound or 0.0) >= 1.2
