import numpy as np
import pytest
from pydantic import ValidationError

from coach_flow.charts import (
    COMPARISON_CHARTS,
    SR_VS_TIME,
    ChartEnvironment,
    ChartSpec,
    aggregate_series,
    step_values,
)
from coach_flow.model.metrics import TrainerMetricsRow


def _row(iteration: int, total_time: float, success_rate: float) -> TrainerMetricsRow:
    return TrainerMetricsRow(
        iteration=iteration,
        total_time=total_time,
        env_time=total_time,
        inference_time=0.0,
        update_time=0.0,
        interaction_count=10 * (iteration + 1),
        sampled_action_count=40 * (iteration + 1),
        mean_outcome_reward=success_rate,
        outcome_reward_avg4=success_rate,
        eval_success_rate=success_rate,
    )


FIRST = [_row(0, 100.0, 0.25), _row(1, 200.0, 0.5)]
SECOND = [_row(0, 150.0, 0.75)]


def test_step_values():
    values = step_values(FIRST, "total_time", "eval_success_rate", np.array([50.0, 100.0, 150.0, 250.0]))

    assert np.isnan(values[0])
    np.testing.assert_array_equal(values[1:], [0.25, 0.25, 0.5])


def test_aggregate_series():
    series = aggregate_series([FIRST, SECOND], SR_VS_TIME, np.array([50.0, 100.0, 150.0, 200.0]))

    assert series["x"] == [100.0, 150.0, 200.0]
    assert series["median"] == [0.25, 0.5, 0.625]
    assert series["low"] == [0.25, 0.25, 0.5]
    assert series["high"] == [0.25, 0.75, 0.75]


def test_unknown_metric():
    with pytest.raises(ValidationError):
        ChartSpec(title="nothing", y_metric="not_a_column")


def test_render_chart():
    charts = ChartEnvironment()

    svg = charts.render_chart(SR_VS_TIME, {"android_coach": [FIRST, SECOND], "ppo": [[]]})

    assert svg.startswith("<svg")
    assert svg.count('class="series"') == 1
    assert "android_coach" in svg
    assert "<title>Success rate</title>" in svg


def test_write_comparison_charts(tmp_path):
    charts = ChartEnvironment()

    for filename, spec in COMPARISON_CHARTS.items():
        charts.write_chart(tmp_path / filename, spec, {"a": [FIRST], "b": [SECOND]})

    assert sorted(path.name for path in tmp_path.iterdir()) == sorted(COMPARISON_CHARTS)
