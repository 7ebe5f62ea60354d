from os import PathLike
from pathlib import Path
from typing import Any, Optional

import jinja2
import numpy as np
from jinja2 import Environment, FileSystemLoader
from loguru import logger
from pydantic import BaseModel, Field, model_validator

from coach_flow.model.metrics import TrainerMetricsRow

_TEMPLATE_ROOT = Path(__file__).parent / "templates"
_PALETTE = ["#1b6ca8", "#d1495b", "#2e933c", "#edae49", "#6b4c9a", "#00798c"]


class ChartSpec(BaseModel):
    """A line chart of one metric against another, one median line and min/max band per method."""

    title: str
    x_metric: str = Field(default="total_time")
    y_metric: str
    x_label: Optional[str] = None
    y_label: Optional[str] = None
    grid_points: int = Field(default=200, ge=2)
    width: int = 720
    height: int = 420

    @model_validator(mode="after")
    def _check_metrics(self) -> "ChartSpec":
        columns = TrainerMetricsRow.columns()
        for metric in (self.x_metric, self.y_metric):
            if metric not in columns:
                raise ValueError(f"metric {metric} is not a metrics column")
        return self


SR_VS_TIME = ChartSpec(title="Success rate", y_metric="eval_success_rate", y_label="eval success rate")
INTERACTIONS_VS_TIME = ChartSpec(title="Interactions", y_metric="interaction_count", y_label="interactions")
SAMPLES_VS_TIME = ChartSpec(title="Sampled actions", y_metric="sampled_action_count", y_label="sampled actions")

COMPARISON_CHARTS = {
    "sr_vs_time.svg": SR_VS_TIME,
    "interactions_vs_time.svg": INTERACTIONS_VS_TIME,
    "samples_vs_time.svg": SAMPLES_VS_TIME,
}


def step_values(rows: list[TrainerMetricsRow], x_metric: str, y_metric: str, grid: np.ndarray) -> np.ndarray:
    """Value of the last row at or before each grid point; NaN before the first row."""
    xs = np.array([getattr(row, x_metric) for row in rows], dtype=np.float64)
    ys = np.array([getattr(row, y_metric) for row in rows], dtype=np.float64)
    positions = np.searchsorted(xs, grid, side="right") - 1
    values = np.full(grid.shape, np.nan)
    defined = positions >= 0
    values[defined] = ys[positions[defined]]
    return values


def aggregate_series(
    curves: list[list[TrainerMetricsRow]],
    spec: ChartSpec,
    grid: np.ndarray,
) -> dict[str, list[float]]:
    """Median, minimum and maximum over seeds at every grid point where any seed has a value."""
    stacked = np.vstack([step_values(rows, spec.x_metric, spec.y_metric, grid) for rows in curves if rows])
    defined = ~np.all(np.isnan(stacked), axis=0)
    return {
        "x": grid[defined].tolist(),
        "median": np.nanmedian(stacked[:, defined], axis=0).tolist(),
        "low": np.nanmin(stacked[:, defined], axis=0).tolist(),
        "high": np.nanmax(stacked[:, defined], axis=0).tolist(),
    }


class ChartEnvironment:
    """
    Renders result charts as static SVG documents from the jinja2 templates shipped with the
    package.
    """

    def __init__(self, template_root_path: str | PathLike = _TEMPLATE_ROOT):
        self.template_root_path = Path(template_root_path).resolve()
        self._jinja_env: Optional[Environment] = None

    @property
    def jinja_env(self) -> jinja2.Environment:
        if self._jinja_env is None:
            self._jinja_env = Environment(
                loader=FileSystemLoader(self.template_root_path),
                autoescape=True,
                trim_blocks=True,
                lstrip_blocks=True,
            )
        return self._jinja_env

    def render_template(self, template_path: str, data_context: dict[str, Any]) -> str:
        template = self.jinja_env.get_template(template_path)
        rendered = template.render(data_context)
        logger.debug(
            "rendered template {template_path} into {size} characters",
            template_path=template_path,
            size=len(rendered),
        )
        return rendered

    def chart_context(self, spec: ChartSpec, curves: dict[str, list[list[TrainerMetricsRow]]]) -> dict[str, Any]:
        margin_left, margin_right, margin_top, margin_bottom = 70, 150, 40, 50
        plot_width = spec.width - margin_left - margin_right
        plot_height = spec.height - margin_top - margin_bottom

        all_rows = [row for runs in curves.values() for rows in runs for row in rows]
        x_max = max((getattr(row, spec.x_metric) for row in all_rows), default=0.0) or 1.0
        y_max = max((getattr(row, spec.y_metric) for row in all_rows), default=0.0) or 1.0
        grid = np.linspace(0.0, x_max, spec.grid_points)

        def to_x(value: float) -> float:
            return round(margin_left + plot_width * value / x_max, 2)

        def to_y(value: float) -> float:
            return round(margin_top + plot_height * (1.0 - value / y_max), 2)

        series = []
        for index, (label, runs) in enumerate(curves.items()):
            if not any(runs):
                continue
            aggregated = aggregate_series(runs, spec, grid)
            xs = [to_x(x) for x in aggregated["x"]]
            series.append(
                {
                    "label": label,
                    "colour": _PALETTE[index % len(_PALETTE)],
                    "line": " ".join(f"{x},{to_y(y)}" for x, y in zip(xs, aggregated["median"])),
                    "band": " ".join(
                        [f"{x},{to_y(y)}" for x, y in zip(xs, aggregated["high"])]
                        + [f"{x},{to_y(y)}" for x, y in zip(reversed(xs), reversed(aggregated["low"]))]
                    ),
                    "legend_y": margin_top + 20 * index,
                }
            )

        return {
            "spec": spec,
            "x_label": spec.x_label or spec.x_metric,
            "y_label": spec.y_label or spec.y_metric,
            "left": margin_left,
            "top": margin_top,
            "right": margin_left + plot_width,
            "bottom": margin_top + plot_height,
            "x_ticks": [{"position": to_x(v), "label": f"{v:g}"} for v in np.linspace(0, x_max, 5)],
            "y_ticks": [{"position": to_y(v), "label": f"{v:g}"} for v in np.linspace(0, y_max, 5)],
            "series": series,
        }

    def render_chart(self, spec: ChartSpec, curves: dict[str, list[list[TrainerMetricsRow]]]) -> str:
        return self.render_template("line_chart.svg.jinja2", self.chart_context(spec, curves))

    def write_chart(
        self,
        path: str | PathLike,
        spec: ChartSpec,
        curves: dict[str, list[list[TrainerMetricsRow]]],
    ):
        Path(path).write_text(self.render_chart(spec, curves), encoding="utf-8")
