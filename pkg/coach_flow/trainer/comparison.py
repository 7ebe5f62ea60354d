from typing import Callable, Optional

import numpy as np
from loguru import logger

from coach_flow.exceptions import InvalidConfigError
from coach_flow.model.config import RunConfig
from coach_flow.model.metrics import ComparisonReport, EfficiencyRatio, TrainerMetricsRow
from coach_flow.trainer.session import TrainingSession

SessionFactory = Callable[[RunConfig, int], TrainingSession]


def time_to_target(rows: list[TrainerMetricsRow], target_sr: float) -> Optional[float]:
    """Simulated time of the first iteration whose evaluation reached the target, if any."""
    for row in rows:
        if row.eval_success_rate >= target_sr:
            return row.total_time
    return None


def efficiency_ratio(
    baseline_times: list[Optional[float]],
    reference_times: list[Optional[float]],
    time_budget: float,
) -> EfficiencyRatio:
    """
    Per-seed ratio of the baseline's time to target over the reference method's. A side that
    never reached the target is censored at the full budget: its seeds get a null ratio, and
    the median is replaced by a bound. A censored baseline gives a lower bound, a censored
    reference an upper bound; seeds where both sides missed leave neither.
    """
    per_seed: list[Optional[float]] = []
    lower: list[Optional[float]] = []
    upper: list[Optional[float]] = []
    censored: set[str] = set()
    for baseline, reference in zip(baseline_times, reference_times):
        if baseline is not None and reference is not None:
            ratio = baseline / reference
            per_seed.append(ratio)
            lower.append(ratio)
            upper.append(ratio)
            continue
        per_seed.append(None)
        if baseline is None:
            censored.add("baseline")
        if reference is None:
            censored.add("reference")
        lower.append(time_budget / reference if reference is not None else None)
        upper.append(baseline / time_budget if baseline is not None and time_budget > 0 else None)

    if per_seed and not censored:
        return EfficiencyRatio(per_seed=per_seed, median=float(np.median(per_seed)))
    if censored:
        logger.warning(
            "time to target censored at budget {time_budget} for {sides}",
            time_budget=time_budget,
            sides=sorted(censored),
        )

    def _median_bound(bounds: list[Optional[float]]) -> Optional[float]:
        if bounds and all(bound is not None for bound in bounds):
            return float(np.median(bounds))
        return None

    return EfficiencyRatio(
        per_seed=per_seed,
        reason="budget_exhausted" if censored else None,
        censored=sorted(censored),
        lower_bound=_median_bound(lower),
        upper_bound=_median_bound(upper),
    )


def _check_shared_environment(configs: list[tuple[str, RunConfig]]):
    first_label, first = configs[0]
    for label, config in configs[1:]:
        for section in ("pool", "latency"):
            if getattr(config, section) != getattr(first, section):
                logger.error(
                    "configuration {label} uses another {section} than {first_label}",
                    label=label,
                    section=section,
                    first_label=first_label,
                )
                raise InvalidConfigError(
                    f"compared configurations must share the {section} section",
                    key=section,
                )


def compare_methods(
    configs: list[tuple[str, RunConfig]],
    time_budget: float,
    seeds: list[int],
    session_factory: SessionFactory,
) -> ComparisonReport:
    """
    Train every labelled configuration under every seed until the simulated-time budget is
    spent (or its iteration cap is hit) and compare the time each needs to reach the target
    success rate against the first `android_coach` configuration.

    :param configs: (label, configuration) pairs sharing task pool and latency model
    :param time_budget: simulated seconds per run
    :param seeds: training seeds, shared by all configurations
    :param session_factory: creates a training session for a configuration and seed
    :return: the comparison report with all learning curves
    """
    if len(configs) < 1:
        raise ValueError("nothing to compare")
    if time_budget < 0:
        raise InvalidConfigError("the time budget must not be negative", key="run.time_budget")
    _check_shared_environment(configs)

    labels = [label for label, _ in configs]
    if len(set(labels)) != len(labels):
        raise InvalidConfigError("comparison labels must be unique", key="compare.methods")
    reference = next((label for label, config in configs if config.trainer.method == "android_coach"), labels[0])
    target_sr = configs[0][1].eval.target_sr

    curves: dict[str, list[list[TrainerMetricsRow]]] = {}
    times: dict[str, list[Optional[float]]] = {}
    for label, config in configs:
        document = config.model_dump(mode="json")
        document["run"]["time_budget"] = time_budget
        budgeted = RunConfig.model_validate(document)

        curves[label], times[label] = [], []
        for seed in seeds:
            session = session_factory(budgeted, seed)
            rows = list(session.train())
            curves[label].append(rows)
            times[label].append(time_to_target(rows, target_sr))
            logger.info(
                "{label} seed {seed}: {iterations} iterations, target reached at {time}",
                label=label,
                seed=seed,
                iterations=len(rows),
                time=times[label][-1],
            )

    ratios = {}
    for label in labels:
        if label == reference:
            continue
        ratios[label] = efficiency_ratio(times[label], times[reference], time_budget)
        if ratios[label].reason == "budget_exhausted":
            logger.warning(
                "{label} did not reach success rate {target_sr} within {time_budget} simulated seconds",
                label=label,
                target_sr=target_sr,
                time_budget=time_budget,
            )

    return ComparisonReport(
        target_sr=target_sr,
        time_budget=time_budget,
        seeds=seeds,
        reference=reference,
        time_to_target=times,
        ratios=ratios,
        curves=curves,
    )
