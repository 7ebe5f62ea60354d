import argparse
import csv
import json
from pathlib import Path

from loguru import logger

from coach_flow import CoachFlow
from coach_flow.advantage.lab import run_estimator_lab
from coach_flow.charts import COMPARISON_CHARTS
from coach_flow.cli.config import configure_logging, load_settings
from coach_flow.cli.store import RunManifest, RunStore
from coach_flow.env.tasks import save_task_pool
from coach_flow.exceptions import EstimatorCheckError, InvalidConfigError
from coach_flow.model.config import RunConfig
from coach_flow.model.metrics import METRICS_SCHEMA_VERSION
from coach_flow.policy.params import PolicyParams
from coach_flow.rewards.prm import fit_process_reward_model
from coach_flow.trainer.comparison import compare_methods
from coach_flow.trainer.evaluation import evaluate
from coach_flow.trainer.session import TrainingSession
from coach_flow.utils import SEED_PRM_DATASET, SEED_PRM_TRAIN, config_hash, derive_seed, version_string

LAB_COLUMNS = ["estimator", "oracle_id", "k", "samples", "bias_norm", "mean_variance", "result"]


def _settings(args: argparse.Namespace) -> RunConfig:
    overrides = {}
    if args.seed is not None:
        overrides["run.seeds"] = [args.seed]
    if args.out is not None:
        overrides["run.output_dir"] = args.out
    settings = load_settings(args.config, overrides)
    configure_logging(settings.logging.level, args.quiet)
    return settings


def _manifest(command: str, settings: RunConfig, flow: CoachFlow) -> RunManifest:
    document = settings.model_dump(mode="json")
    return RunManifest(
        run_id=RunManifest.new_run_id(),
        command=command,
        config=document,
        config_hash=config_hash(document),
        seeds=settings.run.seeds,
        version=version_string(),
        pool_hash=flow.pool_hash,
        metrics_schema_version=METRICS_SCHEMA_VERSION,
    )


def save_checkpoints(store: RunStore, session: TrainingSession, directory: Path):
    store.save_params(directory, "policy", session.policy, session.actor_opt)
    if session.critic is not None:
        store.save_params(directory, "critic", session.critic, session.critic_opt)
    if session.value is not None:
        store.save_params(directory, "value", session.value, session.critic_opt)
    if session.prm is not None:
        store.save_params(directory, "prm", session.prm)
    store.save_trainer_state(directory, session.trainer_state())


def cmd_train(args: argparse.Namespace) -> int:
    settings = _settings(args)
    flow = CoachFlow.from_config(settings)
    with flow.run_store() as store:
        store.write_manifest(_manifest("train", settings, flow))
        save_task_pool(store.root / "task_pool.json", flow.task_pool)
        for seed in settings.run.seeds:
            session = flow.session(seed)
            seed_directory = store.seed_directory(seed)
            if settings.run.save_trajectories:
                store.reset_trajectories(seed_directory)

            def on_iteration(row, batch):
                if settings.run.save_trajectories:
                    store.append_trajectories(seed_directory, batch.trajectories)
                if settings.run.save_buffers:
                    store.save_buffer(store.seed_directory(seed, "buffers"), batch, settings.run.compress_buffers)

            rows = session.train(on_iteration)
            store.write_metrics(seed_directory / "metrics.csv", rows)
            save_checkpoints(store, session, store.seed_directory(seed, "checkpoints"))
            logger.info(
                "seed {seed} finished after {iterations} iterations, final eval SR {success_rate}",
                seed=seed,
                iterations=len(rows),
                success_rate=rows[-1].eval_success_rate if rows else None,
            )
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    settings = _settings(args)
    methods = settings.compare.methods
    if len(methods) < 2:
        raise InvalidConfigError("compare needs at least two methods", key="compare.methods")
    if settings.run.time_budget is None:
        raise InvalidConfigError("compare needs a simulated-time budget", key="run.time_budget")

    flow = CoachFlow.from_config(settings)
    configs = [(method, settings.with_method(method)) for method in methods]
    with flow.run_store() as store:
        store.write_manifest(_manifest("compare", settings, flow))
        report = compare_methods(
            configs,
            settings.run.time_budget,
            settings.run.seeds,
            lambda config, seed: flow.session(seed, config),
        )
        for label, runs in report.curves.items():
            label_directory = store.directory("compare", label)
            for seed, rows in zip(report.seeds, runs):
                store.write_metrics(label_directory / f"seed_{seed}.csv", rows)

        compare_directory = store.directory("compare")
        store.write_json(compare_directory / "efficiency.json", report.summary())
        charts = flow.chart_environment
        for filename, spec in COMPARISON_CHARTS.items():
            charts.write_chart(compare_directory / filename, spec, report.curves)

    print(json.dumps(report.summary(), indent=2, sort_keys=True))
    return 0


def cmd_estimator_lab(args: argparse.Namespace) -> int:
    settings = _settings(args)
    flow = CoachFlow.from_config(settings)
    outcome = run_estimator_lab(settings.lab)
    with flow.run_store() as store:
        with open(store.root / "estimator_lab.csv", "w", encoding="utf-8", newline="") as output:
            writer = csv.DictWriter(output, fieldnames=LAB_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for row in outcome.rows:
                record = row.model_dump(mode="json")
                record["bias_norm"] = repr(row.bias_norm)
                record["mean_variance"] = repr(row.mean_variance)
                writer.writerow(record)
        summary = outcome.model_dump(mode="json", exclude={"rows"})
        summary["passed"] = outcome.passed
        store.write_json(store.root / "lab_summary.json", summary)

    print(json.dumps(summary, indent=2, sort_keys=True))
    if not outcome.passed:
        raise EstimatorCheckError("estimator checks failed, see lab_summary.json")
    return 0


def cmd_prm(args: argparse.Namespace) -> int:
    settings = _settings(args)
    flow = CoachFlow.from_config(settings)
    train_tasks, _ = flow.task_split
    seed = settings.run.seeds[0]
    policy = PolicyParams.zeros(train_tasks[0].actions, flow.feature_map.dimension)

    with flow.run_store() as store:
        dataset, fit = fit_process_reward_model(
            train_tasks,
            policy,
            flow.feature_map,
            settings.prm,
            threshold=settings.rewards.prm_threshold,
            dataset_seed=derive_seed(seed, SEED_PRM_DATASET),
            train_seed=derive_seed(seed, SEED_PRM_TRAIN),
            temperature=settings.trainer.temperature,
        )
        prm_directory = store.directory("prm")
        fit.params.save(prm_directory / "prm.bin")
        with open(prm_directory / "dataset.jsonl", "w", encoding="utf-8") as output:
            for record in dataset:
                output.write(record.model_dump_json() + "\n")
        store.write_json(prm_directory / "report.json", fit.report.model_dump(mode="json"))

    print(json.dumps(fit.report.model_dump(mode="json"), indent=2, sort_keys=True))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    settings = _settings(args)
    flow = CoachFlow.from_config(settings)
    _, eval_tasks = flow.task_split
    results = []
    for seed in settings.run.seeds:
        path = Path(settings.run.output_dir) / f"seed_{seed}" / "checkpoints" / "policy.bin"
        policy = PolicyParams.load(path)
        results.append(
            {
                "seed": seed,
                "success_rate": evaluate(policy, eval_tasks, settings.eval.episodes_per_task, flow.feature_map),
                "eval_tasks": len(eval_tasks),
            }
        )
    print(json.dumps(results, indent=2, sort_keys=True))
    return 0


COMMANDS = {
    "train": cmd_train,
    "compare": cmd_compare,
    "estimator-lab": cmd_estimator_lab,
    "prm": cmd_prm,
    "eval": cmd_eval,
}
