import csv
import json
import os
from os import PathLike
from pathlib import Path
from typing import Any, Iterable, Optional

import ulid
from loguru import logger
from pydantic import BaseModel, Field

from coach_flow.env.pool import write_trajectories
from coach_flow.exceptions import RunStoreError
from coach_flow.model.episode import Trajectory
from coach_flow.model.metrics import IterationBatch, TrainerMetricsRow, TrainerState
from coach_flow.policy.optimizer import OptimizerState
from coach_flow.policy.params import LinearParams

LOCK_FILENAME = ".lock"
MANIFEST_FILENAME = "manifest.json"


class RunManifest(BaseModel):
    run_id: str = Field(description="ULID of this invocation")
    command: str
    config: dict[str, Any] = Field(description="copy of the validated configuration")
    config_hash: str
    seeds: list[int]
    version: str = Field(description="git-describe style version of the code")
    pool_hash: str
    metrics_schema_version: int

    @classmethod
    def new_run_id(cls) -> str:
        return str(ulid.new())


class RunStore:
    """
    Owns one output directory for the duration of a command. A lock file created with
    exclusive-create semantics keeps two runs from writing into the same directory.
    """

    def __init__(self, output_dir: str | PathLike):
        self.root = Path(output_dir)
        self._locked = False

    @property
    def lock_path(self) -> Path:
        return self.root / LOCK_FILENAME

    def acquire(self):
        self.root.mkdir(parents=True, exist_ok=True)
        try:
            descriptor = os.open(self.lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            logger.error("run directory {root} is locked by another run", root=str(self.root))
            raise RunStoreError(f"run directory {self.root} is in use (remove {self.lock_path} if stale)")
        with os.fdopen(descriptor, "w") as lock_file:
            lock_file.write(str(os.getpid()))
        self._locked = True
        logger.debug("locked run directory {root}", root=str(self.root))

    def release(self):
        if self._locked:
            self.lock_path.unlink(missing_ok=True)
            self._locked = False
            logger.debug("released run directory {root}", root=str(self.root))

    def __enter__(self) -> "RunStore":
        self.acquire()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.release()

    def directory(self, *parts: str) -> Path:
        path = self.root.joinpath(*parts)
        path.mkdir(parents=True, exist_ok=True)
        return path

    def seed_directory(self, seed: int, *parts: str) -> Path:
        return self.directory(f"seed_{seed}", *parts)

    def write_json(self, path: Path, document: Any):
        path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def write_manifest(self, manifest: RunManifest):
        (self.root / MANIFEST_FILENAME).write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")

    def read_manifest(self) -> Optional[RunManifest]:
        path = self.root / MANIFEST_FILENAME
        if not path.exists():
            return None
        return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))

    @staticmethod
    def write_metrics(path: Path, rows: Iterable[TrainerMetricsRow]):
        """Metrics CSV in the fixed column order, floats written with repr precision."""
        with open(path, "w", encoding="utf-8", newline="") as output:
            writer = csv.DictWriter(output, fieldnames=TrainerMetricsRow.columns(), lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow(row.csv_row())

    @staticmethod
    def read_metrics(path: Path) -> list[TrainerMetricsRow]:
        with open(path, encoding="utf-8", newline="") as source:
            return [
                TrainerMetricsRow.model_validate({key: value or None for key, value in row.items()})
                for row in csv.DictReader(source)
            ]

    def save_params(
        self,
        directory: Path,
        name: str,
        params: LinearParams,
        opt: Optional[OptimizerState] = None,
    ):
        """
        Write `name.bin` and a `name.json` sidecar with the version counter and optimizer state.
        AdamW moment estimates go to `name.m1.bin` and `name.m2.bin`.
        """
        params.save(directory / f"{name}.bin")
        sidecar = {"version": params.version, "shape": list(params.shape)}
        if opt is not None:
            sidecar["optimizer"] = opt.model_dump(mode="json")
            first, second = opt.moments
            if first is not None:
                LinearParams(first).save(directory / f"{name}.m1.bin")
                LinearParams(second).save(directory / f"{name}.m2.bin")
        self.write_json(directory / f"{name}.json", sidecar)

    def save_trainer_state(self, directory: Path, state: TrainerState):
        (directory / "trainer_state.json").write_text(state.model_dump_json(indent=2) + "\n", encoding="utf-8")

    @staticmethod
    def save_buffer(directory: Path, batch: IterationBatch, compress: bool = True):
        (directory / f"iteration_{batch.iteration:05d}.bin").write_bytes(batch.serialize(compress))

    @staticmethod
    def load_buffer(path: Path) -> IterationBatch:
        return IterationBatch.deserialize(path.read_bytes())

    @staticmethod
    def reset_trajectories(directory: Path):
        """Start the archive of a seed afresh, so a rerun into the same directory does not extend it."""
        write_trajectories(directory / "trajectories.jsonl", [], append=False)

    @staticmethod
    def append_trajectories(directory: Path, trajectories: Iterable[Trajectory]):
        write_trajectories(directory / "trajectories.jsonl", trajectories, append=True)
