import hashlib
import json
import subprocess
from importlib import metadata
from pathlib import Path
from typing import Any

import numpy as np
from loguru import logger

# phase tags mixed into derived seeds; changing a value changes every run
SEED_TASKS = 1
SEED_ROLLOUT = 2
SEED_PRM_SCORE = 3
SEED_RESAMPLE = 4
SEED_CRITIC_INIT = 5
SEED_PRM_DATASET = 6
SEED_PRM_TRAIN = 7


def derive_seed(*parts: int) -> int:
    """
    Derive a 64-bit seed from a sequence of non-negative integers. The same parts always give
    the same seed, independent of the order in which seeds are requested.
    :param parts: the integers (base seed, iteration, phase tag, ...) to mix
    :return: a 64-bit unsigned integer seed
    """
    sequence = np.random.SeedSequence([int(part) for part in parts])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode("utf-8")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def config_hash(config: dict[str, Any]) -> str:
    return sha256_hex(canonical_json(config))


def version_string() -> str:
    """
    Creates a git-describe style version string. Falls back to the installed package version
    when not running from a git checkout.
    """
    source_root = Path(__file__).resolve().parent.parent
    try:
        described = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=source_root,
            capture_output=True,
            text=True,
            check=True,
            timeout=5,
        )
        return described.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        logger.debug("no git checkout at {source_root}", source_root=source_root)

    try:
        return metadata.version("coach_flow")
    except metadata.PackageNotFoundError:
        return "0.0.0.dev0"
