import sys
from os import PathLike
from pathlib import Path
from typing import Any, Optional

import yaml
from loguru import logger
from pydantic import ValidationError

from coach_flow.exceptions import InvalidConfigError
from coach_flow.model.config import RunConfig


def expand_dotted_keys(document: dict[str, Any]) -> dict[str, Any]:
    """
    Turn top-level dotted keys such as `trainer.k: 4` into nested sections, so flat and
    sectioned documents can be mixed.
    """
    expanded: dict[str, Any] = {}
    for key, value in document.items():
        if isinstance(value, dict):
            value = expand_dotted_keys(value)
        set_dotted(expanded, str(key), value)
    return expanded


def set_dotted(document: dict[str, Any], dotted_key: str, value: Any):
    *sections, leaf = dotted_key.split(".")
    node = document
    for section in sections:
        child = node.setdefault(section, {})
        if not isinstance(child, dict):
            raise InvalidConfigError(f"{dotted_key}: {section} is not a section", key=dotted_key)
        node = child
    if isinstance(value, dict) and isinstance(node.get(leaf), dict):
        node[leaf].update(value)
    else:
        node[leaf] = value


def read_document(config_path: Optional[str | PathLike]) -> dict[str, Any]:
    if config_path is None:
        return {}
    with open(Path(config_path), "r", encoding="utf-8") as config_file:
        try:
            document = yaml.safe_load(config_file)
        except yaml.YAMLError as error:
            logger.error("cannot parse configuration {path}: {error}", path=str(config_path), error=str(error))
            raise InvalidConfigError(f"cannot parse {config_path}: {error}") from error
    if document is None:
        return {}
    if not isinstance(document, dict):
        raise InvalidConfigError(f"configuration {config_path} is not a mapping")
    return expand_dotted_keys(document)


def validate_settings(document: dict[str, Any]) -> RunConfig:
    """
    Validate a configuration document. The first offending key is named by its dotted path in
    the raised error; every problem is logged.
    """
    try:
        return RunConfig.model_validate(document)
    except ValidationError as error:
        problems = error.errors()
        for problem in problems:
            logger.error(
                "invalid configuration key {key}: {message}",
                key=".".join(str(part) for part in problem["loc"]) or "<root>",
                message=problem["msg"],
            )
        first = problems[0]
        key = ".".join(str(part) for part in first["loc"]) or "<root>"
        raise InvalidConfigError(f"invalid configuration key {key}: {first['msg']}", key=key) from error


def load_settings(
    config_path: Optional[str | PathLike],
    overrides: Optional[dict[str, Any]] = None,
) -> RunConfig:
    document = read_document(config_path)
    for dotted_key, value in (overrides or {}).items():
        set_dotted(document, dotted_key, value)
    return validate_settings(document)


def configure_logging(level: str = "INFO", quiet: bool = False):
    logger.remove()
    logger.add(sys.stderr, level="WARNING" if quiet else level)
