# nested_covar/services/config_loader.py
"""
Key-value plan files.

A plan is a dotenv-syntax file of upper-case keys whose `__` separators
spell the nesting of PlanConfig:

    PROBLEM=portfolio
    MARKET__Q=10
    PORTFOLIO_X__WEIGHTS=[2, 1, -1]
    EXPERIMENT__ROWS=[{"method": "sns", "gamma": 100000}]

Values are parsed as JSON when they are valid JSON and kept as strings
otherwise. `--override KEY=VALUE` pairs use the same syntax and win over
the file.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

from dotenv import dotenv_values
from pydantic import ValidationError

from ..errors import ConfigError
from ..schemas.plan import PlanConfig

logger = logging.getLogger(__name__)

SEPARATOR = "__"


def parse_value(raw: Optional[str]) -> Any:
    if raw is None:
        return None
    try:
        return json.loads(raw)
    except ValueError:
        return raw


def parse_override(pair: str) -> tuple:
    """'KEY=VALUE' -> (KEY, VALUE)"""
    key, sep, value = pair.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override {pair!r} is not of the form KEY=VALUE", key=pair)
    return key.strip(), value.strip()


def nest(flat: Dict[str, Any]) -> Dict[str, Any]:
    """{'MARKET__Q': 10} -> {'market': {'q': 10}}"""
    tree: Dict[str, Any] = {}
    for key, value in flat.items():
        parts = key.lower().split(SEPARATOR)
        node = tree
        for depth, part in enumerate(parts[:-1]):
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(
                    f"key {key} nests under {SEPARATOR.join(parts[:depth + 1]).upper()}, which already holds a value",
                    key=key,
                )
            node = child
        if isinstance(node.get(parts[-1]), dict) and not isinstance(value, dict):
            raise ConfigError(f"key {key} would replace a whole section", key=key)
        node[parts[-1]] = value
    return tree


def _offending_key(loc: tuple) -> str:
    return SEPARATOR.join(str(part) for part in loc if not isinstance(part, int)).upper()


def validate_plan(tree: Dict[str, Any]) -> PlanConfig:
    """
    Raises:
        ConfigError: unknown key or invalid value; the message names the key
    """
    try:
        return PlanConfig.model_validate(tree)
    except ValidationError as e:
        error = e.errors()[0]
        key = _offending_key(error["loc"]) or "PLAN"
        if error["type"] == "extra_forbidden":
            message = f"unknown configuration key {key}"
        else:
            message = f"invalid value for {key}: {error['msg']}"
        logger.error(message)
        raise ConfigError(message, key=key) from e


def load_plan(
    path: Optional[Union[str, Path]] = None,
    overrides: Iterable[str] = (),
) -> PlanConfig:
    """
    Read, nest and validate a plan file; no path means defaults plus overrides.

    Raises:
        ConfigError: missing file, malformed override, unknown key or invalid value
    """
    flat: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"configuration file not found: {path}", key=str(path))
        flat.update({key: parse_value(value) for key, value in dotenv_values(path).items()})
        logger.info(f"Loaded {len(flat)} keys from {path}")

    for pair in overrides:
        key, value = parse_override(pair)
        flat[key] = parse_value(value)
        logger.debug(f"Override {key}={value}")

    return validate_plan(nest(flat))
