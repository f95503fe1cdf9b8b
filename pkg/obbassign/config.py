"""
Run configuration for the command-line tools.
Handles defaults, config.yaml, a --config run file and command line flags with proper precedence.
"""

import argparse
import configparser
import json
import os
from typing import Any, Dict, Optional, Tuple

from jsonschema import validate, ValidationError

from .assignment import parse_level_triples
from .yaml_config import YAMLConfig


RUN_SECTION = 'run'


class RunConfigError(ValueError):
    """Unknown key, bad value or schema violation in a run config file."""


def load_run_schema() -> Dict[str, Any]:
    """Load the JSON schema describing run config keys."""
    schema_path = os.path.join(os.path.dirname(__file__), 'run_config_schema.json')
    with open(schema_path, 'r', encoding='utf-8') as f:
        return json.load(f)


def _coerce(key: str, raw: str, schema: Dict[str, Any]) -> Any:
    """Convert a raw string to the type the schema declares for key."""
    declared = schema.get('properties', {}).get(key, {}).get('type')
    try:
        if declared == 'boolean':
            lowered = raw.strip().lower()
            if lowered not in configparser.ConfigParser.BOOLEAN_STATES:
                raise ValueError(f"not a boolean: '{raw}'")
            return configparser.ConfigParser.BOOLEAN_STATES[lowered]
        if declared == 'integer':
            return int(raw)
        if declared == 'number':
            return float(raw)
    except ValueError as e:
        raise RunConfigError(f"{key}: {e}") from e
    return raw.strip()


class RunConfig:
    """Parameters read from a key = value run file."""

    def __init__(self, values: Optional[Dict[str, Any]] = None, source: Optional[str] = None):
        self.values = dict(values or {})
        self.source = source

    @classmethod
    def from_text(cls, text: str, source: Optional[str] = None) -> 'RunConfig':
        """
        Parse run file text.

        Lines are key = value with # comments. Values are typed from the
        schema and validated against it.

        Raises:
            RunConfigError: on unknown keys, duplicate keys or invalid values
        """
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=('#',))
        try:
            parser.read_string(f"[{RUN_SECTION}]\n{text}", source=source or '<run config>')
        except configparser.Error as e:
            raise RunConfigError(f"Invalid run config: {e}") from e

        schema = load_run_schema()
        values = {key: _coerce(key, raw, schema) for key, raw in parser.items(RUN_SECTION)}
        try:
            validate(instance=values, schema=schema)
        except ValidationError as e:
            where = '.'.join(str(p) for p in e.path)
            prefix = f"{where}: " if where else ''
            raise RunConfigError(f"{prefix}{e.message}") from e
        return cls(values, source)

    @classmethod
    def from_file(cls, path: str) -> 'RunConfig':
        if not os.path.isfile(path):
            raise RunConfigError(f"Run config file not found: {path}")
        with open(path, 'r', encoding='utf-8') as f:
            return cls.from_text(f.read(), source=path)

    def __contains__(self, key: str) -> bool:
        return key in self.values

    def get(self, key: str, default: Any = None) -> Any:
        return self.values.get(key, default)


class Settings:
    """Resolves each parameter: cmd_line > run config > config.yaml > built-in."""

    def __init__(
        self,
        args: Optional[argparse.Namespace] = None,
        run_config: Optional[RunConfig] = None,
        yaml_config: Optional[YAMLConfig] = None
    ):
        self.args = args
        self.run_config = run_config or RunConfig()
        self.yaml = yaml_config or YAMLConfig()

    def resolve(self, key: str, fallback: Any) -> Any:
        """
        Value of key with proper precedence.

        Args:
            key: Run config key, also the argparse dest of its flag
            fallback: Value from config.yaml (or the built-in default)
        """
        if self.args is not None:
            value = getattr(self.args, key, None)
            if value is not None:
                return value
        if key in self.run_config:
            return self.run_config.get(key)
        return fallback

    # Assignment
    def c_threshold(self) -> float:
        return float(self.resolve('c_threshold', self.yaml.get_c_threshold()))

    def shrink(self) -> bool:
        return bool(self.resolve('shrink', self.yaml.get_use_shrink()))

    def j_use_shrink(self) -> bool:
        return bool(self.resolve('j_use_shrink', self.yaml.get_j_use_shrink()))

    def mls_short_ratio(self) -> float:
        return float(self.resolve('mls_short_ratio', self.yaml.get_mls_short_ratio()))

    def levels(self):
        """Strides and ranges, from a --levels string or config.yaml."""
        text = self.resolve('levels', None)
        if text is None:
            return self.yaml.get_levels()
        return parse_level_triples(text)

    def image_size(self):
        width, height = self.yaml.get_image_size()
        return int(self.resolve('image_width', width)), int(self.resolve('image_height', height))

    def image_size_override(self) -> Optional[Tuple[int, int]]:
        """Image size set in the run config, or None when only config.yaml applies."""
        if 'image_width' not in self.run_config and 'image_height' not in self.run_config:
            return None
        return self.image_size()

    # Postprocess / evaluation share the iou_thresh key
    def nms_iou_threshold(self) -> float:
        return float(self.resolve('iou_thresh', self.yaml.get_nms_iou_threshold()))

    def eval_iou_threshold(self) -> float:
        return float(self.resolve('iou_thresh', self.yaml.get_eval_iou_threshold()))

    def score_threshold(self) -> float:
        return float(self.resolve('score_thresh', self.yaml.get_score_threshold()))

    # Tiling
    def patch(self) -> int:
        return int(self.resolve('patch', self.yaml.get_patch()))

    def gap(self) -> int:
        return int(self.resolve('gap', self.yaml.get_gap()))

    def min_fraction(self) -> float:
        return float(self.resolve('min_fraction', self.yaml.get_min_fraction()))

    def scales(self):
        value = self.resolve('scales', None)
        if value is None:
            return self.yaml.get_scales()
        return parse_scales(value)

    # Evaluation
    def metric(self) -> str:
        return str(self.resolve('metric', self.yaml.get_metric()))

    def skip_difficult(self) -> bool:
        return bool(self.resolve('skip_difficult', self.yaml.get_skip_difficult()))

    def skip_absent(self) -> bool:
        return bool(self.resolve('skip_absent', self.yaml.get_skip_absent()))

    # Gradient check
    def count(self) -> int:
        return int(self.resolve('count', self.yaml.get_gradcheck_count()))

    def seed(self) -> int:
        return int(self.resolve('seed', self.yaml.get_seed()))

    def step(self) -> float:
        return float(self.resolve('step', self.yaml.get_gradcheck_step()))

    def tolerance(self) -> float:
        return float(self.resolve('tolerance', self.yaml.get_gradcheck_tolerance()))

    def eps(self) -> float:
        return self.yaml.get_eps()

    # Dataset
    def classes(self) -> str:
        return str(self.resolve('classes', self.yaml.get_classes()))


def parse_scales(text: str):
    """Parse "0.5,1.0" into a list of positive floats."""
    scales = []
    for chunk in str(text).split(','):
        chunk = chunk.strip()
        if not chunk:
            continue
        value = float(chunk)
        if value <= 0:
            raise ValueError(f"Scale must be positive, got {chunk}")
        scales.append(value)
    if not scales:
        raise ValueError(f"No scales in '{text}'")
    return scales
