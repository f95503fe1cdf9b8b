"""
YAML configuration holding the package defaults.
"""
import os
import sys
from typing import Any, Dict, List, Tuple

import yaml

from .assignment import DEFAULT_RANGES, DEFAULT_STRIDES, level_ranges_from_specs


class YAMLConfig:
    """YAML configuration manager for algorithm defaults."""

    def __init__(self, config_file: str = None):
        """
        Initialize YAML configuration.

        Args:
            config_file: Path to YAML config file (default: obbassign/config.yaml)
        """
        if config_file is None:
            config_file = os.path.join(os.path.dirname(__file__), 'config.yaml')

        self.config_file = config_file
        self.config = {}
        self._load_config()

    def _load_config(self):
        """Load configuration from YAML file."""
        if os.path.exists(self.config_file):
            with open(self.config_file, 'r', encoding='utf-8') as f:
                self.config = yaml.safe_load(f) or {}
        else:
            print(f"⚠️  YAML config file {self.config_file} not found. Using defaults.", file=sys.stderr)
            self.config = {}

    def _section(self, name: str) -> Dict[str, Any]:
        return self.config.get(name, {}) or {}

    # Assignment
    def get_c_threshold(self) -> float:
        return float(self._section('assignment').get('c_threshold', 0.23))

    def get_mls_short_ratio(self) -> float:
        return float(self._section('assignment').get('mls_short_ratio', 2.0))

    def get_use_shrink(self) -> bool:
        return bool(self._section('assignment').get('use_shrink', True))

    def get_j_use_shrink(self) -> bool:
        return bool(self._section('assignment').get('j_use_shrink', False))

    def get_levels(self) -> Tuple[List[float], List[Tuple[float, float]]]:
        """Strides and (range_min, range_max] pairs of the default pyramid."""
        entries = self._section('assignment').get('levels')
        if not entries:
            return [float(s) for s in DEFAULT_STRIDES], list(DEFAULT_RANGES)
        return level_ranges_from_specs(entries)

    def get_image_size(self) -> Tuple[int, int]:
        section = self._section('assignment')
        return int(section.get('image_width', 1024)), int(section.get('image_height', 1024))

    # Losses
    def get_eps(self) -> float:
        return float(self._section('losses').get('eps', 1e-7))

    # Postprocess
    def get_nms_iou_threshold(self) -> float:
        return float(self._section('postprocess').get('iou_threshold', 0.1))

    def get_score_threshold(self) -> float:
        return float(self._section('postprocess').get('score_threshold', 0.1))

    # Tiling
    def get_patch(self) -> int:
        return int(self._section('tiling').get('patch', 1024))

    def get_gap(self) -> int:
        return int(self._section('tiling').get('gap', 512))

    def get_min_fraction(self) -> float:
        return float(self._section('tiling').get('min_fraction', 0.5))

    def get_scales(self) -> List[float]:
        return [float(s) for s in self._section('tiling').get('scales', [1.0])]

    # Evaluation
    def get_eval_iou_threshold(self) -> float:
        return float(self._section('evaluation').get('iou_threshold', 0.5))

    def get_metric(self) -> str:
        return str(self._section('evaluation').get('metric', 'voc07'))

    def get_skip_difficult(self) -> bool:
        return bool(self._section('evaluation').get('skip_difficult', True))

    def get_skip_absent(self) -> bool:
        return bool(self._section('evaluation').get('skip_absent', True))

    # Gradient check
    def get_gradcheck_count(self) -> int:
        return int(self._section('gradcheck').get('count', 1000))

    def get_seed(self) -> int:
        return int(self._section('gradcheck').get('seed', 0))

    def get_gradcheck_step(self) -> float:
        return float(self._section('gradcheck').get('step', 1e-5))

    def get_gradcheck_tolerance(self) -> float:
        return float(self._section('gradcheck').get('tolerance', 1e-4))

    # Dataset
    def get_classes(self) -> str:
        return str(self._section('dataset').get('classes', 'dota1.0'))
