"""
Two-step rotation augmentation applied to annotation coordinates.

A coarse quarter turn is drawn uniformly from {0, 90, 180, 270}; then, with
probability 0.5, a fine rotation of 30 or 60 degrees is added. Angles are
counterclockwise as seen on screen.
"""
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from ..geometry import Polygon
from .dota import Annotation


COARSE_ANGLES = (0, 90, 180, 270)
FINE_ANGLES = (30, 60)
FINE_PROBABILITY = 0.5


@dataclass(frozen=True)
class RotationPlan:
    coarse: int = 0
    fine: int = 0

    def __post_init__(self):
        if self.coarse not in COARSE_ANGLES:
            raise ValueError(f"coarse must be one of {COARSE_ANGLES}, got {self.coarse}")
        if self.fine not in (0,) + FINE_ANGLES:
            raise ValueError(f"fine must be one of {(0,) + FINE_ANGLES}, got {self.fine}")

    @property
    def degrees(self) -> int:
        return self.coarse + self.fine


def sample_rotation(rng: np.random.Generator) -> RotationPlan:
    """Draw a plan using the caller's generator."""
    coarse = COARSE_ANGLES[int(rng.integers(len(COARSE_ANGLES)))]
    fine = 0
    if rng.random() < FINE_PROBABILITY:
        fine = FINE_ANGLES[int(rng.integers(len(FINE_ANGLES)))]
    return RotationPlan(coarse, fine)


def _cos_sin(degrees: int) -> Tuple[float, float]:
    """cos and sin with exact values at quarter turns."""
    exact = {0: (1.0, 0.0), 90: (0.0, 1.0), 180: (-1.0, 0.0), 270: (0.0, -1.0)}
    degrees %= 360
    if degrees in exact:
        return exact[degrees]
    radians = math.radians(degrees)
    return math.cos(radians), math.sin(radians)


def rotated_size(image_w: float, image_h: float, degrees: int) -> Tuple[float, float]:
    """Size of the axis-aligned frame enclosing the rotated image."""
    c, s = _cos_sin(degrees)
    return abs(image_w * c) + abs(image_h * s), abs(image_w * s) + abs(image_h * c)


def rotate_points(points: np.ndarray, image_w: float, image_h: float, degrees: int) -> np.ndarray:
    """
    Rotate (n, 2) image points about the image center into the enclosing frame.

    In image coordinates (y down) a 90 degree turn maps (x, y) to (y, W - x).
    """
    c, s = _cos_sin(degrees)
    new_w, new_h = rotated_size(image_w, image_h, degrees)
    dx = points[:, 0] - image_w / 2.0
    dy = points[:, 1] - image_h / 2.0
    x = new_w / 2.0 + c * dx + s * dy
    y = new_h / 2.0 - s * dx + c * dy
    return np.stack([x, y], axis=1)


def apply_rotation(
    annotations: Sequence[Annotation],
    image_w: float,
    image_h: float,
    plan: RotationPlan
) -> Tuple[List[Annotation], float, float]:
    """
    Rotate every quad by the plan's total angle.

    Returns:
        (rotated annotations, new image width, new image height)
    """
    if image_w <= 0 or image_h <= 0:
        raise ValueError(f"Image size must be positive: {image_w}x{image_h}")
    degrees = plan.degrees
    new_w, new_h = rotated_size(image_w, image_h, degrees)
    rotated = [
        Annotation(Polygon(rotate_points(a.quad.vertices, image_w, image_h, degrees)), a.category, a.difficult)
        for a in annotations
    ]
    return rotated, new_w, new_h
