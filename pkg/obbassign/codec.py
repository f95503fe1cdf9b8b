"""
Decoding of raw regression outputs into oriented boxes.
"""
import math
import sys
from dataclasses import dataclass
from typing import Sequence

from .geometry import HALF_PI, OBB


@dataclass(frozen=True)
class RawRegression:
    """Direct regression-head outputs for one sampling point."""
    reg_x: float
    reg_y: float
    reg_w: float
    reg_h: float
    reg_theta: float

    def __post_init__(self):
        values = (self.reg_x, self.reg_y, self.reg_w, self.reg_h, self.reg_theta)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"Raw regression values must be finite: {values}")


@dataclass(frozen=True)
class DecodeParams:
    """Adjustment factor k and level stride."""
    stride: float
    k: float = 1.0

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError(f"k must be positive, got {self.k}")
        if self.stride <= 0:
            raise ValueError(f"stride must be positive, got {self.stride}")


def elu(x: float) -> float:
    """x for x > 0, exp(x) - 1 otherwise."""
    if x > 0:
        return float(x)
    return math.expm1(x)


def elu_plus_one(x: float) -> float:
    """elu(x) + 1 without cancellation; stays positive for very negative x."""
    if x > 0:
        return float(x) + 1.0
    return max(math.exp(x), sys.float_info.min)


def wrap_angle(theta: float) -> float:
    """Reduce an angle into [0, pi/2), negative inputs included."""
    wrapped = math.fmod(theta, HALF_PI)
    if wrapped < 0:
        wrapped += HALF_PI
    if wrapped >= HALF_PI:
        wrapped = 0.0
    return wrapped


def decode_regression(raw: RawRegression, point: Sequence[float], params: DecodeParams) -> OBB:
    """
    Decode one prediction.

    The center is offset from the sampling point by reg_xy * k * stride (offsets
    may be negative), sides are (elu(reg * k) + 1) * stride, which is always
    positive, and theta is reg_theta reduced mod pi/2.

    Args:
        raw: Regression outputs
        point: Pixel coordinates of the sampling point
        params: k and stride of the point's level

    Returns:
        Decoded OBB
    """
    scale = params.k * params.stride
    cx = float(point[0]) + raw.reg_x * scale
    cy = float(point[1]) + raw.reg_y * scale
    w = elu_plus_one(raw.reg_w * params.k) * params.stride
    h = elu_plus_one(raw.reg_h * params.k) * params.stride
    return OBB(cx, cy, w, h, wrap_angle(raw.reg_theta))
