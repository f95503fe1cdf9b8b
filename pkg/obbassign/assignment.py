"""
Label assignment over a feature pyramid.

Three rules decide which target, if any, a grid cell learns from:
ellipse center sampling (kernel >= C), the center-distance metric J for cells
claimed by several targets, and multi-level sampling that copies narrow
targets onto finer levels.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from .geometry import (
    INSCRIBED_KERNEL_VALUE,
    OBB,
    density_values,
    kernel_values,
    obb_to_gaussian,
)


DEFAULT_STRIDES = (8, 16, 32, 64, 128)
DEFAULT_RANGES = ((0.0, 64.0), (64.0, 128.0), (128.0, 256.0), (256.0, 512.0), (512.0, math.inf))
DEFAULT_C_THRESHOLD = 0.23
DEFAULT_MLS_SHORT_RATIO = 2.0

NEGATIVE = -1


@dataclass(frozen=True)
class LevelSpec:
    """One pyramid level: stride, grid size and the (range_min, range_max] scale interval."""
    stride: float
    grid_h: int
    grid_w: int
    range_min: float
    range_max: float

    def __post_init__(self):
        if self.stride <= 0:
            raise ValueError(f"Stride must be positive: {self.stride}")
        if self.grid_h < 0 or self.grid_w < 0:
            raise ValueError(f"Grid size must be nonnegative: {self.grid_h}x{self.grid_w}")
        if not self.range_min < self.range_max:
            raise ValueError(f"Empty range ({self.range_min}, {self.range_max}]")

    @property
    def name(self) -> str:
        """P-level name for power-of-two strides (stride 8 -> P3), else S<stride>."""
        exponent = math.log2(self.stride)
        if exponent.is_integer():
            return f"P{int(exponent)}"
        return f"S{self.stride:g}"

    def sampling_points(self) -> np.ndarray:
        """Pixel coordinates of every cell, row-major, shape (grid_h * grid_w, 2)."""
        cols = (np.arange(self.grid_w) + 0.5) * self.stride
        rows = (np.arange(self.grid_h) + 0.5) * self.stride
        xx, yy = np.meshgrid(cols, rows)
        return np.stack([xx.reshape(-1), yy.reshape(-1)], axis=1)

    def sampling_point(self, row: int, col: int) -> Tuple[float, float]:
        return ((col + 0.5) * self.stride, (row + 0.5) * self.stride)


def validate_levels(levels: Sequence[LevelSpec]):
    """Require a nonempty pyramid with strictly increasing strides."""
    if not levels:
        raise ValueError("At least one level is required")
    for lower, upper in zip(levels, levels[1:]):
        if not upper.stride > lower.stride:
            raise ValueError(f"Strides must increase: {lower.stride} then {upper.stride}")


def default_levels(
    image_w: float,
    image_h: float,
    strides: Sequence[float] = DEFAULT_STRIDES,
    ranges: Sequence[Tuple[float, float]] = DEFAULT_RANGES
) -> List[LevelSpec]:
    """
    Build a pyramid covering an image.

    Args:
        image_w: Image width in pixels
        image_h: Image height in pixels
        strides: Stride per level, ascending
        ranges: (range_min, range_max] per level

    Returns:
        List of LevelSpec with grid size ceil(image / stride)
    """
    if len(strides) != len(ranges):
        raise ValueError(f"{len(strides)} strides but {len(ranges)} ranges")
    levels = [
        LevelSpec(
            stride=float(stride),
            grid_h=int(math.ceil(image_h / stride)),
            grid_w=int(math.ceil(image_w / stride)),
            range_min=float(lo),
            range_max=float(hi)
        )
        for stride, (lo, hi) in zip(strides, ranges)
    ]
    validate_levels(levels)
    return levels


@dataclass(frozen=True)
class AssignConfig:
    """Sampling parameters. j_use_shrink selects the shrunk covariance for J."""
    c_threshold: float = DEFAULT_C_THRESHOLD
    mls_short_ratio: float = DEFAULT_MLS_SHORT_RATIO
    use_shrink: bool = True
    j_use_shrink: bool = False

    def __post_init__(self):
        if self.c_threshold < INSCRIBED_KERNEL_VALUE - 1e-12 or self.c_threshold > 1.0:
            raise ValueError(
                f"c_threshold must lie in [exp(-1.5), 1], got {self.c_threshold}"
            )
        if self.mls_short_ratio <= 0:
            raise ValueError(f"mls_short_ratio must be positive, got {self.mls_short_ratio}")


@dataclass(frozen=True)
class GroundTruth:
    obb: OBB
    class_index: int

    def __post_init__(self):
        if self.class_index < 0:
            raise ValueError(f"class_index must be nonnegative, got {self.class_index}")


@dataclass(frozen=True)
class PositiveCell:
    """A positive cell as listed in assignment dumps."""
    level: int
    row: int
    col: int
    class_index: int
    j_value: float
    target_index: int


@dataclass
class LevelAssignment:
    """
    Label grids for one level.

    target_index holds the assigned target per cell (NEGATIVE when none),
    class_index its class, j_value the winning J (0 for negatives).
    """
    spec: LevelSpec
    target_index: np.ndarray
    class_index: np.ndarray
    j_value: np.ndarray

    @classmethod
    def empty(cls, spec: LevelSpec) -> 'LevelAssignment':
        shape = (spec.grid_h, spec.grid_w)
        return cls(
            spec=spec,
            target_index=np.full(shape, NEGATIVE, dtype=np.int64),
            class_index=np.full(shape, NEGATIVE, dtype=np.int64),
            j_value=np.zeros(shape, dtype=float)
        )

    @property
    def positive_mask(self) -> np.ndarray:
        return self.target_index != NEGATIVE

    @property
    def num_positive(self) -> int:
        return int(self.positive_mask.sum())


@dataclass
class AssignmentMap:
    """Per-level label grids plus the targets they were built from."""
    levels: List[LevelAssignment]
    targets: List[GroundTruth] = field(default_factory=list)
    target_levels: List[Set[int]] = field(default_factory=list)

    def cell(self, level: int, row: int, col: int) -> Optional[PositiveCell]:
        """The positive label at a cell, or None for a negative cell."""
        grid = self.levels[level]
        target = int(grid.target_index[row, col])
        if target == NEGATIVE:
            return None
        return PositiveCell(
            level=level,
            row=row,
            col=col,
            class_index=int(grid.class_index[row, col]),
            j_value=float(grid.j_value[row, col]),
            target_index=target
        )

    def positive_cells(self, level: int) -> List[PositiveCell]:
        """Positive cells of one level in row-major order."""
        rows, cols = np.nonzero(self.levels[level].positive_mask)
        return [self.cell(level, int(r), int(c)) for r, c in zip(rows, cols)]

    def num_positive(self) -> int:
        return sum(grid.num_positive for grid in self.levels)

    def positives_per_target(self) -> List[int]:
        counts = [0] * len(self.targets)
        for grid in self.levels:
            assigned = grid.target_index[grid.positive_mask]
            for index, count in zip(*np.unique(assigned, return_counts=True)):
                counts[int(index)] += int(count)
        return counts

    def unassigned_targets(self) -> List[int]:
        """Indices of targets that won no cell on any level."""
        return [i for i, count in enumerate(self.positives_per_target()) if count == 0]


def ellipse_region_test(obb: OBB, x: Sequence[float], cfg: AssignConfig) -> bool:
    """True if the sampling point lies in the target's center-sampling ellipse."""
    g = obb_to_gaussian(obb, cfg.use_shrink)
    return bool(kernel_values(g, np.asarray(x, dtype=float))[0] >= cfg.c_threshold)


def center_distance_j(obb: OBB, x: Sequence[float], shrink: bool = False) -> float:
    """
    Center-distance metric J = sqrt(w h) * f(x).

    Larger J means x is closer to the center relative to the box size; at the
    center J = 6 / (pi sqrt(w h)), so smaller boxes win ties near their centers.
    """
    return float(_j_values(obb, np.asarray(x, dtype=float), shrink)[0])


def _j_values(obb: OBB, points: np.ndarray, shrink: bool) -> np.ndarray:
    g = obb_to_gaussian(obb, shrink)
    return math.sqrt(obb.w * obb.h) * density_values(g, points)


def assign_levels(obb: OBB, levels: Sequence[LevelSpec], cfg: AssignConfig) -> Set[int]:
    """
    Levels a target is assigned to.

    The base level is the one whose (range_min, range_max] contains the long
    edge; boxes beyond the last range go to the top level and boxes below the
    first go to the bottom one. Multi-level sampling then adds every level j
    where short / stride_j < mls_short_ratio and long > range_max_j.
    """
    long_edge = obb.long_edge
    short_edge = obb.short_edge

    base = None
    for i, level in enumerate(levels):
        if level.range_min < long_edge <= level.range_max:
            base = i
            break
    if base is None:
        base = len(levels) - 1 if long_edge > levels[-1].range_max else 0

    selected = {base}
    for j, level in enumerate(levels):
        if short_edge / level.stride < cfg.mls_short_ratio and long_edge > level.range_max:
            selected.add(j)
    return selected


def build_assignment(
    targets: Sequence[GroundTruth],
    levels: Sequence[LevelSpec],
    cfg: AssignConfig
) -> AssignmentMap:
    """
    Label every cell of every level.

    A cell's candidates are the targets assigned to its level whose ellipse
    contains the cell's sampling point. The candidate with the largest J wins;
    equal J goes to the smaller area, then to the lower input index.

    Args:
        targets: Ground truth boxes with class indices
        levels: Pyramid levels, strides ascending
        cfg: Sampling parameters

    Returns:
        AssignmentMap with one LevelAssignment per level
    """
    validate_levels(levels)
    target_levels = [assign_levels(t.obb, levels, cfg) for t in targets]
    grids = []

    for level_index, spec in enumerate(levels):
        grid = LevelAssignment.empty(spec)
        if spec.grid_h == 0 or spec.grid_w == 0:
            grids.append(grid)
            continue

        points = spec.sampling_points()
        best_target = np.full(len(points), NEGATIVE, dtype=np.int64)
        best_j = np.full(len(points), -np.inf)
        best_area = np.full(len(points), np.inf)

        for target_index, target in enumerate(targets):
            if level_index not in target_levels[target_index]:
                continue
            g = obb_to_gaussian(target.obb, cfg.use_shrink)
            inside = kernel_values(g, points) >= cfg.c_threshold
            if not inside.any():
                continue
            j = _j_values(target.obb, points, cfg.j_use_shrink)
            area = target.obb.area
            wins = inside & ((j > best_j) | ((j == best_j) & (area < best_area)))
            best_target[wins] = target_index
            best_j[wins] = j[wins]
            best_area[wins] = area

        shape = (spec.grid_h, spec.grid_w)
        positive = best_target != NEGATIVE
        classes = np.full(len(points), NEGATIVE, dtype=np.int64)
        if positive.any():
            target_classes = np.array([t.class_index for t in targets], dtype=np.int64)
            classes[positive] = target_classes[best_target[positive]]
        grid.target_index = best_target.reshape(shape)
        grid.class_index = classes.reshape(shape)
        grid.j_value = np.where(positive, best_j, 0.0).reshape(shape)
        grids.append(grid)

    return AssignmentMap(levels=grids, targets=list(targets), target_levels=target_levels)


def level_ranges_from_specs(entries: Sequence[Dict[str, float]]) -> Tuple[List[float], List[Tuple[float, float]]]:
    """Split config entries {stride, range_min, range_max} into strides and ranges."""
    strides = [float(e['stride']) for e in entries]
    ranges = [(float(e['range_min']), float(e['range_max'])) for e in entries]
    return strides, ranges


def parse_level_triples(text: str) -> Tuple[List[float], List[Tuple[float, float]]]:
    """
    Parse "stride:min:max,..." (max may be "inf") into strides and ranges.

    Example: "8:0:64,16:64:128,32:128:inf"
    """
    strides = []
    ranges = []
    for chunk in text.split(','):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(':')
        if len(parts) != 3:
            raise ValueError(f"Level '{chunk}' must be stride:min:max")
        stride, lo, hi = (float(p) for p in parts)
        strides.append(stride)
        ranges.append((lo, hi))
    if not strides:
        raise ValueError("No levels given")
    return strides, ranges
