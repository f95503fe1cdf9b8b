"""
Cutting large images into overlapping square patches, at the annotation level.
"""
import re
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from shapely.geometry import box as shapely_box

from ..geometry import DegenerateGeometryError, Polygon, min_area_obb, obb_corners
from ..postprocess import PatchOrigin
from .dota import Annotation


DEFAULT_PATCH = 1024
DEFAULT_GAP = 512
DEFAULT_MIN_FRACTION = 0.5

_PATCH_ID = re.compile(r'^(?P<image>.+)__(?P<scale>[0-9.]+)__(?P<x>\d+)___(?P<y>\d+)$')


@dataclass(frozen=True)
class TileWindow:
    x0: int
    y0: int
    width: int
    height: int

    def __post_init__(self):
        if self.x0 < 0 or self.y0 < 0:
            raise ValueError(f"Window origin must be nonnegative: ({self.x0}, {self.y0})")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"Window size must be positive: {self.width}x{self.height}")

    @property
    def origin(self) -> PatchOrigin:
        return PatchOrigin(float(self.x0), float(self.y0))


def _axis_offsets(dim: int, patch: int, stride: int) -> List[int]:
    offsets = [0]
    x = 0
    while x + patch < dim:
        x += stride
        if x + patch >= dim:
            x = max(0, dim - patch)
        offsets.append(x)
    return offsets


def tile_plan(image_w: int, image_h: int, patch: int = DEFAULT_PATCH, gap: int = DEFAULT_GAP) -> List[TileWindow]:
    """
    Windows covering an image, row by row.

    Consecutive windows start patch - gap apart; the last window on each axis
    is pulled back to end at the image edge. Images smaller than a patch get a
    single window that extends past them.

    Args:
        image_w: Image width in pixels
        image_h: Image height in pixels
        patch: Window side
        gap: Overlap between neighbouring windows

    Returns:
        List of TileWindow
    """
    if not patch > gap >= 0:
        raise ValueError(f"Need patch > gap >= 0, got patch={patch}, gap={gap}")
    if image_w <= 0 or image_h <= 0:
        raise ValueError(f"Image size must be positive: {image_w}x{image_h}")
    stride = patch - gap
    xs = _axis_offsets(image_w, patch, stride)
    ys = _axis_offsets(image_h, patch, stride)
    return [TileWindow(x, y, patch, patch) for y in ys for x in xs]


def clip_annotations(
    annotations: Sequence[Annotation],
    window: TileWindow,
    min_fraction: float = DEFAULT_MIN_FRACTION
) -> List[Annotation]:
    """
    Annotations of one window, in window coordinates.

    An annotation is kept when at least min_fraction of its area lies inside
    the window. Fully contained quads are only translated; partially
    contained ones become the minimum-area rectangle of the clipped part.
    The difficult flag is carried over.
    """
    if not 0.0 <= min_fraction <= 1.0:
        raise ValueError(f"min_fraction must lie in [0, 1], got {min_fraction}")

    frame = shapely_box(window.x0, window.y0, window.x0 + window.width, window.y0 + window.height)
    offset = np.array([window.x0, window.y0], dtype=float)
    kept = []
    for a in annotations:
        shape = a.quad.to_shapely().convex_hull
        area = shape.area
        if area <= 0.0:
            continue
        inside = shape.intersection(frame)
        fraction = inside.area / area
        if inside.area <= 0.0 or fraction < min_fraction:
            continue
        if fraction >= 1.0 - 1e-9:
            quad = Polygon(a.quad.vertices - offset)
        else:
            clipped = inside if inside.geom_type == 'Polygon' else inside.convex_hull
            try:
                rect = min_area_obb(Polygon(np.asarray(clipped.exterior.coords)[:-1]))
            except (DegenerateGeometryError, ValueError, AttributeError):
                continue
            quad = Polygon(obb_corners(rect).vertices - offset)
        kept.append(Annotation(quad, a.category, a.difficult))
    return kept


def annotation_extent(annotations: Sequence[Annotation]) -> Tuple[int, int]:
    """Smallest (width, height) frame anchored at the origin that holds every vertex; (0, 0) when empty."""
    if not annotations:
        return 0, 0
    points = np.concatenate([a.quad.vertices for a in annotations])
    far = np.ceil(np.maximum(points.max(axis=0), 0.0))
    return int(far[0]), int(far[1])


def outside_frame(annotations: Sequence[Annotation], image_w: int, image_h: int) -> List[Annotation]:
    """Annotations with a vertex beyond the image frame."""
    return [
        a for a in annotations
        if (a.quad.vertices[:, 0] > image_w).any() or (a.quad.vertices[:, 1] > image_h).any()
        or (a.quad.vertices < 0).any()
    ]


def scale_annotations(annotations: Sequence[Annotation], factor: float) -> List[Annotation]:
    """Annotations of the image resized by factor."""
    if factor <= 0:
        raise ValueError(f"Scale factor must be positive, got {factor}")
    return [Annotation(Polygon(a.quad.vertices * factor), a.category, a.difficult) for a in annotations]


def scaled_size(image_w: int, image_h: int, factor: float) -> Tuple[int, int]:
    return max(1, int(round(image_w * factor))), max(1, int(round(image_h * factor)))


def patch_id(image_id: str, scale: float, window: TileWindow) -> str:
    """Patch name in the devkit form <image>__<scale>__<x0>___<y0>."""
    return f"{image_id}__{scale:g}__{window.x0}___{window.y0}"


def parse_patch_id(name: str) -> Tuple[str, PatchOrigin]:
    """
    Source image id and origin of a patch name.

    Names without the patch suffix are whole images at origin (0, 0), scale 1.
    """
    match = _PATCH_ID.match(name)
    if not match:
        return name, PatchOrigin()
    return match.group('image'), PatchOrigin(
        float(match.group('x')),
        float(match.group('y')),
        float(match.group('scale'))
    )
