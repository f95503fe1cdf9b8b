"""
Rotated NMS, confidence filtering and merging of per-patch detections.
"""
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

from .geometry import OBB, obb_iou


DEFAULT_NMS_THRESHOLD = 0.1
DEFAULT_SCORE_THRESHOLD = 0.1


@dataclass(frozen=True)
class Detection:
    obb: OBB
    class_index: int
    score: float

    def __post_init__(self):
        if not math.isfinite(self.score) or not 0.0 <= self.score <= 1.0:
            raise ValueError(f"Score must lie in [0, 1], got {self.score}")
        if self.class_index < 0:
            raise ValueError(f"class_index must be nonnegative, got {self.class_index}")


@dataclass(frozen=True)
class PatchOrigin:
    """
    Where a patch sits in its source image.

    Offsets are in the (possibly rescaled) image the patch was cut from;
    scale is that image's size relative to the source.
    """
    offset_x: float = 0.0
    offset_y: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.offset_x < 0 or self.offset_y < 0:
            raise ValueError(f"Patch offsets must be nonnegative: ({self.offset_x}, {self.offset_y})")
        if self.scale <= 0:
            raise ValueError(f"Patch scale must be positive: {self.scale}")

    def to_source(self, obb: OBB) -> OBB:
        """Map a patch-local box into source image coordinates."""
        return OBB(
            (obb.cx + self.offset_x) / self.scale,
            (obb.cy + self.offset_y) / self.scale,
            obb.w / self.scale,
            obb.h / self.scale,
            obb.theta
        )


def _ranked(dets: Sequence[Detection]) -> List[int]:
    """Indices by descending score; ties keep input order."""
    return sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))


def rotated_nms(dets: Sequence[Detection], iou_threshold: float = DEFAULT_NMS_THRESHOLD) -> List[Detection]:
    """
    Class-wise greedy suppression.

    A detection survives if its rotated IoU with every kept detection of the
    same class is below iou_threshold; equality suppresses. The result keeps
    descending score order.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must lie in [0, 1], got {iou_threshold}")

    kept_by_class: Dict[int, List[Detection]] = {}
    kept = []
    for i in _ranked(dets):
        det = dets[i]
        same_class = kept_by_class.setdefault(det.class_index, [])
        if all(obb_iou(det.obb, other.obb) < iou_threshold for other in same_class):
            same_class.append(det)
            kept.append(det)
    return kept


def filter_by_score(dets: Iterable[Detection], score_threshold: float = DEFAULT_SCORE_THRESHOLD) -> List[Detection]:
    """Drop detections scoring below the threshold."""
    return [d for d in dets if d.score >= score_threshold]


def merge_patches(
    per_patch: Sequence[Tuple[PatchOrigin, Sequence[Detection]]],
    iou_threshold: float = DEFAULT_NMS_THRESHOLD,
    score_threshold: float = DEFAULT_SCORE_THRESHOLD
) -> List[Detection]:
    """
    Merge patch detections into one image-level list.

    Each detection is moved into source coordinates, low scores are dropped
    and rotated NMS runs over the union. The union is put in a canonical
    order first so the result does not depend on patch enumeration order.

    Args:
        per_patch: (origin, detections) per patch
        iou_threshold: NMS threshold
        score_threshold: Minimum confidence kept

    Returns:
        Surviving detections in descending score order
    """
    if not 0.0 <= score_threshold <= 1.0:
        raise ValueError(f"score_threshold must lie in [0, 1], got {score_threshold}")

    pooled = []
    for origin, dets in per_patch:
        for det in filter_by_score(dets, score_threshold):
            pooled.append(Detection(origin.to_source(det.obb), det.class_index, det.score))
    pooled.sort(key=_canonical_key)
    return rotated_nms(pooled, iou_threshold)


def _canonical_key(det: Detection):
    o = det.obb
    return (-det.score, det.class_index, o.cx, o.cy, o.w, o.h, o.theta)
