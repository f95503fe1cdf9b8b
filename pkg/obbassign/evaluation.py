"""
Rotated-box average precision under the VOC2007 and VOC2012 metrics.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .geometry import OBB, obb_iou
from .postprocess import Detection


class Metric(Enum):
    """AP interpolation scheme."""
    VOC07 = "voc07"     # 11-point interpolation
    VOC12 = "voc12"     # area under the precision envelope


class MatchLabel(Enum):
    """Outcome of matching one detection."""
    TP = "tp"
    FP = "fp"
    IGNORED = "ignored"     # Matched a difficult ground truth


@dataclass(frozen=True)
class EvalConfig:
    iou_threshold: float = 0.5
    metric: Metric = Metric.VOC07
    skip_difficult: bool = True

    def __post_init__(self):
        if not 0.0 < self.iou_threshold < 1.0:
            raise ValueError(f"iou_threshold must lie in (0, 1), got {self.iou_threshold}")


@dataclass(frozen=True)
class EvalGroundTruth:
    """Ground truth box for evaluation, with its difficult flag."""
    obb: OBB
    class_index: int
    difficult: bool = False


@dataclass
class PRCurve:
    recall: np.ndarray
    precision: np.ndarray


@dataclass
class ClassResult:
    """Per-class evaluation outcome."""
    name: str
    ap: float
    n_gt: int
    n_det: int
    n_tp: int = 0
    curve: Optional[PRCurve] = field(default=None, repr=False)


def _match_image(
    ranked: Sequence[Detection],
    gts: Sequence[EvalGroundTruth],
    cfg: EvalConfig
) -> List[MatchLabel]:
    """Greedy VOC matching for already score-ranked detections of one image."""
    used = [False] * len(gts)
    return [_match_one(det, gts, used, cfg) for det in ranked]


def _rank(dets: Sequence[Detection]) -> List[int]:
    return sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))


def match_detections(
    dets: Sequence[Detection],
    gts: Sequence[EvalGroundTruth],
    cfg: EvalConfig = EvalConfig()
) -> List[Tuple[Detection, MatchLabel]]:
    """
    Label the detections of one class in one image as TP, FP or ignored.

    Detections are taken by descending score; each one matches the ground
    truth it overlaps most if that IoU reaches the threshold and the ground
    truth is still unmatched. Difficult ground truths (with skip_difficult)
    neither count as misses nor consume detections.

    Returns:
        (detection, label) pairs in descending score order
    """
    order = _rank(dets)
    ranked = [dets[i] for i in order]
    return list(zip(ranked, _match_image(ranked, gts, cfg)))


def count_positives(gts: Sequence[EvalGroundTruth], cfg: EvalConfig) -> int:
    if cfg.skip_difficult:
        return sum(1 for gt in gts if not gt.difficult)
    return len(gts)


def pr_curve(labels: Sequence[MatchLabel], n_positives: int) -> PRCurve:
    """Recall and precision after each ranked, non-ignored detection."""
    kept = [label for label in labels if label != MatchLabel.IGNORED]
    tp = np.cumsum([1.0 if label == MatchLabel.TP else 0.0 for label in kept])
    fp = np.cumsum([1.0 if label == MatchLabel.FP else 0.0 for label in kept])
    if len(kept) == 0:
        return PRCurve(np.zeros(0), np.zeros(0))
    recall = tp / n_positives if n_positives > 0 else np.zeros(len(kept))
    precision = tp / np.maximum(tp + fp, np.finfo(np.float64).eps)
    return PRCurve(recall, precision)


def average_precision(
    labels: Sequence[MatchLabel],
    n_positives: int,
    metric: Metric = Metric.VOC07
) -> float:
    """
    AP of a score-ranked label sequence.

    VOC07 averages the best precision at recall >= t for t in 0, 0.1, ..., 1.
    VOC12 integrates the monotone precision envelope over recall.
    With no positives the AP is 0.
    """
    if n_positives < 0:
        raise ValueError(f"n_positives must be nonnegative, got {n_positives}")
    if n_positives == 0:
        return 0.0
    curve = pr_curve(labels, n_positives)
    if len(curve.recall) == 0:
        return 0.0
    if metric == Metric.VOC07:
        return _voc07_ap(curve)
    hits = np.array([label == MatchLabel.TP for label in labels if label != MatchLabel.IGNORED])
    return _voc12_ap(curve, hits, n_positives)


def _voc07_ap(curve: PRCurve) -> float:
    total = 0.0
    for t in np.linspace(0.0, 1.0, 11):
        reached = curve.precision[curve.recall >= t]
        total += float(np.max(reached)) if reached.size else 0.0
    return total / 11.0


def _voc12_ap(curve: PRCurve, hits: np.ndarray, n_positives: int) -> float:
    """
    Area under the precision envelope.

    Recall only moves at true positives, by 1 / n_positives each, so the area
    is the envelope summed at those ranks divided by n_positives.
    """
    # Precision envelope: best precision at this rank or any later one
    envelope = np.maximum.accumulate(curve.precision[::-1])[::-1]
    return float(np.sum(envelope[hits])) / n_positives


def evaluate_class(
    dets_by_image: Mapping[str, Sequence[Detection]],
    gts_by_image: Mapping[str, Sequence[EvalGroundTruth]],
    cfg: EvalConfig = EvalConfig(),
    name: str = ''
) -> ClassResult:
    """
    AP of one class over a set of images.

    Detections from all images are ranked together by score (ties by image id,
    then input order) and matched against the ground truth of their own image.
    """
    pooled = []
    for image_id in sorted(dets_by_image):
        for index, det in enumerate(dets_by_image[image_id]):
            pooled.append((-det.score, image_id, index, det))
    pooled.sort(key=lambda item: item[:3])

    used: Dict[str, List[bool]] = {image_id: [False] * len(gts) for image_id, gts in gts_by_image.items()}
    labels = []
    for _, image_id, _, det in pooled:
        gts = gts_by_image.get(image_id, [])
        labels.append(_match_one(det, gts, used.setdefault(image_id, []), cfg))

    n_gt = sum(count_positives(gts, cfg) for gts in gts_by_image.values())
    ap = average_precision(labels, n_gt, cfg.metric)
    return ClassResult(
        name=name,
        ap=ap,
        n_gt=n_gt,
        n_det=len(pooled),
        n_tp=sum(1 for label in labels if label == MatchLabel.TP),
        curve=pr_curve(labels, n_gt)
    )


def _match_one(det: Detection, gts: Sequence[EvalGroundTruth], used: List[bool], cfg: EvalConfig) -> MatchLabel:
    # Matched GTs drop out of the search; skipped difficult ones never get marked
    best_iou = -1.0
    best = -1
    for j, gt in enumerate(gts):
        if used[j]:
            continue
        iou = obb_iou(det.obb, gt.obb)
        if iou > best_iou:
            best_iou = iou
            best = j
    if best < 0 or best_iou < cfg.iou_threshold:
        return MatchLabel.FP
    if gts[best].difficult and cfg.skip_difficult:
        return MatchLabel.IGNORED
    used[best] = True
    return MatchLabel.TP


def evaluate_dataset(
    dets_by_image: Mapping[str, Sequence[Detection]],
    gts_by_image: Mapping[str, Sequence[EvalGroundTruth]],
    class_names: Sequence[str],
    cfg: EvalConfig = EvalConfig()
) -> List[ClassResult]:
    """Per-class results over all images, in class_names order."""
    results = []
    for class_index, name in enumerate(class_names):
        class_dets = {
            image_id: [d for d in dets if d.class_index == class_index]
            for image_id, dets in dets_by_image.items()
        }
        class_gts = {
            image_id: [g for g in gts if g.class_index == class_index]
            for image_id, gts in gts_by_image.items()
        }
        results.append(evaluate_class(class_dets, class_gts, cfg, name))
    return results


def mean_ap(
    class_aps: Union[Sequence[float], Sequence[ClassResult]],
    skip_absent: bool = True
) -> float:
    """
    Mean AP over classes.

    Plain floats are averaged as given. For ClassResult entries, classes with
    no ground truth are left out when skip_absent is set.

    Raises:
        ValueError: if there is no class to average
    """
    if len(class_aps) == 0:
        raise ValueError("No classes to average")
    values = []
    for entry in class_aps:
        if isinstance(entry, ClassResult):
            if skip_absent and entry.n_gt == 0:
                continue
            values.append(entry.ap)
        else:
            values.append(float(entry))
    if not values:
        raise ValueError("Every class was excluded from the mean")
    return float(np.mean(values))
