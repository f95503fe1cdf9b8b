"""
Classification and regression losses: quality focal loss, ProbIoU and the
combined training objective.
"""
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np

from .assignment import AssignmentMap
from .geometry import OBB, covariance_components


DEFAULT_BETA = 2.0
DEFAULT_EPS = 1e-7


@dataclass(frozen=True)
class LossConfig:
    beta: float = DEFAULT_BETA
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if not 0 < self.eps < 1e-3:
            raise ValueError(f"eps must lie in (0, 1e-3), got {self.eps}")


@dataclass(frozen=True)
class LossReport:
    cls_loss: float
    reg_loss: float
    total: float
    n_pos: int


class ProbIoUGrad(NamedTuple):
    """Gradient of the ProbIoU loss w.r.t. (cx, cy, w, h, theta) of the prediction."""
    grad: np.ndarray
    degenerate: bool


ArrayLike = Union[float, np.ndarray]


def qfl(sigma: ArrayLike, y: ArrayLike, cfg: LossConfig = LossConfig()) -> ArrayLike:
    """
    Quality focal loss -|y - s|^beta ((1 - y) log(1 - s) + y log(s)).

    sigma is clamped into [eps, 1 - eps] before the logs. Accepts scalars or
    arrays of matching shape.
    """
    s = np.clip(np.asarray(sigma, dtype=float), cfg.eps, 1.0 - cfg.eps)
    target = np.asarray(y, dtype=float)
    modulator = np.abs(target - s) ** cfg.beta
    bce = -((1.0 - target) * np.log1p(-s) + target * np.log(s))
    loss = modulator * bce
    if np.ndim(loss) == 0:
        return float(loss)
    return loss


def _bhattacharyya_terms(a: OBB, b: OBB, eps: float):
    """Intermediate quantities shared by prob_iou and its gradient."""
    a00, a01, a11 = covariance_components(a.w, a.h, a.theta)
    b00, b01, b11 = covariance_components(b.w, b.h, b.theta)
    m00, m01, m11 = (a00 + b00) / 2.0, (a01 + b01) / 2.0, (a11 + b11) / 2.0

    floor = eps * eps
    det_a = max(a00 * a11 - a01 * a01, floor)
    det_b = max(b00 * b11 - b01 * b01, floor)
    det_m = max(m00 * m11 - m01 * m01, floor)

    dx = a.cx - b.cx
    dy = a.cy - b.cy
    # Inverse of the mean covariance via the adjugate
    inv_m = np.array([[m11, -m01], [-m01, m00]]) / det_m
    d = np.array([dx, dy])
    quad = float(d @ inv_m @ d)

    distance = quad / 8.0 + 0.5 * math.log(det_m / math.sqrt(det_a * det_b))
    distance = max(distance, 0.0)
    return {
        'distance': distance,
        'd': d,
        'inv_m': inv_m,
        'inv_a': np.array([[a11, -a01], [-a01, a00]]) / det_a,
    }


def bhattacharyya_distance(a: OBB, b: OBB, eps: float = DEFAULT_EPS) -> float:
    """Bhattacharyya distance between the Gaussians of two boxes."""
    return _bhattacharyya_terms(a, b, eps)['distance']


def hellinger_distance(a: OBB, b: OBB, eps: float = DEFAULT_EPS) -> float:
    """sqrt(1 - exp(-B_D)), in [0, 1]."""
    coefficient = math.exp(-bhattacharyya_distance(a, b, eps))
    return math.sqrt(min(max(1.0 - coefficient, 0.0), 1.0))


def prob_iou(a: OBB, b: OBB, eps: float = DEFAULT_EPS) -> float:
    """Gaussian IoU surrogate 1 - Hellinger distance; 1 for identical boxes."""
    return 1.0 - hellinger_distance(a, b, eps)


def prob_iou_loss(pred: OBB, gt: OBB, eps: float = DEFAULT_EPS) -> float:
    return hellinger_distance(pred, gt, eps)


def _covariance_partials(obb: OBB):
    """dSigma/dw, dSigma/dh, dSigma/dtheta for the unshrunk covariance."""
    c, s = math.cos(obb.theta), math.sin(obb.theta)
    a = obb.w * obb.w / 12.0
    b = obb.h * obb.h / 12.0
    da_dw = obb.w / 6.0
    db_dh = obb.h / 6.0
    d_w = da_dw * np.array([[c * c, s * c], [s * c, s * s]])
    d_h = db_dh * np.array([[s * s, -s * c], [-s * c, c * c]])
    d_theta = (a - b) * np.array([[-2.0 * s * c, c * c - s * s], [c * c - s * s, 2.0 * s * c]])
    return d_w, d_h, d_theta


def prob_iou_grad(pred: OBB, gt: OBB, eps: float = DEFAULT_EPS) -> ProbIoUGrad:
    """
    Analytic gradient of prob_iou_loss(pred, gt) with respect to pred.

    Loss H = sqrt(1 - exp(-B)) with
    B = (1/8) d^T M^-1 d + (1/2) ln|M| - (1/4) ln|S_p| - (1/4) ln|S_g|,
    M = (S_p + S_g) / 2, d = mu_p - mu_g. The square root is singular at H = 0,
    so H < eps returns a zero vector flagged as degenerate.

    Returns:
        ProbIoUGrad with the 5-vector (d/dcx, d/dcy, d/dw, d/dh, d/dtheta)
    """
    terms = _bhattacharyya_terms(pred, gt, eps)
    distance = terms['distance']
    h = math.sqrt(min(max(1.0 - math.exp(-distance), 0.0), 1.0))
    if h < eps:
        return ProbIoUGrad(np.zeros(5), True)

    dloss_ddist = math.exp(-distance) / (2.0 * h)
    d = terms['d']
    inv_m = terms['inv_m']
    inv_a = terms['inv_a']

    grad_mu = inv_m @ d / 4.0
    m_d = inv_m @ d
    # dB = tr(G dS_p) for symmetric perturbations of the prediction covariance
    g_sigma = -np.outer(m_d, m_d) / 16.0 + inv_m / 4.0 - inv_a / 4.0

    d_w, d_h, d_theta = _covariance_partials(pred)
    grad = np.array([
        grad_mu[0],
        grad_mu[1],
        float(np.sum(g_sigma * d_w)),
        float(np.sum(g_sigma * d_h)),
        float(np.sum(g_sigma * d_theta)),
    ])
    return ProbIoUGrad(dloss_ddist * grad, False)


def total_loss(
    cls_scores: Sequence[np.ndarray],
    decoded: Sequence[np.ndarray],
    assignment: AssignmentMap,
    cfg: LossConfig = LossConfig()
) -> LossReport:
    """
    Combined objective over all levels.

    cls_loss is the QFL sum over every cell and class divided by max(N_pos, 1);
    the target of the assigned class at a positive cell is the ProbIoU of the
    decoded box against its target, every other slot targets 0. reg_loss is
    the ProbIoU loss of positive cells weighted by that same ProbIoU and
    normalized by the weight sum.

    Args:
        cls_scores: Per level, sigmoid scores of shape (grid_h, grid_w, num_classes)
        decoded: Per level, decoded boxes of shape (grid_h, grid_w, 5) as (cx, cy, w, h, theta)
        assignment: Label map the predictions are scored against
        cfg: Loss parameters

    Returns:
        LossReport with cls_loss, reg_loss, total and N_pos
    """
    if len(cls_scores) != len(assignment.levels) or len(decoded) != len(assignment.levels):
        raise ValueError(
            f"Expected {len(assignment.levels)} levels, got {len(cls_scores)} score grids "
            f"and {len(decoded)} box grids"
        )

    cls_sum = 0.0
    weighted_reg = 0.0
    weight_sum = 0.0
    n_pos = 0

    for level_index, grid in enumerate(assignment.levels):
        scores = np.asarray(cls_scores[level_index], dtype=float)
        boxes = np.asarray(decoded[level_index], dtype=float)
        shape = (grid.spec.grid_h, grid.spec.grid_w)
        if scores.ndim != 3 or scores.shape[:2] != shape:
            raise ValueError(f"Level {level_index}: scores shape {scores.shape} does not match grid {shape}")
        if boxes.shape != shape + (5,):
            raise ValueError(f"Level {level_index}: boxes shape {boxes.shape} does not match grid {shape}")

        quality = np.zeros_like(scores)
        rows, cols = np.nonzero(grid.positive_mask)
        for r, c in zip(rows, cols):
            class_index = int(grid.class_index[r, c])
            if class_index >= scores.shape[2]:
                raise ValueError(f"Class index {class_index} outside {scores.shape[2]} score channels")
            target = assignment.targets[int(grid.target_index[r, c])].obb
            box = OBB.from_array(boxes[r, c])
            iou = prob_iou(box, target, cfg.eps)
            quality[r, c, class_index] = iou
            weighted_reg += iou * (1.0 - iou)
            weight_sum += iou
            n_pos += 1

        cls_sum += float(np.sum(qfl(scores, quality, cfg)))

    cls_loss = cls_sum / max(n_pos, 1)
    reg_loss = weighted_reg / max(weight_sum, cfg.eps) if n_pos else 0.0
    return LossReport(cls_loss=cls_loss, reg_loss=reg_loss, total=cls_loss + reg_loss, n_pos=n_pos)
