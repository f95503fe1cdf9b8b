"""
Finite-difference verification of the ProbIoU loss gradient.
"""
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from .geometry import HALF_PI, OBB
from .losses import DEFAULT_EPS, prob_iou_grad, prob_iou_loss


DEFAULT_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-4

# Components smaller than this are compared in absolute terms
GRADIENT_FLOOR = 1e-4

# Pairs are drawn so the loss stays away from the sqrt singularity at 0
# and the flat tail near 1
MIN_LOSS = 0.05
MAX_LOSS = 0.95


@dataclass
class GradcheckReport:
    count: int
    seed: int
    step: float
    tolerance: float
    max_rel_error: float
    worst_pair: int
    worst_component: int

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance

    def format(self) -> str:
        """Stable text form; identical for identical inputs."""
        names = ['cx', 'cy', 'w', 'h', 'theta']
        lines = [
            f"pairs {self.count}",
            f"seed {self.seed}",
            f"step {self.step:.1e}",
            f"tolerance {self.tolerance:.1e}",
            f"max_rel_error {self.max_rel_error:.6e}",
            f"worst_pair {self.worst_pair}",
            f"worst_component {names[self.worst_component]}",
            f"status {'ok' if self.passed else 'fail'}",
        ]
        return '\n'.join(lines) + '\n'


def central_difference(func: Callable[[np.ndarray], float], x0: np.ndarray, step: float = DEFAULT_STEP) -> np.ndarray:
    """Centered-difference gradient of func at x0."""
    x0 = np.asarray(x0, dtype=float)
    grad = np.zeros(len(x0))
    for j in range(len(x0)):
        x = np.copy(x0)
        x[j] = x0[j] + step
        f_plus = func(x)
        x[j] = x0[j] - step
        f_minus = func(x)
        grad[j] = (f_plus - f_minus) / (2 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """Per-component |a - n| / max(|a|, |n|, GRADIENT_FLOOR)."""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), GRADIENT_FLOOR)
    return np.abs(analytic - numeric) / scale


def random_obb(rng: np.random.Generator) -> OBB:
    return OBB(
        rng.uniform(0.0, 200.0),
        rng.uniform(0.0, 200.0),
        rng.uniform(5.0, 80.0),
        rng.uniform(5.0, 80.0),
        rng.uniform(0.0, HALF_PI)
    )


def random_pair(rng: np.random.Generator) -> Tuple[OBB, OBB]:
    """
    A ground truth box and a perturbed prediction of it whose loss lies in
    [MIN_LOSS, MAX_LOSS].
    """
    while True:
        gt = random_obb(rng)
        pred = OBB(
            gt.cx + rng.normal(0.0, 0.3) * gt.w,
            gt.cy + rng.normal(0.0, 0.3) * gt.h,
            gt.w * float(np.exp(rng.normal(0.0, 0.3))),
            gt.h * float(np.exp(rng.normal(0.0, 0.3))),
            gt.theta + rng.normal(0.0, 0.3)
        )
        if MIN_LOSS <= prob_iou_loss(pred, gt) <= MAX_LOSS:
            return pred, gt


def check_pair(pred: OBB, gt: OBB, step: float = DEFAULT_STEP, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Per-component relative error of the analytic gradient for one pair."""
    analytic = prob_iou_grad(pred, gt, eps).grad
    numeric = central_difference(lambda p: prob_iou_loss(OBB.from_array(p), gt, eps), pred.as_array(), step)
    return relative_error(analytic, numeric)


def run_gradcheck(
    count: int,
    seed: int,
    step: float = DEFAULT_STEP,
    tolerance: float = DEFAULT_TOLERANCE,
    eps: float = DEFAULT_EPS
) -> GradcheckReport:
    """
    Compare analytic and central-difference gradients on seeded random pairs.

    Args:
        count: Number of pairs, at least 1
        seed: Seed for numpy.random.default_rng
        step: Finite-difference step
        tolerance: Largest accepted relative error
        eps: Numerical guard passed to the loss and its gradient

    Returns:
        GradcheckReport with the worst error observed
    """
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    rng = np.random.default_rng(seed)
    worst = (-1.0, 0, 0)
    for index in range(count):
        pred, gt = random_pair(rng)
        errors = check_pair(pred, gt, step, eps)
        component = int(np.argmax(errors))
        if errors[component] > worst[0]:
            worst = (float(errors[component]), index, component)
    return GradcheckReport(
        count=count,
        seed=seed,
        step=step,
        tolerance=tolerance,
        max_rel_error=worst[0],
        worst_pair=worst[1],
        worst_component=worst[2]
    )


def sample_pairs(count: int, seed: int) -> List[Tuple[OBB, OBB]]:
    rng = np.random.default_rng(seed)
    return [random_pair(rng) for _ in range(count)]
