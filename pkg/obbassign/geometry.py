"""
Oriented box geometry: OBB values, Gaussian conversion, polygons and rotated IoU.
"""
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial import QhullError
from shapely.geometry import Polygon as ShapelyPolygon


HALF_PI = math.pi / 2

# Kernel value on the ellipse inscribed in an OBB (unshrunk covariance)
INSCRIBED_KERNEL_VALUE = float(np.exp(-1.5))

# Smallest determinant accepted when inverting a covariance
DET_FLOOR = 1e-14

_CONTAINMENT_TOL = 1e-9


class DegenerateGeometryError(ValueError):
    """Raised when a polygon or point set has no usable area."""


@dataclass(frozen=True)
class OBB:
    """
    Oriented bounding box.

    theta is kept in [0, pi/2). Angles outside that range are reduced on
    construction; an odd number of quarter turns swaps w and h, so the stored
    box is the same rectangle.
    """
    cx: float
    cy: float
    w: float
    h: float
    theta: float = 0.0

    def __post_init__(self):
        values = (self.cx, self.cy, self.w, self.h, self.theta)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"OBB values must be finite: {values}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"OBB sides must be positive: w={self.w}, h={self.h}")

        quarter_turns = math.floor(self.theta / HALF_PI)
        theta = self.theta - quarter_turns * HALF_PI
        if theta >= HALF_PI:
            theta -= HALF_PI
            quarter_turns += 1
        if theta < 0.0:
            theta = 0.0
        w, h = (self.h, self.w) if quarter_turns % 2 else (self.w, self.h)

        object.__setattr__(self, 'cx', float(self.cx))
        object.__setattr__(self, 'cy', float(self.cy))
        object.__setattr__(self, 'w', float(w))
        object.__setattr__(self, 'h', float(h))
        object.__setattr__(self, 'theta', float(theta))

    @property
    def center(self) -> np.ndarray:
        return np.array([self.cx, self.cy])

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def long_edge(self) -> float:
        return max(self.w, self.h)

    @property
    def short_edge(self) -> float:
        return min(self.w, self.h)

    def as_array(self) -> np.ndarray:
        """Return (cx, cy, w, h, theta) as a float array."""
        return np.array([self.cx, self.cy, self.w, self.h, self.theta])

    def translated(self, dx: float, dy: float) -> 'OBB':
        return OBB(self.cx + dx, self.cy + dy, self.w, self.h, self.theta)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> 'OBB':
        cx, cy, w, h, theta = (float(v) for v in values)
        return cls(cx, cy, w, h, theta)


@dataclass(frozen=True, eq=False)
class Gaussian2D:
    """2D Gaussian with mean mu (2,) and covariance sigma (2, 2)."""
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(2)
        sigma = np.asarray(self.sigma, dtype=float).reshape(2, 2)
        scale = max(abs(sigma[0, 1]), abs(sigma[1, 0]), 1e-300)
        if abs(sigma[0, 1] - sigma[1, 0]) > 1e-9 * scale:
            raise ValueError(f"Covariance is not symmetric: {sigma.tolist()}")
        if np.any(np.linalg.eigvalsh(sigma) <= 0):
            raise ValueError(f"Covariance is not positive definite: {sigma.tolist()}")
        object.__setattr__(self, 'mu', mu)
        object.__setattr__(self, 'sigma', sigma)

    @property
    def det(self) -> float:
        return _det(self.sigma)


@dataclass(frozen=True, eq=False)
class Polygon:
    """Counterclockwise vertex list, shape (n, 2)."""
    vertices: np.ndarray

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        if len(vertices) < 3:
            raise ValueError(f"Polygon needs at least 3 vertices, got {len(vertices)}")
        object.__setattr__(self, 'vertices', vertices)

    @property
    def area(self) -> float:
        return abs(signed_area(self.vertices))

    def to_shapely(self) -> ShapelyPolygon:
        return ShapelyPolygon(self.vertices)

    def flat(self) -> List[float]:
        """Vertex coordinates as x1, y1, x2, y2, ..."""
        return [float(v) for v in self.vertices.reshape(-1)]


def signed_area(vertices: np.ndarray) -> float:
    """Shoelace area; positive for counterclockwise order."""
    x = vertices[:, 0]
    y = vertices[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _det(sigma: np.ndarray) -> float:
    return float(sigma[0, 0] * sigma[1, 1] - sigma[0, 1] * sigma[1, 0])


def covariance_components(w: float, h: float, theta: float, shrink: bool = False) -> Tuple[float, float, float]:
    """
    Entries (s00, s01, s11) of R(theta) diag(a, b) R(theta)^T.

    Unshrunk: a = w^2/12, b = h^2/12. Shrunk: a = min(w,h) w / 12, b = min(w,h) h / 12,
    which keeps the short axis and pulls the long axis of the inscribed
    ellipse down to sqrt(w h).
    """
    if shrink:
        short = min(w, h)
        a = short * w / 12.0
        b = short * h / 12.0
    else:
        a = w * w / 12.0
        b = h * h / 12.0
    c, s = math.cos(theta), math.sin(theta)
    s00 = a * c * c + b * s * s
    s11 = a * s * s + b * c * c
    s01 = (a - b) * s * c
    return s00, s01, s11


def obb_to_gaussian(obb: OBB, shrink: bool = False) -> Gaussian2D:
    """
    Convert an OBB to its 2D Gaussian.

    Args:
        obb: Box to convert
        shrink: Use the shrunk covariance (min(w,h)/12) diag(w, h) instead of diag(w^2, h^2)/12

    Returns:
        Gaussian2D centered on the box
    """
    s00, s01, s11 = covariance_components(obb.w, obb.h, obb.theta, shrink)
    return Gaussian2D(np.array([obb.cx, obb.cy]), np.array([[s00, s01], [s01, s11]]))


def mahalanobis_sq(g: Gaussian2D, points: np.ndarray) -> np.ndarray:
    """Quadratic form (x - mu)^T Sigma^-1 (x - mu) for an (n, 2) array of points."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    dx = points[:, 0] - g.mu[0]
    dy = points[:, 1] - g.mu[1]
    s00, s01, s11 = g.sigma[0, 0], g.sigma[0, 1], g.sigma[1, 1]
    det = max(s00 * s11 - s01 * s01, DET_FLOOR)
    return (s11 * dx * dx - 2.0 * s01 * dx * dy + s00 * dy * dy) / det


def kernel_values(g: Gaussian2D, points: np.ndarray) -> np.ndarray:
    """Unnormalized kernel exp(-q/2) for an (n, 2) array of points."""
    return np.exp(-0.5 * mahalanobis_sq(g, points))


def density_values(g: Gaussian2D, points: np.ndarray) -> np.ndarray:
    """Probability density for an (n, 2) array of points."""
    norm = 2.0 * math.pi * math.sqrt(max(g.det, DET_FLOOR))
    return kernel_values(g, points) / norm


def gaussian_kernel(g: Gaussian2D, x: Sequence[float]) -> float:
    """Unnormalized kernel at x; equals 1 at the mean."""
    return float(kernel_values(g, np.asarray(x, dtype=float))[0])


def gaussian_density(g: Gaussian2D, x: Sequence[float]) -> float:
    """Probability density of g at x."""
    return float(density_values(g, np.asarray(x, dtype=float))[0])


def obb_corners(obb: OBB) -> Polygon:
    """Four counterclockwise corners; the first edge is the width edge."""
    hw, hh = obb.w / 2.0, obb.h / 2.0
    local = np.array([[-hw, -hh], [hw, -hh], [hw, hh], [-hw, hh]])
    corners = local @ rotation_matrix(obb.theta).T + obb.center
    return Polygon(corners)


def polygon_iou(a: Polygon, b: Polygon) -> float:
    """
    Intersection over union of two convex polygons.

    Degenerate (zero-area) inputs give 0.
    """
    area_a = a.area
    area_b = b.area
    if area_a <= 0.0 or area_b <= 0.0:
        return 0.0
    poly_a = a.to_shapely()
    poly_b = b.to_shapely()
    if not poly_a.intersects(poly_b):
        return 0.0
    inter = poly_a.intersection(poly_b).area
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    return float(min(max(inter / union, 0.0), 1.0))


def obb_iou(a: OBB, b: OBB) -> float:
    """Rotated IoU of two boxes, with a circumscribed-circle early exit."""
    reach = (math.hypot(a.w, a.h) + math.hypot(b.w, b.h)) / 2.0
    if math.hypot(a.cx - b.cx, a.cy - b.cy) > reach:
        return 0.0
    return polygon_iou(obb_corners(a), obb_corners(b))


def convex_hull(points: np.ndarray) -> np.ndarray:
    """
    Counterclockwise convex hull vertices of a point set.

    Raises:
        DegenerateGeometryError: if the points are collinear or coincident
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(points) < 3:
        raise DegenerateGeometryError(f"Need at least 3 points, got {len(points)}")
    try:
        hull = ConvexHull(points)
    except QhullError as e:
        raise DegenerateGeometryError(f"Points span no area: {e}") from e
    vertices = points[hull.vertices]
    if abs(signed_area(vertices)) <= 0.0:
        raise DegenerateGeometryError("Points span no area")
    return vertices


def min_area_obb(p: Polygon) -> OBB:
    """
    Minimum-area enclosing rectangle by rotating calipers over the hull edges.

    Raises:
        DegenerateGeometryError: if the vertices are collinear
    """
    hull = convex_hull(p.vertices)
    edges = np.roll(hull, -1, axis=0) - hull
    angles = np.arctan2(edges[:, 1], edges[:, 0])

    best = None
    for angle in angles:
        # Project the hull onto the edge direction and its normal
        c, s = math.cos(angle), math.sin(angle)
        u = hull[:, 0] * c + hull[:, 1] * s
        v = -hull[:, 0] * s + hull[:, 1] * c
        width = u.max() - u.min()
        height = v.max() - v.min()
        area = width * height
        if best is None or area < best[0]:
            mid_u = (u.max() + u.min()) / 2.0
            mid_v = (v.max() + v.min()) / 2.0
            best = (area, angle, width, height, mid_u, mid_v)

    area, angle, width, height, mid_u, mid_v = best
    if area <= 0.0:
        raise DegenerateGeometryError("Enclosing rectangle has zero area")
    c, s = math.cos(angle), math.sin(angle)
    cx = mid_u * c - mid_v * s
    cy = mid_u * s + mid_v * c
    return OBB(cx, cy, width, height, angle)


def point_in_obb(obb: OBB, x: Sequence[float]) -> bool:
    """True if x lies inside or on the boundary of the box."""
    dx = float(x[0]) - obb.cx
    dy = float(x[1]) - obb.cy
    c, s = math.cos(obb.theta), math.sin(obb.theta)
    u = dx * c + dy * s
    v = -dx * s + dy * c
    tol = _CONTAINMENT_TOL * max(1.0, obb.w, obb.h)
    return abs(u) <= obb.w / 2.0 + tol and abs(v) <= obb.h / 2.0 + tol


def points_in_obb(obb: OBB, points: np.ndarray) -> np.ndarray:
    """Vectorized point_in_obb over an (n, 2) array."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    dx = points[:, 0] - obb.cx
    dy = points[:, 1] - obb.cy
    c, s = math.cos(obb.theta), math.sin(obb.theta)
    u = dx * c + dy * s
    v = -dx * s + dy * c
    tol = _CONTAINMENT_TOL * max(1.0, obb.w, obb.h)
    return (np.abs(u) <= obb.w / 2.0 + tol) & (np.abs(v) <= obb.h / 2.0 + tol)
