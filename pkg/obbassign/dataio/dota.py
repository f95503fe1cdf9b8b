"""
DOTA annotation and result text formats.

Annotation lines:  x1 y1 x2 y2 x3 y3 x4 y4 category difficult
Result lines:      image_id score x1 y1 x2 y2 x3 y3 x4 y4   (one file per class)
"""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..geometry import DegenerateGeometryError, OBB, Polygon, min_area_obb, obb_corners
from ..postprocess import Detection


HEADER_PREFIXES = ('imagesource:', 'gsd:')
RESULT_FILE_TEMPLATE = 'Task1_{}.txt'


class AnnotationParseError(ValueError):
    """Malformed annotation or result line."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass(frozen=True)
class Annotation:
    """One labeled quadrilateral."""
    quad: Polygon
    category: str
    difficult: int = 0

    def __post_init__(self):
        if len(self.quad.vertices) != 4:
            raise ValueError(f"Annotation quad needs 4 vertices, got {len(self.quad.vertices)}")
        if not self.category:
            raise ValueError("Annotation category must be nonempty")
        if self.difficult not in (0, 1):
            raise ValueError(f"difficult must be 0 or 1, got {self.difficult}")

    def to_obb(self) -> OBB:
        return min_area_obb(self.quad)


def _parse_coordinates(tokens: Sequence[str], line_number: int) -> np.ndarray:
    try:
        return np.array([float(t) for t in tokens]).reshape(4, 2)
    except ValueError:
        raise AnnotationParseError(line_number, f"non-numeric coordinate in {' '.join(tokens)}")


def parse_dota(text: str) -> List[Annotation]:
    """
    Parse a DOTA annotation file.

    Header lines starting with "imagesource:" or "gsd:" and blank lines are
    skipped. Zero-area quads are rejected.

    Raises:
        AnnotationParseError: on a malformed line, with its 1-based line number
    """
    annotations = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.lower().startswith(HEADER_PREFIXES):
            continue
        tokens = stripped.split()
        if len(tokens) != 10:
            raise AnnotationParseError(line_number, f"expected 10 fields, got {len(tokens)}")
        vertices = _parse_coordinates(tokens[:8], line_number)
        if not np.all(np.isfinite(vertices)):
            raise AnnotationParseError(line_number, "coordinates must be finite")
        if tokens[9] not in ('0', '1'):
            raise AnnotationParseError(line_number, f"difficult flag must be 0 or 1, got '{tokens[9]}'")
        quad = Polygon(vertices)
        try:
            min_area_obb(quad)
        except DegenerateGeometryError:
            raise AnnotationParseError(line_number, "quad has zero area")
        annotations.append(Annotation(quad, tokens[8], int(tokens[9])))
    return annotations


def _format_number(value: float) -> str:
    text = f"{value:.3f}".rstrip('0').rstrip('.')
    return '0' if text in ('', '-0') else text


def format_annotations(annotations: Sequence[Annotation]) -> str:
    """Serialize annotations back to DOTA annotation text."""
    lines = []
    for a in annotations:
        coords = ' '.join(_format_number(v) for v in a.quad.flat())
        lines.append(f"{coords} {a.category} {a.difficult}")
    return '\n'.join(lines) + ('\n' if lines else '')


def write_results(dets: Sequence[Detection], class_names: Sequence[str], image_id: str) -> Dict[str, List[str]]:
    """
    Result lines per class name for one image.

    Every class gets an entry, empty when it has no detections. Corners come
    from obb_corners; scores carry 6 decimals.
    """
    lines: Dict[str, List[str]] = {name: [] for name in class_names}
    for det in dets:
        if det.class_index >= len(class_names):
            raise ValueError(f"Class index {det.class_index} outside {len(class_names)} classes")
        coords = ' '.join(f"{v:.3f}" for v in obb_corners(det.obb).flat())
        lines[class_names[det.class_index]].append(f"{image_id} {det.score:.6f} {coords}")
    return lines


def parse_results(text: str, class_index: int) -> List[Tuple[str, Detection]]:
    """
    Parse one class's result file into (image_id, Detection) pairs.

    Quads are converted to boxes with min_area_obb.

    Raises:
        AnnotationParseError: on a malformed line
    """
    parsed = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        tokens = stripped.split()
        if len(tokens) != 10:
            raise AnnotationParseError(line_number, f"expected 10 fields, got {len(tokens)}")
        try:
            score = float(tokens[1])
        except ValueError:
            raise AnnotationParseError(line_number, f"non-numeric score '{tokens[1]}'")
        vertices = _parse_coordinates(tokens[2:], line_number)
        try:
            obb = min_area_obb(Polygon(vertices))
            det = Detection(obb, class_index, score)
        except ValueError as e:
            raise AnnotationParseError(line_number, str(e))
        parsed.append((tokens[0], det))
    return parsed


def result_filename(class_name: str) -> str:
    return RESULT_FILE_TEMPLATE.format(class_name)


def class_from_result_filename(filename: str) -> Optional[str]:
    """Class name encoded in a Task1_<class>.txt file name, or None."""
    prefix, suffix = RESULT_FILE_TEMPLATE.split('{}')
    if filename.startswith(prefix) and filename.endswith(suffix) and len(filename) > len(prefix) + len(suffix):
        return filename[len(prefix):-len(suffix)]
    return None
