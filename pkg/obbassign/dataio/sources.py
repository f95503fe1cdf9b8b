"""
Directory readers and writers for annotation and result files.
"""
import glob
import os
import sys
from typing import Dict, List, Mapping, Sequence

from ..postprocess import Detection
from .dota import Annotation, format_annotations, parse_dota, parse_results, result_filename


class AnnotationDirectory:
    """DOTA annotation files (<image_id>.txt) in a local directory."""

    def __init__(self, directory_path: str):
        self.directory_path = directory_path
        if not os.path.isdir(directory_path):
            raise ValueError(f"Invalid directory path: {directory_path}")

    def list_files(self) -> List[str]:
        """All .txt files, sorted."""
        pattern = os.path.join(self.directory_path, "*.txt")
        return sorted(os.path.basename(f) for f in glob.glob(pattern))

    def image_ids(self) -> List[str]:
        return [os.path.splitext(f)[0] for f in self.list_files()]

    def read(self, image_id: str) -> List[Annotation]:
        file_path = os.path.join(self.directory_path, f"{image_id}.txt")
        return read_annotation_file(file_path)

    def read_all(self) -> Dict[str, List[Annotation]]:
        return {image_id: self.read(image_id) for image_id in self.image_ids()}


def read_annotation_file(file_path: str) -> List[Annotation]:
    """Parse one annotation file; parse errors name the file."""
    with open(file_path, 'r', encoding='utf-8') as f:
        text = f.read()
    try:
        return parse_dota(text)
    except ValueError as e:
        raise ValueError(f"{file_path}: {e}") from e


def write_annotation_file(file_path: str, annotations: Sequence[Annotation]):
    with open(file_path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(format_annotations(annotations))


class ResultDirectory:
    """Per-class DOTA result files (Task1_<class>.txt) in a local directory."""

    def __init__(self, directory_path: str):
        self.directory_path = directory_path

    def read(self, class_names: Sequence[str]) -> Dict[str, List[Detection]]:
        """
        Detections grouped by image id.

        A missing class file counts as no detections for that class and is
        reported on stderr.
        """
        if not os.path.isdir(self.directory_path):
            raise ValueError(f"Invalid directory path: {self.directory_path}")
        by_image: Dict[str, List[Detection]] = {}
        for class_index, name in enumerate(class_names):
            file_path = os.path.join(self.directory_path, result_filename(name))
            if not os.path.exists(file_path):
                print(f"⚠️  No result file for class '{name}' ({file_path}); treating as empty", file=sys.stderr)
                continue
            with open(file_path, 'r', encoding='utf-8') as f:
                text = f.read()
            try:
                parsed = parse_results(text, class_index)
            except ValueError as e:
                raise ValueError(f"{file_path}: {e}") from e
            for image_id, det in parsed:
                by_image.setdefault(image_id, []).append(det)
        return by_image

    def write(self, lines_by_class: Mapping[str, Sequence[str]]):
        """Write one file per class; classes without lines get empty files."""
        os.makedirs(self.directory_path, exist_ok=True)
        for name in sorted(lines_by_class):
            file_path = os.path.join(self.directory_path, result_filename(name))
            with open(file_path, 'w', encoding='utf-8', newline='\n') as f:
                lines = lines_by_class[name]
                f.write('\n'.join(lines) + ('\n' if lines else ''))
