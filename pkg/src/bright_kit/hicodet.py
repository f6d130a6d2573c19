"""Import adapters for the public HICO-DET annotation distribution.

Two inputs are understood:

* the official interaction list text file (``hico_list_hoi.txt``), giving the
  600 (id, object, verb) rows, which becomes a :class:`Vocabulary`;
* the community JSON dumps (``trainval_hico.json`` / ``test_hico.json``):
  a JSON array of records with ``file_name``, an ``annotations`` array of
  ``{"bbox": [x1,y1,x2,y2], "category_id": ...}`` boxes, and an
  ``hoi_annotation`` array of ``{"subject_id", "object_id",
  "hoi_category_id"}`` links, which becomes a :class:`Dataset` in the
  toolkit's canonical schema.

Object names in the official list use underscores (``dining_table``); they
are normalized to spaces so vocabularies from different sources compare by
name.  Verb tokens keep their underscores (``sit_on``).
"""

from __future__ import annotations

import math
from pathlib import Path

from .errors import AnnotationFormatError, UnknownClassError
from .jsonio import read_json
from .model import (
    BBox,
    Dataset,
    HoiClass,
    HoiInstance,
    ImageRecord,
    Vocabulary,
)


def vocabulary_from_hico_list(path: str | Path) -> Vocabulary:
    """Parse the official interaction list into a vocabulary.

    Expected rows: ``<id> <object> <verb>`` separated by whitespace; header
    and separator lines are skipped.  Verb/object ids are assigned
    alphabetically; cross-vocabulary identity is by name, so the assignment
    scheme does not need to match any external convention.
    """
    rows: list[tuple[int, str, str]] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        parts = line.split()
        if len(parts) != 3:
            continue
        token_id, obj, verb = parts
        if not token_id.isdigit():
            continue
        rows.append((int(token_id), obj.replace("_", " "), verb))
    if not rows:
        raise AnnotationFormatError(f"{path}: no interaction rows found")
    verb_ids = {v: i + 1 for i, v in enumerate(sorted({verb for _, _, verb in rows}))}
    obj_ids = {o: i + 1 for i, o in enumerate(sorted({obj for _, obj, _ in rows}))}
    return Vocabulary(
        HoiClass(cid, verb_ids[verb], obj_ids[obj], verb, obj)
        for cid, obj, verb in sorted(rows)
    )


def _canvas_size(entry: dict, boxes: list[list[float]]) -> tuple[int, int]:
    width = entry.get("width")
    height = entry.get("height")
    if width and height:
        return int(width), int(height)
    # Size absent from the dump: use the tightest canvas covering all boxes.
    max_x = max((b[2] for b in boxes), default=1.0)
    max_y = max((b[3] for b in boxes), default=1.0)
    return max(1, math.ceil(max_x)), max(1, math.ceil(max_y))


def convert_hicodet_json(
    path: str | Path, vocab: Vocabulary, on_unknown: str = "error"
) -> Dataset:
    """Convert a community-format HICO-DET dump into a canonical Dataset.

    ``on_unknown`` decides what happens to interactions whose
    ``hoi_category_id`` is outside ``vocab``: ``"error"`` rejects the file,
    ``"skip"`` drops them (useful when importing directly against a class
    subset).  All imported instances carry ``real`` provenance.
    """
    if on_unknown not in ("error", "skip"):
        raise AnnotationFormatError(f"on_unknown must be 'error' or 'skip', got {on_unknown!r}")
    raw = read_json(path)
    if not isinstance(raw, list):
        raise AnnotationFormatError(f"{path}: expected a JSON array of image records")

    records = []
    for i, entry in enumerate(raw):
        where = f"{path}: record {i}"
        try:
            file_name = str(entry["file_name"])
            annotations = entry.get("annotations", [])
            hois = entry.get("hoi_annotation", [])
        except (KeyError, TypeError) as exc:
            raise AnnotationFormatError(f"{where}: missing field ({exc})") from exc
        boxes = []
        for ann in annotations:
            box = ann.get("bbox")
            if not isinstance(box, (list, tuple)) or len(box) != 4:
                raise AnnotationFormatError(f"{where}: bad bbox {box!r}")
            boxes.append([float(v) for v in box])
        width, height = _canvas_size(entry, boxes)

        instances = []
        for j, hoi in enumerate(hois):
            hwhere = f"{where}.hoi_annotation[{j}]"
            try:
                subject_id = int(hoi["subject_id"])
                object_id = int(hoi["object_id"])
                class_id = int(hoi["hoi_category_id"])
            except (KeyError, TypeError, ValueError) as exc:
                raise AnnotationFormatError(
                    f"{hwhere}: need subject_id, object_id, hoi_category_id ({exc})"
                ) from exc
            if not (0 <= subject_id < len(boxes)) or not (0 <= object_id < len(boxes)):
                raise AnnotationFormatError(f"{hwhere}: box index out of range")
            if class_id not in vocab:
                if on_unknown == "skip":
                    continue
                raise UnknownClassError(f"{hwhere}: unknown hoi_category_id {class_id}")

            def clamp(b: list[float]) -> BBox:
                x1 = min(max(b[0], 0.0), float(width))
                y1 = min(max(b[1], 0.0), float(height))
                x2 = min(max(b[2], 0.0), float(width))
                y2 = min(max(b[3], 0.0), float(height))
                return BBox(x1, y1, x2, y2)

            instances.append(
                HoiInstance(
                    human_box=clamp(boxes[subject_id]),
                    object_box=clamp(boxes[object_id]),
                    class_id=class_id,
                    provenance="real",
                )
            )
        image_id = Path(file_name).stem
        records.append(ImageRecord(image_id, file_name, width, height, tuple(instances)))

    return Dataset(records, vocab, vocabulary_ref=str(path))
