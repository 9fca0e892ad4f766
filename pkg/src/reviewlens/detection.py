"""Handwriting-detection data preparation and score aggregation.

Preparation side: PascalVOC XML annotations parse into one tabular row
per bounding box, serialize to CSV (exact header
``filename,width,height,class,xmin,ymin,xmax,ymax``), and split into
train/test at the image level so no image's boxes leak across sides.

Inference side: per-page detections arrive either from a detector
adapter (a deterministic mock ships for offline use; an ONNX-session
adapter covers exported detectors) or from a detection-import JSON
file. A document's score is the maximum detection score across all its
pages, 0.0 when no page has any detection; classification is
score >= cutoff.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .errors import (
    BackboneError,
    ConfigError,
    DegenerateInputError,
    FormatError,
    ParseError,
    SchemaError,
    ValidationError,
)
from .manifest import ImageRecord

CSV_HEADER = ("filename", "width", "height", "class", "xmin", "ymin", "xmax", "ymax")


@dataclass(frozen=True)
class VocObject:
    class_name: str
    xmin: int
    ymin: int
    xmax: int
    ymax: int


@dataclass(frozen=True)
class VocAnnotation:
    filename: str
    width: int
    height: int
    objects: tuple[VocObject, ...]

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(
                f"{self.filename!r}: image size must be positive, got {self.width}x{self.height}"
            )
        for obj in self.objects:
            if not (0 <= obj.xmin < obj.xmax <= self.width):
                raise ValidationError(
                    f"{self.filename!r}: box x-range [{obj.xmin}, {obj.xmax}] invalid for width {self.width}"
                )
            if not (0 <= obj.ymin < obj.ymax <= self.height):
                raise ValidationError(
                    f"{self.filename!r}: box y-range [{obj.ymin}, {obj.ymax}] invalid for height {self.height}"
                )


@dataclass(frozen=True)
class AnnotationRow:
    filename: str
    width: int
    height: int
    class_name: str
    xmin: int
    ymin: int
    xmax: int
    ymax: int


@dataclass(frozen=True)
class Detection:
    score: float
    box: tuple[float, float, float, float]  # normalized [0,1] xmin,ymin,xmax,ymax
    class_name: str


@dataclass(frozen=True)
class PageDetections:
    page_index: int
    detections: tuple[Detection, ...]
    error: str | None = None  # set when the adapter failed on this page


@dataclass(frozen=True)
class DocumentDetections:
    doc_id: str
    pages: tuple[PageDetections, ...]
    page_count: int

    def __post_init__(self) -> None:
        seen: set[int] = set()
        for page in self.pages:
            if page.page_index in seen:
                raise ValidationError(
                    f"document {self.doc_id!r}: duplicate page_index {page.page_index}"
                )
            seen.add(page.page_index)
            if not 0 <= page.page_index < self.page_count:
                raise ValidationError(
                    f"document {self.doc_id!r}: page_index {page.page_index} "
                    f"outside page_count {self.page_count}"
                )

    def failed_pages(self) -> tuple[int, ...]:
        return tuple(p.page_index for p in self.pages if p.error is not None)


def _required_text(element: ET.Element, path: str, context: str) -> str:
    child = element.find(path)
    if child is None or child.text is None:
        raise SchemaError(f"{context}: missing required field {path!r}")
    return child.text.strip()


def _int_px(text: str, field: str, context: str) -> int:
    try:
        return int(float(text) + 0.5)
    except ValueError as exc:
        raise SchemaError(f"{context}: field {field!r} is not numeric: {text!r}") from exc


def parse_voc(xml_bytes: bytes) -> VocAnnotation:
    """Parse one PascalVOC annotation document. Unknown elements are
    ignored; missing required fields raise SchemaError naming the field."""
    try:
        root = ET.fromstring(xml_bytes)
    except ET.ParseError as exc:
        line, column = exc.position
        raise ParseError(f"malformed XML at line {line}, column {column}: {exc.msg}") from exc
    filename = _required_text(root, "filename", "annotation")
    context = f"annotation {filename!r}"
    width = _int_px(_required_text(root, "size/width", context), "size/width", context)
    height = _int_px(_required_text(root, "size/height", context), "size/height", context)
    objects = []
    for member in root.findall("object"):
        name = _required_text(member, "name", context)
        box = {
            field: _int_px(
                _required_text(member, f"bndbox/{field}", context), f"bndbox/{field}", context
            )
            for field in ("xmin", "ymin", "xmax", "ymax")
        }
        objects.append(VocObject(class_name=name, **box))
    return VocAnnotation(filename=filename, width=width, height=height, objects=tuple(objects))


def voc_to_rows(annotations: Iterable[VocAnnotation]) -> list[AnnotationRow]:
    """One row per object; annotation order then object order."""
    rows = []
    for ann in annotations:
        for obj in ann.objects:
            rows.append(
                AnnotationRow(
                    filename=ann.filename,
                    width=ann.width,
                    height=ann.height,
                    class_name=obj.class_name,
                    xmin=obj.xmin,
                    ymin=obj.ymin,
                    xmax=obj.xmax,
                    ymax=obj.ymax,
                )
            )
    return rows


def rows_to_csv(rows: Sequence[AnnotationRow], path: str | Path | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(
            [row.filename, row.width, row.height, row.class_name,
             row.xmin, row.ymin, row.xmax, row.ymax]
        )
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def rows_from_csv(source: str | Path) -> list[AnnotationRow]:
    """Parse annotation CSV text or a file path back into rows."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).exists()):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = str(source)
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("annotation CSV is empty") from None
    if tuple(header) != CSV_HEADER:
        raise FormatError(f"annotation CSV header {header} != {list(CSV_HEADER)}")
    rows = []
    for i, record in enumerate(reader):
        if not record:
            continue
        if len(record) != len(CSV_HEADER):
            raise FormatError(f"annotation CSV row {i}: expected {len(CSV_HEADER)} cells")
        try:
            rows.append(
                AnnotationRow(
                    filename=record[0],
                    width=int(record[1]),
                    height=int(record[2]),
                    class_name=record[3],
                    xmin=int(record[4]),
                    ymin=int(record[5]),
                    xmax=int(record[6]),
                    ymax=int(record[7]),
                )
            )
        except ValueError as exc:
            raise FormatError(f"annotation CSV row {i}: {exc}") from exc
    return rows


def split_rows(
    rows: Sequence[AnnotationRow], test_fraction: float, seed: int
) -> tuple[list[AnnotationRow], list[AnnotationRow]]:
    """Image-level split: all rows of one filename land on the same side.

    The test side receives round(test_fraction * distinct filenames)
    filenames, chosen by a seeded shuffle of the sorted filename list,
    so the split depends only on the filename set and the seed.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test_fraction must be in (0, 1), got {test_fraction}")
    if not rows:
        raise DegenerateInputError("cannot split an empty annotation table")
    filenames = sorted({row.filename for row in rows})
    rng = np.random.default_rng(seed)
    shuffled = list(filenames)
    rng.shuffle(shuffled)
    n_test = round(test_fraction * len(filenames))
    test_names = set(shuffled[:n_test])
    train = [row for row in rows if row.filename not in test_names]
    test = [row for row in rows if row.filename in test_names]
    return train, test


def write_split_manifests(
    train: Sequence[AnnotationRow], test: Sequence[AnnotationRow], outdir: str | Path
) -> tuple[Path, Path]:
    """Write train.txt / test.txt, one distinct filename per line in
    first-appearance order."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, side in (("train.txt", train), ("test.txt", test)):
        seen: list[str] = []
        for row in side:
            if row.filename not in seen:
                seen.append(row.filename)
        target = outdir / name
        target.write_text("".join(f"{fn}\n" for fn in seen), encoding="utf-8")
        paths.append(target)
    return paths[0], paths[1]


class DetectorAdapter(Protocol):
    """Anything that can score one page image."""

    def detect_page(self, page_bytes: bytes) -> list[Detection]: ...


class MockDetector:
    """Deterministic stand-in: detections derive from (page bytes, seed).

    Each page yields 0 to 3 detections whose scores and normalized boxes
    are a pure function of the content hash, so identical inputs always
    produce identical outputs.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed

    def detect_page(self, page_bytes: bytes) -> list[Detection]:
        digest = hashlib.sha256(page_bytes).digest()
        words = np.frombuffer(digest, dtype="<u8")
        rng = np.random.default_rng([self.seed & 0xFFFFFFFFFFFFFFFF, *words.tolist()])
        count = int(rng.integers(0, 4))
        detections = []
        for _ in range(count):
            score = float(rng.uniform(0.0, 1.0))
            x0, y0 = rng.uniform(0.0, 0.9, size=2)
            w, h = rng.uniform(0.05, 0.1, size=2)
            detections.append(
                Detection(
                    score=score,
                    box=(float(x0), float(y0), float(min(x0 + w, 1.0)), float(min(y0 + h, 1.0))),
                    class_name="handwriting",
                )
            )
        return detections


class OnnxDetector:
    """Adapter for an exported detection model (ONNX, post-NMS outputs).

    The session is expected to take one NHWC uint8 or float32 image and
    expose "scores", "boxes" (normalized xmin,ymin,xmax,ymax) and
    "classes" outputs, the usual shape of exported detector graphs.
    """

    def __init__(self, model_path: str, class_names: Mapping[int, str] | None = None):
        if not Path(model_path).exists():
            raise BackboneError(f"detector model file not found: {model_path!r}")
        try:
            import onnxruntime  # noqa: PLC0415  deferred: heavyweight optional dependency
        except ImportError as exc:
            raise BackboneError(
                "OnnxDetector requires the onnxruntime package (install extra 'onnx')"
            ) from exc
        self._session = onnxruntime.InferenceSession(
            model_path, providers=["CPUExecutionProvider"]
        )
        self._class_names = dict(class_names or {})

    def detect_page(self, page_bytes: bytes) -> list[Detection]:
        from .backbone import preprocess  # noqa: PLC0415  avoid import cycle at module load

        tensor = preprocess(page_bytes, "fc2_4096", means=(0.0, 0.0, 0.0))
        input_name = self._session.get_inputs()[0].name
        outputs = {out.name: out for out in self._session.get_outputs()}
        wanted = ["scores", "boxes", "classes"]
        if not all(name in outputs for name in wanted):
            raise BackboneError(
                f"detector model outputs {sorted(outputs)} do not include {wanted}"
            )
        scores, boxes, classes = self._session.run(wanted, {input_name: tensor[None, ...]})
        detections = []
        for score, box, cls in zip(
            np.ravel(scores), np.asarray(boxes).reshape(-1, 4), np.ravel(classes)
        ):
            name = self._class_names.get(int(cls), str(int(cls)))
            detections.append(
                Detection(score=float(score), box=tuple(float(v) for v in box), class_name=name)
            )
        return detections


def detect_document(
    pages: Sequence[ImageRecord], adapter: DetectorAdapter
) -> DocumentDetections:
    """Score every page of one document, in page order.

    A page the adapter fails on contributes no detections; the failure is
    recorded on that page's error field and the document stays usable.
    """
    if not pages:
        raise DegenerateInputError("detect_document needs at least one page record")
    doc_ids = {rec.doc_id for rec in pages}
    if len(doc_ids) != 1 or None in doc_ids:
        raise ValidationError(f"pages must share one doc_id, got {sorted(map(str, doc_ids))}")
    ordered = sorted(pages, key=lambda rec: rec.page_index)  # type: ignore[arg-type, return-value]
    results = []
    for rec in ordered:
        try:
            with open(rec.path, "rb") as fp:
                payload = fp.read()
            detections = adapter.detect_page(payload)
            for det in detections:
                _validate_detection(det, rec.doc_id, rec.page_index)  # type: ignore[arg-type]
            results.append(
                PageDetections(page_index=rec.page_index, detections=tuple(detections))  # type: ignore[arg-type]
            )
        except Exception as exc:  # per-page isolation is the contract
            results.append(
                PageDetections(page_index=rec.page_index, detections=(), error=str(exc))  # type: ignore[arg-type]
            )
    return DocumentDetections(
        doc_id=pages[0].doc_id,  # type: ignore[arg-type]
        pages=tuple(results),
        page_count=len(ordered),
    )


def _validate_detection(det: Detection, doc_id: str, page_index: int) -> None:
    where = f"document {doc_id!r} page {page_index}"
    if not 0.0 <= det.score <= 1.0:
        raise ValidationError(f"{where}: score {det.score} outside [0, 1]")
    x0, y0, x1, y1 = det.box
    if not (0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0):
        raise ValidationError(f"{where}: normalized box {det.box} must satisfy min < max in [0, 1]")


def import_detections(source: str | Path | dict) -> list[DocumentDetections]:
    """Load and validate a detection-import JSON file.

    Pages carrying pixel-space boxes must declare "width" and "height";
    their boxes are normalized on load. Scores outside [0, 1] and
    duplicate page indexes are rejected with the document and page named.
    """
    if isinstance(source, dict):
        raw = source
    else:
        try:
            raw = json.loads(Path(source).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"detection import {source}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("documents"), list):
        raise FormatError("detection import must be an object with a 'documents' list")
    documents = []
    for d, doc in enumerate(raw["documents"]):
        doc_id = doc.get("doc_id")
        if not doc_id:
            raise SchemaError(f"document {d}: missing doc_id")
        page_count = doc.get("page_count")
        if not isinstance(page_count, int) or page_count < 0:
            raise SchemaError(f"document {doc_id!r}: page_count must be a non-negative integer")
        pages = []
        for page in doc.get("pages", []):
            page_index = page.get("page_index")
            if not isinstance(page_index, int):
                raise SchemaError(f"document {doc_id!r}: page_index must be an integer")
            width, height = page.get("width"), page.get("height")
            detections = []
            for det in page.get("detections", []):
                score = det.get("score")
                if not isinstance(score, (int, float)) or not 0.0 <= score <= 1.0:
                    raise ValidationError(
                        f"document {doc_id!r} page {page_index}: score {score!r} outside [0, 1]"
                    )
                box = det.get("box")
                if not isinstance(box, list) or len(box) != 4:
                    raise SchemaError(
                        f"document {doc_id!r} page {page_index}: box must be [xmin,ymin,xmax,ymax]"
                    )
                x0, y0, x1, y1 = (float(v) for v in box)
                if width is not None and height is not None:
                    x0, x1 = x0 / width, x1 / width
                    y0, y1 = y0 / height, y1 / height
                elif max(x0, y0, x1, y1) > 1.0 or min(x0, y0, x1, y1) < 0.0:
                    raise ValidationError(
                        f"document {doc_id!r} page {page_index}: box {box} is outside [0, 1] "
                        "and the page declares no width/height to normalize by"
                    )
                parsed = Detection(
                    score=float(score),
                    box=(x0, y0, x1, y1),
                    class_name=str(det.get("class", "")),
                )
                _validate_detection(parsed, str(doc_id), page_index)
                detections.append(parsed)
            pages.append(PageDetections(page_index=page_index, detections=tuple(detections)))
        documents.append(
            DocumentDetections(doc_id=str(doc_id), pages=tuple(pages), page_count=page_count)
        )
    return documents


def detections_to_json(documents: Sequence[DocumentDetections]) -> dict:
    """Serialize documents back to the import schema (boxes normalized)."""
    return {
        "documents": [
            {
                "doc_id": doc.doc_id,
                "page_count": doc.page_count,
                "pages": [
                    {
                        "page_index": page.page_index,
                        "detections": [
                            {
                                "score": det.score,
                                "box": list(det.box),
                                "class": det.class_name,
                            }
                            for det in page.detections
                        ],
                    }
                    for page in doc.pages
                ],
            }
            for doc in documents
        ]
    }


def document_score(doc: DocumentDetections) -> float:
    """Maximum detection score across all pages; 0.0 with no detections."""
    best = 0.0
    for page in doc.pages:
        for det in page.detections:
            if det.score > best:
                best = det.score
    return best


def classify_documents(
    scores: Mapping[str, float], cutoff: float
) -> dict[str, str]:
    """positive iff score >= cutoff (closed boundary)."""
    if not 0.0 <= cutoff <= 1.0:
        raise ConfigError(f"cutoff must be in [0, 1], got {cutoff}")
    return {
        doc_id: ("positive" if score >= cutoff else "negative")
        for doc_id, score in scores.items()
    }
