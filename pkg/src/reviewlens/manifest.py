"""Corpus manifests and label management.

A manifest is an ordered catalog of images, optionally grouped into
documents by (doc_id, page_index). Manifests are immutable values:
mutating operations return a new manifest. Labels are additionally
persisted to an append-only newline-delimited JSON journal whose replay
order defines the current labels.

Wire formats:
  manifest JSON   {"name": str, "images": [{"id", "path", "doc_id"?,
                   "page_index"?, "label"}]}
  label journal   one JSON object per line:
                  {"ts": iso8601, "image_id": str, "label": str}
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator

from .errors import ManifestError, NotFoundError, ValidationError

LABELS = ("positive", "negative", "unlabeled")

# Journal appends are single-writer per file; writers in this process
# serialize on a per-path lock.
_journal_locks: dict[str, threading.Lock] = {}
_journal_locks_guard = threading.Lock()


def _journal_lock(path: str | Path) -> threading.Lock:
    key = str(Path(path).resolve())
    with _journal_locks_guard:
        return _journal_locks.setdefault(key, threading.Lock())


@dataclass(frozen=True)
class ImageRecord:
    """One image in a corpus, optionally a page of a document."""

    id: str
    path: str
    doc_id: str | None = None
    page_index: int | None = None
    label: str = "unlabeled"

    def __post_init__(self) -> None:
        if not self.id:
            raise ManifestError("image record has an empty id")
        if self.label not in LABELS:
            raise ValidationError(
                f"record {self.id!r}: label must be one of {LABELS}, got {self.label!r}"
            )
        # page_index is present iff doc_id is present
        if (self.doc_id is None) != (self.page_index is None):
            raise ManifestError(
                f"record {self.id!r}: doc_id and page_index must be present together"
            )
        if self.page_index is not None and self.page_index < 0:
            raise ManifestError(f"record {self.id!r}: page_index must be >= 0")

    def to_json(self) -> dict:
        doc: dict = {"id": self.id, "path": self.path}
        if self.doc_id is not None:
            doc["doc_id"] = self.doc_id
            doc["page_index"] = self.page_index
        doc["label"] = self.label
        return doc

    @classmethod
    def from_json(cls, raw: dict) -> "ImageRecord":
        if not isinstance(raw, dict):
            raise ManifestError(f"image record must be an object, got {type(raw).__name__}")
        unknown_ok = {"id", "path", "doc_id", "page_index", "label"}
        missing = {"id", "path"} - raw.keys()
        if missing:
            raise ManifestError(f"image record missing field(s): {sorted(missing)}")
        extra = raw.keys() - unknown_ok
        if extra:
            raise ManifestError(f"image record has unknown field(s): {sorted(extra)}")
        return cls(
            id=str(raw["id"]),
            path=str(raw["path"]),
            doc_id=None if raw.get("doc_id") is None else str(raw["doc_id"]),
            page_index=None if raw.get("page_index") is None else int(raw["page_index"]),
            label=str(raw.get("label", "unlabeled")),
        )


@dataclass(frozen=True)
class ImageManifest:
    """Ordered, validated collection of ImageRecords."""

    name: str
    images: tuple[ImageRecord, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        pages: dict[str, set[int]] = {}
        for rec in self.images:
            if rec.id in seen:
                raise ManifestError(f"duplicate image id {rec.id!r}")
            seen.add(rec.id)
            if rec.doc_id is not None:
                doc_pages = pages.setdefault(rec.doc_id, set())
                if rec.page_index in doc_pages:
                    raise ManifestError(
                        f"document {rec.doc_id!r}: duplicate page_index {rec.page_index}"
                    )
                doc_pages.add(rec.page_index)  # type: ignore[arg-type]

    def __len__(self) -> int:
        return len(self.images)

    def __iter__(self) -> Iterator[ImageRecord]:
        return iter(self.images)

    def ids(self) -> tuple[str, ...]:
        return tuple(rec.id for rec in self.images)

    def get(self, image_id: str) -> ImageRecord:
        for rec in self.images:
            if rec.id == image_id:
                return rec
        raise NotFoundError(f"image id {image_id!r} not in manifest {self.name!r}")

    def __contains__(self, image_id: str) -> bool:
        return any(rec.id == image_id for rec in self.images)

    def documents(self) -> dict[str, list[ImageRecord]]:
        """Pages grouped by doc_id, each group sorted by page_index."""
        docs: dict[str, list[ImageRecord]] = {}
        for rec in self.images:
            if rec.doc_id is not None:
                docs.setdefault(rec.doc_id, []).append(rec)
        for recs in docs.values():
            recs.sort(key=lambda r: r.page_index)  # type: ignore[arg-type, return-value]
        return docs

    def with_records(self, records: Iterable[ImageRecord]) -> "ImageManifest":
        return ImageManifest(name=self.name, images=self.images + tuple(records))

    def to_json(self) -> dict:
        return {"name": self.name, "images": [rec.to_json() for rec in self.images]}


def document_truth(manifest: ImageManifest) -> dict[str, int]:
    """Per-document 0/1 truth from page labels: a document is positive
    iff any of its pages is labeled positive; documents with no labeled
    page carry no truth entry."""
    truth: dict[str, int] = {}
    for doc_id, pages in manifest.documents().items():
        labeled = [rec.label for rec in pages if rec.label != "unlabeled"]
        if not labeled:
            continue
        truth[doc_id] = 1 if any(label == "positive" for label in labeled) else 0
    return truth


def load_manifest(path: str | Path) -> ImageManifest:
    """Load and validate a manifest JSON file. Image files are not opened."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path}: invalid JSON: {exc}") from exc
    return manifest_from_json(raw, source=str(path))


def manifest_from_json(raw: dict, source: str = "<memory>") -> ImageManifest:
    if not isinstance(raw, dict) or "images" not in raw:
        raise ManifestError(f"manifest {source}: expected an object with an 'images' list")
    if not isinstance(raw["images"], list):
        raise ManifestError(f"manifest {source}: 'images' must be a list")
    records = []
    for i, entry in enumerate(raw["images"]):
        try:
            records.append(ImageRecord.from_json(entry))
        except (ManifestError, ValidationError, ValueError, TypeError) as exc:
            raise ManifestError(f"manifest {source}: record {i}: {exc}") from exc
    return ImageManifest(name=str(raw.get("name", "")), images=tuple(records))


def save_manifest(manifest: ImageManifest, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(manifest.to_json(), indent=2) + "\n", encoding="utf-8"
    )


def apply_label(
    manifest: ImageManifest,
    image_id: str,
    label: str,
    journal_path: str | Path | None = None,
) -> ImageManifest:
    """Return a manifest with one record relabeled; append to the journal.

    The journal entry is appended even when the label value is unchanged,
    so the journal is a complete audit trail.
    """
    if label not in LABELS:
        raise ValidationError(f"label must be one of {LABELS}, got {label!r}")
    index = None
    for i, rec in enumerate(manifest.images):
        if rec.id == image_id:
            index = i
            break
    if index is None:
        raise NotFoundError(f"image id {image_id!r} not in manifest {manifest.name!r}")
    images = list(manifest.images)
    images[index] = replace(images[index], label=label)
    if journal_path is not None:
        append_journal_entry(journal_path, image_id, label)
    return ImageManifest(name=manifest.name, images=tuple(images))


def append_journal_entry(
    journal_path: str | Path, image_id: str, label: str, ts: str | None = None
) -> None:
    entry = {
        "ts": ts or datetime.now(timezone.utc).isoformat(),
        "image_id": image_id,
        "label": label,
    }
    line = json.dumps(entry) + "\n"
    with _journal_lock(journal_path):
        with open(journal_path, "a", encoding="utf-8") as fp:
            fp.write(line)


def read_journal(journal_path: str | Path) -> list[dict]:
    entries = []
    text = Path(journal_path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"journal {journal_path}: line {lineno}: {exc}") from exc
        for field in ("ts", "image_id", "label"):
            if field not in entry:
                raise ManifestError(
                    f"journal {journal_path}: line {lineno}: missing {field!r}"
                )
        entries.append(entry)
    return entries


def replay_journal(manifest: ImageManifest, journal_path: str | Path) -> ImageManifest:
    """Apply journal entries in order; replay order defines current labels.

    Entries for ids not in the manifest are ignored (the journal may
    outlive records removed from a manifest).
    """
    current = {rec.id: rec.label for rec in manifest.images}
    for entry in read_journal(journal_path):
        if entry["image_id"] in current:
            if entry["label"] not in LABELS:
                raise ValidationError(
                    f"journal {journal_path}: invalid label {entry['label']!r}"
                )
            current[entry["image_id"]] = entry["label"]
    images = tuple(
        replace(rec, label=current[rec.id]) if rec.label != current[rec.id] else rec
        for rec in manifest.images
    )
    return ImageManifest(name=manifest.name, images=images)
