"""Shared fixtures-in-code and independent oracles for the test suite.

The oracles here are deliberately naive re-implementations (exhaustive
enumeration, brute-force recounts, finite differences) used to verify
the library's optimized implementations against first principles.
"""

from __future__ import annotations

import io
import itertools
import json
from pathlib import Path

import numpy as np
from PIL import Image

from reviewlens import ImageManifest, ImageRecord, bce_loss, head_forward, save_manifest


def make_png(seed: int = 0, size: int = 24, color: tuple[int, int, int] | None = None) -> bytes:
    """Small deterministic PNG; random noise unless a flat color is given."""
    if color is not None:
        arr = np.full((size, size, 3), color, dtype=np.uint8)
    else:
        rng = np.random.default_rng(seed)
        arr = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def make_image_dataset(
    root: Path,
    count: int,
    labels: list[str] | None = None,
    as_documents: bool = False,
    name: str = "fixture",
) -> ImageManifest:
    """Write `count` small PNGs under root and return a saved manifest.

    With as_documents=True each image becomes page 0 of its own
    document doc-<i>, which gives label-derived document ground truth.
    """
    root.mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(count):
        path = root / f"img-{i:03d}.png"
        path.write_bytes(make_png(seed=1000 + i))
        label = labels[i] if labels else "unlabeled"
        if as_documents:
            records.append(
                ImageRecord(id=f"img-{i:03d}", path=str(path), doc_id=f"doc-{i}",
                            page_index=0, label=label)
            )
        else:
            records.append(ImageRecord(id=f"img-{i:03d}", path=str(path), label=label))
    manifest = ImageManifest(name=name, images=tuple(records))
    save_manifest(manifest, root / "manifest.json")
    return manifest


# ---------------------------------------------------------------------------
# k-means oracle: exhaustive enumeration of all assignments


def exhaustive_kmeans_optimum(points: np.ndarray, k: int) -> float:
    """Globally optimal inertia by trying every assignment of n points
    to k clusters. Feasible only for tiny n and k."""
    n = points.shape[0]
    best = np.inf
    for assignment in itertools.product(range(k), repeat=n):
        if len(set(assignment)) != k:
            continue
        labels = np.asarray(assignment)
        inertia = 0.0
        for j in range(k):
            members = points[labels == j]
            centroid = members.mean(axis=0)
            inertia += float(((members - centroid) ** 2).sum())
        if inertia < best:
            best = inertia
    return best


# ---------------------------------------------------------------------------
# evaluation oracles: independent naive tallies


def naive_confusion(scores: dict[str, float], truth: dict[str, int], cutoff: float):
    """Four plain counters, no shared code with the library."""
    tp = fp = fn = tn = 0
    for item_id, score in scores.items():
        positive = score >= cutoff
        actual = truth[item_id]
        if positive and actual == 1:
            tp += 1
        elif positive and actual == 0:
            fp += 1
        elif not positive and actual == 1:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def naive_metrics(tp: int, fp: int, fn: int, tn: int):
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    total = tp + fp + fn + tn
    accuracy = (tp + tn) / total if total else 0.0
    return precision, recall, f1, accuracy


def random_score_dataset(rng: np.random.Generator, n: int | None = None):
    """Random scored items with 0/1 truth; scores may tie deliberately."""
    if n is None:
        n = int(rng.integers(1, 40))
    ids = [f"item-{i}" for i in range(n)]
    # coarse grid makes score ties common, exercising the >= boundary
    scores = {i: float(rng.integers(0, 11)) / 10.0 for i in ids}
    truth = {i: int(rng.integers(0, 2)) for i in ids}
    return scores, truth


# ---------------------------------------------------------------------------
# head-trainer oracle: central finite differences


def finite_difference_check(
    params, x: np.ndarray, y: np.ndarray, grads, rng: np.random.Generator,
    w1_samples: int = 40, b1_samples: int = 16, step: float = 1e-3,
) -> float:
    """Max relative error between analytic gradients and central
    differences over all of layer 2 and a random sample of layer 1."""

    def loss_at(p):
        return bce_loss(head_forward(p, x), y)

    coords = []
    for i in range(params.w2.shape[0]):
        coords.append(("w2", (i, 0)))
    coords.append(("b2", (0,)))
    n_in, n_hidden = params.w1.shape
    for _ in range(w1_samples):
        coords.append(("w1", (int(rng.integers(n_in)), int(rng.integers(n_hidden)))))
    for _ in range(b1_samples):
        coords.append(("b1", (int(rng.integers(n_hidden)),)))

    worst = 0.0
    for name, index in coords:
        plus = params.copy()
        getattr(plus, name)[index] += step
        minus = params.copy()
        getattr(minus, name)[index] -= step
        numeric = (loss_at(plus) - loss_at(minus)) / (2 * step)
        analytic = getattr(grads, name)[index]
        scale = max(abs(numeric), abs(analytic), 1e-8)
        worst = max(worst, abs(numeric - analytic) / scale)
    return worst


# ---------------------------------------------------------------------------
# detection fixtures


def make_voc_xml(
    filename: str,
    width: int,
    height: int,
    objects: list[tuple[str, int, int, int, int]],
    extra_elements: bool = False,
) -> bytes:
    parts = ["<annotation>"]
    if extra_elements:
        parts.append("<folder>ignored</folder><source><database>x</database></source>")
    parts.append(f"<filename>{filename}</filename>")
    parts.append(f"<size><width>{width}</width><height>{height}</height><depth>3</depth></size>")
    for name, xmin, ymin, xmax, ymax in objects:
        parts.append(
            f"<object><name>{name}</name><pose>Unspecified</pose>"
            f"<bndbox><xmin>{xmin}</xmin><ymin>{ymin}</ymin>"
            f"<xmax>{xmax}</xmax><ymax>{ymax}</ymax></bndbox></object>"
        )
    parts.append("</annotation>")
    return "".join(parts).encode("utf-8")


def random_voc_annotation(rng: np.random.Generator):
    """Random but always-valid annotation fixture as (xml bytes, field tuple)."""
    width = int(rng.integers(50, 2000))
    height = int(rng.integers(50, 2000))
    objects = []
    for _ in range(int(rng.integers(0, 5))):
        xmin = int(rng.integers(0, width - 1))
        xmax = int(rng.integers(xmin + 1, width + 1))
        ymin = int(rng.integers(0, height - 1))
        ymax = int(rng.integers(ymin + 1, height + 1))
        name = rng.choice(["handwriting", "signature", "stamp"])
        objects.append((str(name), xmin, ymin, xmax, ymax))
    filename = f"img-{int(rng.integers(0, 10_000_000)):07d}.png"
    return make_voc_xml(filename, width, height, objects), (filename, width, height, objects)


def random_document_detections(rng: np.random.Generator, doc_id: str) -> dict:
    """Random import-format document; page indexes distinct by construction."""
    page_count = int(rng.integers(1, 6))
    pages = []
    for page_index in range(page_count):
        if rng.random() < 0.2:
            continue  # document with gaps in reported pages is still valid
        detections = []
        for _ in range(int(rng.integers(0, 4))):
            x0 = float(rng.uniform(0, 0.8))
            y0 = float(rng.uniform(0, 0.8))
            detections.append(
                {
                    "score": float(rng.uniform(0, 1)),
                    "box": [x0, y0, float(rng.uniform(x0 + 0.01, 1.0)),
                            float(rng.uniform(y0 + 0.01, 1.0))],
                    "class": "handwriting",
                }
            )
        pages.append({"page_index": page_index, "detections": detections})
    return {"doc_id": doc_id, "page_count": page_count, "pages": pages}


def write_json(path: Path, payload) -> Path:
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path
