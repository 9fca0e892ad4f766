"""
Handwriting triage: from annotations to a cutoff decision
=========================================================

Follows the detection workflow end to end: PascalVOC annotation files
become one training CSV with a filename-atomic train/test split, a
detector scores every page of a small document population, each
document inherits its maximum detection score, and a threshold table
plus PR curve show what any cutoff would trade away.

The detector here is the deterministic offline mock; the flow is
identical with a real model behind the same adapter protocol.
"""

import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from reviewlens.detection import (
    MockDetector,
    classify_documents,
    detect_document,
    detections_to_json,
    document_score,
    import_detections,
    parse_voc,
    rows_to_csv,
    split_rows,
    voc_to_rows,
)
from reviewlens.evaluation import emit_report, pr_curve, threshold_table
from reviewlens.manifest import ImageRecord

workdir = Path(tempfile.mkdtemp(prefix="reviewlens-triage-"))
print(f"working in {workdir}")

# --- 1. PascalVOC annotations -> one training CSV -------------------
VOC_TEMPLATE = """<annotation>
  <filename>{name}</filename>
  <size><width>{w}</width><height>{h}</height><depth>3</depth></size>
  {objects}
</annotation>"""
OBJECT_TEMPLATE = """<object>
    <name>handwriting</name>
    <bndbox><xmin>{x0}</xmin><ymin>{y0}</ymin><xmax>{x1}</xmax><ymax>{y1}</ymax></bndbox>
  </object>"""

rng = np.random.default_rng(5)
annotations = []
for i in range(10):
    boxes = "\n  ".join(
        OBJECT_TEMPLATE.format(x0=x, y0=x + 5, x1=x + 40, y1=x + 60)
        for x in rng.integers(0, 500, size=rng.integers(1, 4))
    )
    xml = VOC_TEMPLATE.format(name=f"scan-{i:02d}.png", w=600, h=800, objects=boxes)
    annotations.append(parse_voc(xml.encode()))

rows = voc_to_rows(annotations)
csv_path = workdir / "boxes.csv"
rows_to_csv(rows, csv_path)
print(f"{len(rows)} annotated boxes from {len(annotations)} files -> {csv_path.name}")

train, test = split_rows(rows, test_fraction=0.2, seed=0)
train_files = {row.filename for row in train}
test_files = {row.filename for row in test}
print(f"split: {len(train_files)} train files / {len(test_files)} test files, "
      f"overlap {sorted(train_files & test_files)}")

# --- 2. score every page of a document population --------------------
detector = MockDetector(seed=1)
documents = []
for d in range(8):
    pages = []
    for p in range(int(rng.integers(1, 4))):
        pixels = rng.integers(0, 256, size=(24, 24, 3), dtype=np.uint8)
        path = workdir / f"doc-{d}-page-{p}.png"
        Image.fromarray(pixels).save(path)
        pages.append(ImageRecord(id=f"doc-{d}/p{p}", path=str(path),
                                 doc_id=f"doc-{d}", page_index=p))
    documents.append(detect_document(pages, detector))

scores = {doc.doc_id: document_score(doc) for doc in documents}
for doc in documents:
    detections = sum(len(page.detections) for page in doc.pages)
    print(f"{doc.doc_id}: {doc.page_count} pages, {detections} detections, "
          f"score {scores[doc.doc_id]:.3f}")

# detections serialize to the exchange format and back unchanged
payload = detections_to_json(documents)
reloaded = import_detections(payload)
print(f"serialization round trip intact: "
      f"{ {d.doc_id: document_score(d) for d in reloaded} == scores }")

# --- 3. pick a cutoff with a threshold table --------------------------
# pretend reviewer verdicts for the population
truth = {doc_id: int(rng.random() < 0.5 or score > 0.9)
         for doc_id, score in scores.items()}
print(f"reviewed verdicts: {truth}")

table = threshold_table(scores, truth, [0.1, 0.5, 0.9, 0.99])
print("cutoff  precision  recall  f1     accuracy")
for row in table:
    print(f"{row.cutoff:<7} {row.precision:<10.3f} {row.recall:<7.3f} "
          f"{row.f1:<6.3f} {row.accuracy:.3f}")

verdicts = classify_documents(scores, cutoff=0.5)
flagged = sorted(d for d, v in verdicts.items() if v == "positive")
print(f"documents flagged at cutoff 0.5: {flagged}")

# --- 4. the full report as a data file --------------------------------
curve = pr_curve(scores, truth)
report_path = workdir / "report.json"
emit_report(table, curve, "json", dataset="triage-demo", n=len(scores),
            positives=sum(truth.values()), path=report_path)
print(f"wrote {report_path} with {len(curve)} PR points")
