"""Command-line front end.

Every subcommand is a thin adapter over one library operation, so CLI
runs and direct library calls produce identical artifacts. Exit codes:
0 success, 1 domain failure (single line `error: ...` on stderr),
2 usage error. Randomized subcommands take --seed and are reproducible.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path, PurePosixPath

import numpy as np

from . import backbone as backbone_mod
from . import clustering as clustering_mod
from . import detection as detection_mod
from . import evaluation as evaluation_mod
from . import head as head_mod
from . import manifest as manifest_mod
from . import rasterize as rasterize_mod
from .config import load_config, resolve_setting
from .errors import NotFoundError, ReviewLensError
from .feature_store import feature_store_read, feature_store_write

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".gif", ".tif", ".tiff")
DEFAULT_PORT = 8710

# rasterizer output convention: one directory per document, page-<n>.<ext>
PAGE_STEM = re.compile(r"^page-(\d+)$")


def _page_identity(relative_id: str) -> tuple[str | None, int | None]:
    """Document grouping for files laid out like rasterizer output.

    A file in a subdirectory whose stem is page-<n> belongs to the
    document named by its directory path; anything else stays ungrouped.
    """
    rel = PurePosixPath(relative_id)
    if len(rel.parts) < 2:
        return None, None
    match = PAGE_STEM.match(rel.stem)
    if match is None:
        return None, None
    return rel.parent.as_posix(), int(match.group(1))


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _non_negative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return value


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must be in (0, 1), got {text}")
    return value


def _unit_interval(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must be in [0, 1], got {text}")
    return value


def _cutoff_list(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cutoffs must be comma-separated reals: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("cutoffs list is empty")
    for value in values:
        if not 0.0 <= value <= 1.0:
            raise argparse.ArgumentTypeError(f"cutoff {value} outside [0, 1]")
    return values


def _means_triple(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"means must be r,g,b: {text!r}")
    return tuple(float(p) for p in parts)  # type: ignore[return-value]


def _write_json(payload: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _build_adapter(args: argparse.Namespace) -> backbone_mod.BackboneAdapter:
    config = load_config(getattr(args, "config", None))
    kind = resolve_setting(args.backbone, config, "backbone", "kind", default="mock")
    model_path = resolve_setting(args.model_path, config, "backbone", "model_path")
    batch_size = resolve_setting(
        args.batch_size, config, "backbone", "batch_size", default=16, cast=int
    )
    means = resolve_setting(
        args.means, config, "backbone", "means",
        default=backbone_mod.DEFAULT_MEANS, cast=_means_triple,
    )
    return backbone_mod.BackboneAdapter(
        kind=kind,
        model_path=model_path,
        means=tuple(float(m) for m in means),  # type: ignore[arg-type]
        batch_size=int(batch_size),
        seed=args.seed,
    )


def _cmd_ingest(args: argparse.Namespace) -> int:
    root = Path(args.images)
    if not root.is_dir():
        raise NotFoundError(f"image directory not found: {root}")
    paths = sorted(
        (p for p in root.rglob("*") if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file()),
        key=lambda p: p.relative_to(root).as_posix(),
    )
    records = []
    for p in paths:
        relative_id = p.relative_to(root).as_posix()
        doc_id, page_index = _page_identity(relative_id)
        records.append(
            manifest_mod.ImageRecord(
                id=relative_id, path=str(p), doc_id=doc_id, page_index=page_index
            )
        )
    records = tuple(records)
    name = args.name or root.name
    manifest = manifest_mod.ImageManifest(name=name, images=records)
    manifest_mod.save_manifest(manifest, args.out)
    print(f"ingested {len(records)} images into {args.out}")
    return 0


def _cmd_rasterize(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    dpi = resolve_setting(args.dpi, config, "rasterize", "dpi",
                          default=rasterize_mod.DEFAULT_DPI, cast=int)
    raster_config = rasterize_mod.RasterizeConfig(output_dir=args.outdir, dpi=int(dpi))
    records = rasterize_mod.rasterize_document(args.doc, raster_config, doc_id=args.doc_id)
    manifest_path = Path(args.manifest)
    if manifest_path.exists():
        manifest = manifest_mod.load_manifest(manifest_path)
    else:
        manifest = manifest_mod.ImageManifest(name=manifest_path.stem, images=())
    manifest = manifest.with_records(records)
    manifest_mod.save_manifest(manifest, manifest_path)
    print(f"rasterized {len(records)} pages of {args.doc} into {args.manifest}")
    return 0


def _cmd_extract(args: argparse.Namespace) -> int:
    manifest = manifest_mod.load_manifest(args.manifest)
    adapter = _build_adapter(args)
    mode = backbone_mod.canonical_mode(args.mode)
    ids, matrix = backbone_mod.extract_for_manifest(manifest, adapter, mode)
    feature_store_write(list(ids), matrix, args.out)
    print(f"extracted {matrix.shape[0]} vectors of dim {matrix.shape[1]} to {args.out}")
    return 0


def _cmd_cluster(args: argparse.Namespace) -> int:
    ids, matrix = feature_store_read(args.features)
    config = clustering_mod.ClusterConfig(
        k=args.k,
        restarts=args.restarts,
        max_iterations=args.max_iterations,
        tolerance=args.tolerance,
        seed=args.seed,
    )
    model = clustering_mod.kmeans_fit(matrix, config, point_ids=ids)
    if args.manifest:
        manifest = manifest_mod.load_manifest(args.manifest)
    else:
        manifest = manifest_mod.ImageManifest(
            name="features",
            images=tuple(manifest_mod.ImageRecord(id=i, path="") for i in ids),
        )
    gallery = clustering_mod.export_cluster_gallery(model, manifest)
    _write_json(gallery, args.out)
    print(f"clustered {matrix.shape[0]} points into k={args.k}, inertia {model.inertia:.6f}")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    ids, matrix = feature_store_read(args.features)
    manifest = manifest_mod.load_manifest(args.manifest)
    index = {image_id: row for row, image_id in enumerate(ids)}
    rows = []
    labels = []
    for record in manifest:
        if record.label == "unlabeled":
            continue
        if record.id not in index:
            raise NotFoundError(f"labeled image {record.id!r} has no feature vector")
        rows.append(index[record.id])
        labels.append(1 if record.label == "positive" else 0)
    features = matrix[rows].astype(np.float64) if rows else np.empty((0, 0))
    config = head_mod.TrainConfig(
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        optimizer=args.optimizer,
        momentum=args.momentum,
        validation_fraction=args.validation_fraction,
    )
    params, history = head_mod.train_head(features, np.asarray(labels, dtype=np.float64), config)
    metrics = {
        "epochs": len(history),
        "final_train_loss": history[-1].train_loss if history else None,
        "validation_accuracy": history[-1].validation_accuracy if history else None,
        "history": [
            {
                "train_loss": e.train_loss,
                "validation_loss": e.validation_loss,
                "validation_accuracy": e.validation_accuracy,
            }
            for e in history
        ],
    }
    head_mod.save_head(args.out, params, config=config, metrics=metrics)
    print(f"trained on {len(rows)} labeled images for {len(history)} epochs to {args.out}")
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    params, _ = head_mod.load_head(args.model)
    ids, matrix = feature_store_read(args.features)
    labels01, probs = head_mod.predict(params, matrix.astype(np.float64), cutoff=args.cutoff)
    payload = {
        "cutoff": args.cutoff,
        "predictions": [
            {
                "id": image_id,
                "probability": float(p),
                "label": "positive" if bit else "negative",
            }
            for image_id, p, bit in zip(ids, probs, labels01)
        ],
    }
    _write_json(payload, args.out)
    print(f"scored {len(ids)} images to {args.out}")
    return 0


def _cmd_voc_convert(args: argparse.Namespace) -> int:
    xml_dir = Path(args.xml_dir)
    if not xml_dir.is_dir():
        raise NotFoundError(f"annotation directory not found: {xml_dir}")
    files = sorted(xml_dir.glob("*.xml"))
    annotations = [detection_mod.parse_voc(path.read_bytes()) for path in files]
    rows = detection_mod.voc_to_rows(annotations)
    detection_mod.rows_to_csv(rows, args.out)
    print(f"converted {len(rows)} boxes from {len(files)} files to {args.out}")
    return 0


def _cmd_split(args: argparse.Namespace) -> int:
    rows = detection_mod.rows_from_csv(Path(args.csv))
    train, test = detection_mod.split_rows(rows, args.test_fraction, args.seed)
    outdir = Path(args.outdir)
    detection_mod.write_split_manifests(train, test, outdir)
    detection_mod.rows_to_csv(train, outdir / "train.csv")
    detection_mod.rows_to_csv(test, outdir / "test.csv")
    print(f"split {len(rows)} rows into {len(train)} train / {len(test)} test in {outdir}")
    return 0


def _cmd_import_detections(args: argparse.Namespace) -> int:
    documents = detection_mod.import_detections(args.file)
    if args.out:
        _write_json(detection_mod.detections_to_json(documents), args.out)
    print(f"imported {len(documents)} documents")
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    documents = detection_mod.import_detections(args.detections)
    scores = {doc.doc_id: detection_mod.document_score(doc) for doc in documents}
    _write_json(scores, args.out)
    print(f"scored {len(scores)} documents to {args.out}")
    return 0


def _load_truth(path: str | Path) -> dict[str, int]:
    """Accept either a manifest (documents labeled through their pages)
    or a flat {"id": 0|1} mapping."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(raw, dict) and "images" in raw and "name" in raw:
        manifest = manifest_mod.manifest_from_json(raw, source=str(path))
        return manifest_mod.document_truth(manifest)
    if not isinstance(raw, dict):
        raise ReviewLensError(f"truth file {path} must be a JSON object")
    return {str(key): int(value) for key, value in raw.items()}


def _cmd_evaluate(args: argparse.Namespace) -> int:
    scores_raw = json.loads(Path(args.scores).read_text(encoding="utf-8"))
    if not isinstance(scores_raw, dict):
        raise ReviewLensError(f"scores file {args.scores} must be a JSON object")
    scores = {str(key): float(value) for key, value in scores_raw.items()}
    truth = _load_truth(args.truth)
    rows = evaluation_mod.threshold_table(scores, truth, args.cutoffs)
    curve = evaluation_mod.pr_curve(scores, truth) if args.format == "json" else []
    positives = sum(1 for item_id in scores if truth.get(item_id) == 1)
    text = evaluation_mod.emit_report(
        rows,
        curve,
        args.format,
        dataset=args.dataset,
        n=len(scores),
        positives=positives,
        path=args.out,
    )
    if args.out:
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn  # noqa: PLC0415  deferred: heavyweight, serve-only

    from .service import create_app  # noqa: PLC0415  avoid FastAPI import for other commands

    config = load_config(args.config)
    port = resolve_setting(args.port, config, "service", "port", default=DEFAULT_PORT, cast=int)
    state_dir = resolve_setting(
        args.state_dir, config, "service", "state_dir", default="reviewlens-state"
    )
    app = create_app(state_dir=str(state_dir))
    uvicorn.run(app, host=args.host, port=int(port))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reviewlens",
        description="Image analytics for document review: features, clustering, "
        "classification, detection scoring and evaluation.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="subcommand")

    p = sub.add_parser("ingest", help="build a manifest from a directory of images")
    p.add_argument("--images", required=True, help="directory scanned recursively")
    p.add_argument("--out", required=True, help="manifest JSON path to write")
    p.add_argument("--name", default=None, help="dataset name (default: directory name)")
    p.set_defaults(handler=_cmd_ingest)

    p = sub.add_parser("rasterize", help="render a document to page images via the external tool")
    p.add_argument("--doc", required=True, help="document file to rasterize")
    p.add_argument("--manifest", required=True, help="manifest JSON to append page records to")
    p.add_argument("--outdir", required=True, help="directory for page images")
    p.add_argument("--dpi", type=_positive_int, default=None)
    p.add_argument("--doc-id", default=None, help="document id (default: file stem)")
    p.add_argument("--config", default=None, help="reviewlens.toml path")
    p.set_defaults(handler=_cmd_rasterize)

    p = sub.add_parser("extract", help="extract feature vectors for every manifest image")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", required=True, choices=["conv", "conv8192", "fc2", "fc2_4096"])
    p.add_argument("--out", required=True, help="feature store path to write")
    p.add_argument("--backbone", default=None, choices=["mock", "pretrained"])
    p.add_argument("--model-path", default=None, help="serialized network for kind=pretrained")
    p.add_argument("--batch-size", type=_positive_int, default=None)
    p.add_argument("--means", type=_means_triple, default=None, help="r,g,b channel means")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None, help="reviewlens.toml path")
    p.set_defaults(handler=_cmd_extract)

    p = sub.add_parser("cluster", help="k-means over a feature store, exporting a gallery")
    p.add_argument("--features", required=True, help="feature store path")
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--out", required=True, help="gallery JSON path")
    p.add_argument("--manifest", default=None, help="manifest for gallery membership")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=_positive_int, default=10)
    p.add_argument("--max-iterations", type=_positive_int, default=300)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(handler=_cmd_cluster)

    p = sub.add_parser("train", help="train the classifier head on labeled manifest images")
    p.add_argument("--features", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="trained-head file path")
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--epochs", type=_non_negative_int, default=10)
    p.add_argument("--batch-size", type=_positive_int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--optimizer", default="sgd_momentum", choices=list(head_mod.OPTIMIZERS))
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--validation-fraction", type=float, default=0.0)
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("predict", help="score a feature store with a trained head")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True, help="predictions JSON path")
    p.add_argument("--cutoff", type=_unit_interval, default=0.5)
    p.set_defaults(handler=_cmd_predict)

    p = sub.add_parser("voc-convert", help="convert PascalVOC XML annotations to CSV")
    p.add_argument("--xml-dir", required=True)
    p.add_argument("--out", required=True, help="annotation CSV path")
    p.set_defaults(handler=_cmd_voc_convert)

    p = sub.add_parser("split", help="filename-atomic train/test split of an annotation CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--test-fraction", type=_fraction, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--outdir", required=True)
    p.set_defaults(handler=_cmd_split)

    p = sub.add_parser("import-detections", help="validate a detection-import JSON file")
    p.add_argument("--file", required=True)
    p.add_argument("--out", default=None, help="write normalized detections JSON here")
    p.set_defaults(handler=_cmd_import_detections)

    p = sub.add_parser("score", help="aggregate imported detections to document scores")
    p.add_argument("--detections", required=True, help="detection-import JSON file")
    p.add_argument("--out", required=True, help="scores JSON path")
    p.set_defaults(handler=_cmd_score)

    p = sub.add_parser("evaluate", help="threshold table and PR curve for scored items")
    p.add_argument("--scores", required=True, help='JSON {"id": score}')
    p.add_argument("--truth", required=True, help='manifest JSON or flat {"id": 0|1}')
    p.add_argument("--cutoffs", type=_cutoff_list, required=True, help="comma-separated")
    p.add_argument("--format", default="json", choices=["json", "csv"])
    p.add_argument("--out", default=None, help="write report here instead of stdout")
    p.add_argument("--dataset", default="", help="dataset name recorded in the report")
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--port", type=_positive_int, default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--state-dir", default=None)
    p.add_argument("--config", default=None, help="reviewlens.toml path")
    p.set_defaults(handler=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ReviewLensError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
