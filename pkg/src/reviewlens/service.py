"""HTTP/JSON service for the review loop.

Everything lives under /api/v1. Datasets are registered manifests;
labels mutate through an append-only journal; long-running work
(feature extraction, clustering, head training) runs as asynchronous
jobs (202 plus polling) executed by one worker thread, so mutations to
a dataset are serialized and at most one job runs at a time. All state
persists inside the service's state directory: jobs survive restarts
(a job caught running restarts as queued), and every non-2xx response
body is {"status", "code", "message"}.
"""

from __future__ import annotations

import json
import mimetypes
import threading
import uuid
from dataclasses import asdict
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import head as head_mod
from .backbone import BackboneAdapter, canonical_mode, extract_for_manifest
from .clustering import ClusterConfig, export_cluster_gallery, kmeans_fit
from .detection import (
    DocumentDetections,
    detections_to_json,
    document_score,
    import_detections,
)
from .errors import (
    DegenerateDataError,
    MissingLabelError,
    NotFoundError,
    ReviewLensError,
    UndefinedRecallError,
)
from .evaluation import pr_curve, threshold_table
from .feature_store import feature_store_read, feature_store_write
from .jobs import JobRecord, JobStore, JobWorker
from .manifest import (
    LABELS,
    ImageManifest,
    apply_label,
    document_truth,
    load_manifest,
    manifest_from_json,
    save_manifest,
)

API_PREFIX = "/api/v1"
DEFAULT_CUTOFFS = "0.1,0.5,0.9,0.99"


class ApiException(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _domain_to_api(exc: ReviewLensError) -> ApiException:
    if isinstance(exc, NotFoundError):
        return ApiException(404, "not-found", str(exc))
    if isinstance(exc, (MissingLabelError, UndefinedRecallError)):
        return ApiException(409, "no-ground-truth", str(exc))
    if isinstance(exc, DegenerateDataError):
        return ApiException(422, "degenerate-data", str(exc))
    return ApiException(422, "validation-error", str(exc))


class ServiceState:
    """Everything the endpoints and the job worker share."""

    def __init__(self, state_dir: str | Path):
        self.dir = Path(state_dir)
        self.datasets_dir = self.dir / "datasets"
        self.journals_dir = self.dir / "journals"
        self.features_dir = self.dir / "features"
        self.clusterings_dir = self.dir / "clusterings"
        self.models_dir = self.dir / "models"
        for directory in (
            self.dir, self.datasets_dir, self.journals_dir,
            self.features_dir, self.clusterings_dir, self.models_dir,
        ):
            directory.mkdir(parents=True, exist_ok=True)
        self.lock = threading.RLock()
        self.manifests: dict[str, ImageManifest] = {}
        self.image_index: dict[str, str] = {}  # image_id -> dataset_id
        self.detections: dict[str, DocumentDetections] = {}
        self.jobs = JobStore(self.dir / "jobs.json")
        for path in sorted(self.datasets_dir.glob("*.json")):
            manifest = load_manifest(path)
            self._index_dataset(path.stem, manifest)
        detections_path = self.dir / "detections.json"
        if detections_path.exists():
            for doc in import_detections(detections_path):
                self.detections[doc.doc_id] = doc

    def _index_dataset(self, dataset_id: str, manifest: ImageManifest) -> None:
        self.manifests[dataset_id] = manifest
        for record in manifest:
            self.image_index[record.id] = dataset_id

    def register_dataset(self, manifest: ImageManifest) -> str:
        with self.lock:
            dataset_id = f"ds-{uuid.uuid4().hex[:12]}"
            save_manifest(manifest, self.datasets_dir / f"{dataset_id}.json")
            self._index_dataset(dataset_id, manifest)
            return dataset_id

    def get_manifest(self, dataset_id: str) -> ImageManifest:
        with self.lock:
            manifest = self.manifests.get(dataset_id)
            if manifest is None:
                raise NotFoundError(f"no such dataset: {dataset_id!r}")
            return manifest

    def set_label(self, image_id: str, label: str) -> None:
        with self.lock:
            dataset_id = self.image_index.get(image_id)
            if dataset_id is None:
                raise NotFoundError(f"no such image: {image_id!r}")
            manifest = self.manifests[dataset_id]
            journal = self.journals_dir / f"{dataset_id}.jsonl"
            updated = apply_label(manifest, image_id, label, journal_path=journal)
            save_manifest(updated, self.datasets_dir / f"{dataset_id}.json")
            self._index_dataset(dataset_id, updated)

    def save_detections(self) -> None:
        with self.lock:
            payload = detections_to_json(list(self.detections.values()))
            path = self.dir / "detections.json"
            path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")

    def feature_path(self, dataset_id: str, mode: str) -> Path:
        return self.features_dir / f"{dataset_id}.{mode}.fvs"

    def resolve_features(
        self, dataset_id: str, mode: str, seed: int
    ) -> tuple[list[str], np.ndarray]:
        """Latest stored extraction for (dataset, mode) when present,
        otherwise a deterministic in-memory mock extraction."""
        path = self.feature_path(dataset_id, mode)
        if path.exists():
            return feature_store_read(path)
        manifest = self.get_manifest(dataset_id)
        adapter = BackboneAdapter(kind="mock", seed=seed)
        ids, matrix = extract_for_manifest(manifest, adapter, mode)
        return list(ids), matrix

    def truth(self) -> dict[str, int]:
        with self.lock:
            merged: dict[str, int] = {}
            for manifest in self.manifests.values():
                merged.update(document_truth(manifest))
            return merged

    def scores(self) -> dict[str, float]:
        with self.lock:
            return {doc_id: document_score(doc) for doc_id, doc in self.detections.items()}


def _job_json(record: JobRecord) -> dict:
    return record.to_json()


def _parse_cutoffs(text: str) -> list[float]:
    try:
        cutoffs = [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise ApiException(422, "validation-error", f"cutoffs must be comma-separated reals: {text!r}")
    if not cutoffs:
        raise ApiException(422, "validation-error", "cutoffs list is empty")
    for value in cutoffs:
        if not 0.0 <= value <= 1.0:
            raise ApiException(422, "validation-error", f"cutoff {value} outside [0, 1]")
    return cutoffs


def create_app(state_dir: str | Path, start_worker: bool = True) -> FastAPI:
    app = FastAPI(title="reviewlens", docs_url=None, redoc_url=None, openapi_url=None)
    state = ServiceState(state_dir)

    def _handle_extract(record: JobRecord, store: JobStore) -> str:
        params = record.params
        mode = canonical_mode(params.get("mode", "fc2_4096"))
        adapter = BackboneAdapter(
            kind=params.get("backbone", "mock"),
            model_path=params.get("model_path"),
            seed=int(params.get("seed", 0)),
        )
        manifest = state.get_manifest(record.dataset_id)
        store.set_progress(record.id, 0.2)
        ids, matrix = extract_for_manifest(manifest, adapter, mode)
        feature_store_write(list(ids), matrix, state.feature_path(record.dataset_id, mode))
        return f"features:{record.dataset_id}:{mode}"

    def _handle_cluster(record: JobRecord, store: JobStore) -> str:
        params = record.params
        seed = int(params.get("seed", 0))
        config = ClusterConfig(k=int(params["k"]), seed=seed)
        manifest = state.get_manifest(record.dataset_id)
        ids, matrix = state.resolve_features(record.dataset_id, "fc2_4096", seed)
        store.set_progress(record.id, 0.4)
        model = kmeans_fit(matrix, config, point_ids=ids)
        gallery = export_cluster_gallery(model, manifest)
        clustering_id = f"cl-{uuid.uuid4().hex[:12]}"
        path = state.clusterings_dir / f"{clustering_id}.json"
        path.write_text(json.dumps(gallery, indent=2) + "\n", encoding="utf-8")
        return clustering_id

    def _handle_train(record: JobRecord, store: JobStore) -> str:
        config = head_mod.TrainConfig(**record.params)
        manifest = state.get_manifest(record.dataset_id)
        ids, matrix = state.resolve_features(record.dataset_id, "conv8192", config.seed)
        index = {image_id: row for row, image_id in enumerate(ids)}
        rows, labels = [], []
        for rec in manifest:
            if rec.label == "unlabeled":
                continue
            if rec.id not in index:
                raise NotFoundError(f"labeled image {rec.id!r} has no feature vector")
            rows.append(index[rec.id])
            labels.append(1 if rec.label == "positive" else 0)
        store.set_progress(record.id, 0.2)
        params_out, history = head_mod.train_head(
            matrix[rows].astype(np.float64), np.asarray(labels, dtype=np.float64), config
        )
        model_id = f"mdl-{uuid.uuid4().hex[:12]}"
        metrics = {
            "dataset_id": record.dataset_id,
            "feature_mode": "conv8192",
            "feature_seed": config.seed,
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
        head_mod.save_head(state.models_dir / f"{model_id}.rlh", params_out,
                           config=config, metrics=metrics)
        return model_id

    handlers = {"extract": _handle_extract, "cluster": _handle_cluster, "train": _handle_train}
    worker = JobWorker(state.jobs, handlers)
    app.state.service = state
    app.state.worker = worker
    if start_worker:
        worker.start()

    def _enqueue(kind: str, dataset_id: str, params: dict) -> JSONResponse:
        record = state.jobs.create(kind, dataset_id, params)
        worker.notify()
        return JSONResponse(status_code=202, content=_job_json(record))

    @app.exception_handler(ApiException)
    async def _api_exception(_request: Request, exc: ApiException) -> JSONResponse:
        return JSONResponse(
            status_code=exc.status,
            content={"status": exc.status, "code": exc.code, "message": exc.message},
        )

    @app.exception_handler(ReviewLensError)
    async def _domain_exception(_request: Request, exc: ReviewLensError) -> JSONResponse:
        api = _domain_to_api(exc)
        return JSONResponse(
            status_code=api.status,
            content={"status": api.status, "code": api.code, "message": api.message},
        )

    @app.exception_handler(RequestValidationError)
    async def _request_invalid(_request: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(
            status_code=422,
            content={"status": 422, "code": "invalid-request", "message": str(exc.errors())},
        )

    @app.exception_handler(StarletteHTTPException)
    async def _http_exception(_request: Request, exc: StarletteHTTPException) -> JSONResponse:
        return JSONResponse(
            status_code=exc.status_code,
            content={"status": exc.status_code, "code": "http-error", "message": str(exc.detail)},
        )

    @app.get(f"{API_PREFIX}/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post(f"{API_PREFIX}/datasets", status_code=201)
    def register_dataset(payload: dict) -> dict:
        manifest = manifest_from_json(payload, source="request")
        dataset_id = state.register_dataset(manifest)
        return {"id": dataset_id}

    @app.get(API_PREFIX + "/datasets/{dataset_id}")
    def dataset_summary(dataset_id: str) -> dict:
        manifest = state.get_manifest(dataset_id)
        label_counts = {label: 0 for label in LABELS}
        for record in manifest:
            label_counts[record.label] += 1
        return {
            "id": dataset_id,
            "name": manifest.name,
            "image_count": len(manifest),
            "document_count": len(manifest.documents()),
            "label_counts": label_counts,
            "images": [
                {
                    "id": record.id,
                    "doc_id": record.doc_id,
                    "page_index": record.page_index,
                    "label": record.label,
                }
                for record in manifest
            ],
        }

    @app.get(API_PREFIX + "/images/{image_id:path}/label")
    def get_label(image_id: str) -> dict:
        with state.lock:
            dataset_id = state.image_index.get(image_id)
            if dataset_id is None:
                raise NotFoundError(f"no such image: {image_id!r}")
            record = state.manifests[dataset_id].get(image_id)
        return {"image_id": image_id, "label": record.label}

    @app.put(API_PREFIX + "/images/{image_id:path}/label", status_code=204)
    def put_label(image_id: str, payload: dict) -> Response:
        label = payload.get("label")
        if label not in LABELS:
            raise ApiException(422, "validation-error",
                               f"label must be one of {list(LABELS)}, got {label!r}")
        state.set_label(image_id, label)
        return Response(status_code=204)

    @app.get(API_PREFIX + "/images/{image_id:path}")
    def get_image(image_id: str) -> Response:
        with state.lock:
            dataset_id = state.image_index.get(image_id)
            if dataset_id is None:
                raise NotFoundError(f"no such image: {image_id!r}")
            record = state.manifests[dataset_id].get(image_id)
        path = Path(record.path)
        if not path.is_file():
            raise NotFoundError(f"image file missing for {image_id!r}")
        media_type = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
        return Response(content=path.read_bytes(), media_type=media_type)

    @app.post(API_PREFIX + "/datasets/{dataset_id}/features")
    def post_features(dataset_id: str, payload: dict) -> JSONResponse:
        state.get_manifest(dataset_id)
        mode = canonical_mode(payload.get("mode", "fc2_4096"))
        kind = payload.get("backbone", "mock")
        if kind not in ("mock", "pretrained"):
            raise ApiException(422, "validation-error",
                               f"backbone must be 'mock' or 'pretrained', got {kind!r}")
        params = {
            "mode": mode,
            "backbone": kind,
            "model_path": payload.get("model_path"),
            "seed": int(payload.get("seed", 0)),
        }
        return _enqueue("extract", dataset_id, params)

    @app.post(API_PREFIX + "/datasets/{dataset_id}/clusterings")
    def post_clustering(dataset_id: str, payload: dict) -> JSONResponse:
        manifest = state.get_manifest(dataset_id)
        k = payload.get("k")
        if not isinstance(k, int) or k < 1:
            raise ApiException(422, "validation-error", f"k must be a positive integer, got {k!r}")
        if k > len(manifest):
            raise ApiException(422, "validation-error",
                               f"k={k} exceeds the dataset's {len(manifest)} images")
        return _enqueue("cluster", dataset_id, {"k": k, "seed": int(payload.get("seed", 0))})

    @app.post(API_PREFIX + "/datasets/{dataset_id}/train")
    def post_train(dataset_id: str, payload: dict) -> JSONResponse:
        manifest = state.get_manifest(dataset_id)
        try:
            config = head_mod.TrainConfig(**payload)
        except TypeError as exc:
            raise ApiException(422, "validation-error", f"bad train config: {exc}") from exc
        labels = {record.label for record in manifest if record.label != "unlabeled"}
        if labels != {"positive", "negative"}:
            raise ApiException(422, "degenerate-data",
                               "training needs at least one positive and one negative label")
        return _enqueue("train", dataset_id, asdict(config))

    @app.get(API_PREFIX + "/jobs/{job_id}")
    def get_job(job_id: str) -> dict:
        return _job_json(state.jobs.get(job_id))

    @app.get(API_PREFIX + "/clusterings/{clustering_id}")
    def get_clustering(clustering_id: str) -> dict:
        path = state.clusterings_dir / f"{clustering_id}.json"
        if not path.exists():
            raise NotFoundError(f"no such clustering: {clustering_id!r}")
        return json.loads(path.read_text(encoding="utf-8"))

    @app.get(API_PREFIX + "/models/{model_id}")
    def get_model(model_id: str) -> dict:
        path = state.models_dir / f"{model_id}.rlh"
        if not path.exists():
            raise NotFoundError(f"no such model: {model_id!r}")
        _, envelope = head_mod.load_head(path)
        return {"id": model_id, "config": envelope.get("config"),
                "metrics": envelope.get("metrics", {})}

    @app.post(API_PREFIX + "/models/{model_id}/predict")
    def post_predict(model_id: str, payload: dict) -> dict:
        path = state.models_dir / f"{model_id}.rlh"
        if not path.exists():
            raise NotFoundError(f"no such model: {model_id!r}")
        image_ids = payload.get("image_ids")
        if not isinstance(image_ids, list) or not image_ids:
            raise ApiException(422, "validation-error", "image_ids must be a nonempty list")
        cutoff = payload.get("cutoff", 0.5)
        if not isinstance(cutoff, (int, float)) or not 0.0 <= cutoff <= 1.0:
            raise ApiException(422, "validation-error", f"cutoff must be in [0, 1], got {cutoff!r}")
        params, envelope = head_mod.load_head(path)
        metrics = envelope.get("metrics", {})
        dataset_id = metrics.get("dataset_id", "")
        mode = metrics.get("feature_mode", "conv8192")
        seed = int(metrics.get("feature_seed", 0))
        ids, matrix = state.resolve_features(dataset_id, mode, seed)
        index = {image_id: row for row, image_id in enumerate(ids)}
        missing = [image_id for image_id in image_ids if image_id not in index]
        if missing:
            raise NotFoundError(f"no features for image ids: {missing}")
        rows = [index[image_id] for image_id in image_ids]
        labels01, probs = head_mod.predict(params, matrix[rows].astype(np.float64), float(cutoff))
        return {
            "cutoff": float(cutoff),
            "probabilities": {i: float(p) for i, p in zip(image_ids, probs)},
            "labels": {
                i: ("positive" if bit else "negative") for i, bit in zip(image_ids, labels01)
            },
        }

    @app.post(API_PREFIX + "/detections/import", status_code=201)
    def post_detections(payload: dict) -> dict:
        documents = import_detections(payload)
        with state.lock:
            for doc in documents:
                state.detections[doc.doc_id] = doc
            state.save_detections()
        return {"documents": len(documents)}

    @app.get(API_PREFIX + "/documents/scores")
    def get_scores() -> dict:
        return state.scores()

    @app.get(API_PREFIX + "/evaluations/pr-curve")
    def get_pr_curve() -> dict:
        scores = state.scores()
        truth = state.truth()
        if not truth:
            raise ApiException(409, "no-ground-truth", "no documents carry labeled pages")
        points = pr_curve(scores, truth)
        positives = sum(1 for doc_id in scores if truth.get(doc_id) == 1)
        return {
            "dataset": "",
            "n": len(scores),
            "positives": positives,
            "pr_curve": [point.to_json_object() for point in points],
        }

    @app.get(API_PREFIX + "/evaluations")
    def get_evaluations(cutoffs: str = DEFAULT_CUTOFFS) -> dict:
        parsed = _parse_cutoffs(cutoffs)
        scores = state.scores()
        truth = state.truth()
        if not truth:
            raise ApiException(409, "no-ground-truth", "no documents carry labeled pages")
        rows = threshold_table(scores, truth, parsed)
        positives = sum(1 for doc_id in scores if truth.get(doc_id) == 1)
        return {
            "dataset": "",
            "n": len(scores),
            "positives": positives,
            "table": [row.to_json_object() for row in rows],
        }

    return app
