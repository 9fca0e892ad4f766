"""Image analytics for document review.

A numpy-centric library for the image side of technology-assisted
review: pretrained-backbone feature extraction (with a deterministic
mock for offline use), a from-scratch trainable classifier head,
k-means clustering with gallery export, PascalVOC annotation plumbing,
document-level detection scoring, and threshold/PR evaluation. A CLI
(`reviewlens`) and an HTTP service expose the same operations.
"""

from .backbone import (
    MODES,
    BackboneAdapter,
    FeatureVector,
    canonical_mode,
    extract_features,
    extract_for_manifest,
    mock_features,
    mode_dim,
    mode_input_size,
    preprocess,
)
from .clustering import (
    ClusterConfig,
    ClusterModel,
    assign_points,
    export_cluster_gallery,
    kmeans_fit,
    kmeanspp_init,
)
from .detection import (
    AnnotationRow,
    Detection,
    DocumentDetections,
    MockDetector,
    PageDetections,
    VocAnnotation,
    classify_documents,
    detect_document,
    detections_to_json,
    document_score,
    import_detections,
    parse_voc,
    rows_from_csv,
    rows_to_csv,
    split_rows,
    voc_to_rows,
    write_split_manifests,
)
from .errors import (
    BackboneError,
    ConfigError,
    CorruptionError,
    DecodeError,
    DegenerateDataError,
    DegenerateInputError,
    DimensionError,
    EmptyBatchError,
    EmptyDocumentError,
    FormatError,
    InconsistencyError,
    InvalidImageError,
    ManifestError,
    MissingLabelError,
    NotFoundError,
    ParseError,
    ReviewLensError,
    SchemaError,
    ToolError,
    UndefinedRecallError,
    ValidationError,
)
from .evaluation import (
    ConfusionMatrix,
    MetricsRow,
    PRPoint,
    confusion_at,
    emit_report,
    f1_from,
    metrics_from,
    pr_curve,
    threshold_table,
)
from .feature_store import feature_store_read, feature_store_write
from .head import (
    HeadParameters,
    TrainConfig,
    bce_loss,
    head_forward,
    head_gradients,
    init_head,
    load_head,
    predict,
    save_head,
    train_head,
)
from .manifest import (
    ImageManifest,
    ImageRecord,
    apply_label,
    document_truth,
    load_manifest,
    manifest_from_json,
    read_journal,
    replay_journal,
    save_manifest,
)
from .rasterize import RasterizeConfig, rasterize_document

__version__ = "0.1.0"

__all__ = [
    "AnnotationRow",
    "BackboneAdapter",
    "BackboneError",
    "ClusterConfig",
    "ClusterModel",
    "ConfigError",
    "ConfusionMatrix",
    "CorruptionError",
    "DecodeError",
    "DegenerateDataError",
    "DegenerateInputError",
    "Detection",
    "DimensionError",
    "DocumentDetections",
    "EmptyBatchError",
    "EmptyDocumentError",
    "FeatureVector",
    "FormatError",
    "HeadParameters",
    "ImageManifest",
    "ImageRecord",
    "InconsistencyError",
    "InvalidImageError",
    "MODES",
    "ManifestError",
    "MetricsRow",
    "MissingLabelError",
    "MockDetector",
    "NotFoundError",
    "PRPoint",
    "PageDetections",
    "ParseError",
    "RasterizeConfig",
    "ReviewLensError",
    "SchemaError",
    "ToolError",
    "TrainConfig",
    "UndefinedRecallError",
    "ValidationError",
    "VocAnnotation",
    "apply_label",
    "assign_points",
    "bce_loss",
    "canonical_mode",
    "classify_documents",
    "confusion_at",
    "detect_document",
    "detections_to_json",
    "document_score",
    "document_truth",
    "emit_report",
    "export_cluster_gallery",
    "extract_features",
    "extract_for_manifest",
    "f1_from",
    "feature_store_read",
    "feature_store_write",
    "head_forward",
    "head_gradients",
    "import_detections",
    "init_head",
    "kmeans_fit",
    "kmeanspp_init",
    "load_head",
    "load_manifest",
    "manifest_from_json",
    "metrics_from",
    "mock_features",
    "mode_dim",
    "mode_input_size",
    "parse_voc",
    "pr_curve",
    "predict",
    "preprocess",
    "rasterize_document",
    "read_journal",
    "replay_journal",
    "rows_from_csv",
    "rows_to_csv",
    "save_head",
    "save_manifest",
    "split_rows",
    "threshold_table",
    "train_head",
    "voc_to_rows",
    "write_split_manifests",
]
