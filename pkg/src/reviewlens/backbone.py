"""Image preprocessing and deep-feature extraction.

Two feature modes are supported:

  conv8192   flattened final convolutional map of the pretrained network
             at 150x150 input (4 x 4 x 512 = 8192 values)
  fc2_4096   activations of the second fully connected layer at 240x240
             input (4096 values)

Extraction goes through a pluggable adapter. The "pretrained" kind runs
a serialized network from an ONNX file with one named output tap per
mode ("conv_features", "fc2_features"); the "mock" kind produces
deterministic pseudo-random unit vectors from the raw bytes, so every
pipeline stage can run offline.

Tensor layout: (height, width, channel), RGB order, float32, value =
pixel - per-channel mean. Batches stack along a leading axis (NHWC).
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    BackboneError,
    ConfigError,
    DecodeError,
    DimensionError,
    InvalidImageError,
)
from .manifest import ImageManifest

# mode -> (input edge in pixels, feature dimension)
MODES: dict[str, tuple[int, int]] = {
    "conv8192": (150, 8192),
    "fc2_4096": (240, 4096),
}
MODE_ALIASES = {"conv": "conv8192", "fc2": "fc2_4096"}

# Published per-channel RGB means of the backbone's training corpus.
DEFAULT_MEANS = (123.68, 116.779, 103.939)

ONNX_OUTPUT_TAPS = {"conv8192": "conv_features", "fc2_4096": "fc2_features"}


def canonical_mode(mode: str) -> str:
    mode = MODE_ALIASES.get(mode, mode)
    if mode not in MODES:
        raise ConfigError(f"unknown feature mode {mode!r}; expected one of {sorted(MODES)}")
    return mode


def mode_dim(mode: str) -> int:
    return MODES[canonical_mode(mode)][1]


def mode_input_size(mode: str) -> int:
    return MODES[canonical_mode(mode)][0]


@dataclass(frozen=True)
class FeatureVector:
    """A single extracted feature vector keyed to an image."""

    values: np.ndarray
    mode: str
    image_id: str = ""

    def __post_init__(self) -> None:
        expected = mode_dim(self.mode)
        if self.values.shape != (expected,):
            raise DimensionError(
                f"mode {self.mode!r} requires {expected} values, got shape {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise DimensionError("feature values must be finite")


@dataclass(frozen=True)
class BackboneAdapter:
    """Configuration of the feature-extraction backend.

    kind "pretrained" requires model_path (an ONNX file with the output
    taps above); kind "mock" forbids it. input_sizes and means are
    configurable because the published network family is sometimes
    exported at other sizes.
    """

    kind: str = "mock"
    model_path: str | None = None
    input_sizes: tuple[tuple[str, int], ...] = (("conv8192", 150), ("fc2_4096", 240))
    means: tuple[float, float, float] = DEFAULT_MEANS
    batch_size: int = 16
    seed: int = 0  # drives the mock kind only

    def __post_init__(self) -> None:
        if self.kind not in ("pretrained", "mock"):
            raise ConfigError(f"adapter kind must be 'pretrained' or 'mock', got {self.kind!r}")
        if self.kind == "pretrained" and not self.model_path:
            raise ConfigError("pretrained adapter requires model_path")
        if self.kind == "mock" and self.model_path:
            raise ConfigError("mock adapter must not set model_path")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")

    def input_size(self, mode: str) -> int:
        mode = canonical_mode(mode)
        for name, size in self.input_sizes:
            if name == mode:
                return size
        return mode_input_size(mode)


def preprocess(
    image_bytes: bytes,
    mode: str,
    means: Sequence[float] = DEFAULT_MEANS,
    target_size: int | None = None,
) -> np.ndarray:
    """Decode, squash-resize (bilinear) and mean-subtract one image.

    Deterministic for identical bytes. No aspect-ratio preservation:
    the image is resized straight to (size, size).
    """
    size = target_size if target_size is not None else mode_input_size(mode)
    try:
        with Image.open(io.BytesIO(image_bytes)) as img:
            img.load()
            if img.width == 0 or img.height == 0:
                raise InvalidImageError("image has zero area")
            rgb = img.convert("RGB").resize((size, size), Image.BILINEAR)
    except InvalidImageError:
        raise
    except (UnidentifiedImageError, OSError, ValueError, SyntaxError) as exc:
        raise DecodeError(f"could not decode image bytes: {exc}") from exc
    tensor = np.asarray(rgb, dtype=np.float32)
    tensor -= np.asarray(means, dtype=np.float32)
    if not np.all(np.isfinite(tensor)):
        raise InvalidImageError("preprocessed tensor contains non-finite values")
    return tensor


def _unit_vector(payload: bytes, dim: int, seed: int) -> np.ndarray:
    """Deterministic pseudo-random unit-norm vector from (payload, seed)."""
    digest = hashlib.sha256(payload).digest()
    words = np.frombuffer(digest, dtype="<u8")
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, *words.tolist()])
    vec = rng.standard_normal(dim)
    vec /= np.linalg.norm(vec)
    return vec.astype(np.float32)


def mock_features(
    image_bytes: bytes, mode: str, seed: int, image_id: str = ""
) -> FeatureVector:
    """Offline stand-in for the pretrained network.

    Pure function of (bytes, mode, seed); the bytes are hashed, never
    decoded, so any byte string works.
    """
    mode = canonical_mode(mode)
    values = _unit_vector(image_bytes, mode_dim(mode), seed)
    return FeatureVector(values=values, mode=mode, image_id=image_id)


def extract_features(
    tensors: Sequence[np.ndarray], adapter: BackboneAdapter, mode: str
) -> np.ndarray:
    """Run tensors through the adapter; one row per input, input order."""
    mode = canonical_mode(mode)
    size = adapter.input_size(mode)
    dim = mode_dim(mode)
    for i, tensor in enumerate(tensors):
        if tensor.shape != (size, size, 3):
            raise DimensionError(
                f"tensor {i} has shape {tensor.shape}, mode {mode!r} requires ({size}, {size}, 3)"
            )
    if len(tensors) == 0:
        return np.empty((0, dim), dtype=np.float32)

    if adapter.kind == "mock":
        rows = [
            _unit_vector(np.ascontiguousarray(t, dtype=np.float32).tobytes(), dim, adapter.seed)
            for t in tensors
        ]
        return np.vstack(rows)
    return _extract_onnx(tensors, adapter, mode, dim)


def _extract_onnx(
    tensors: Sequence[np.ndarray], adapter: BackboneAdapter, mode: str, dim: int
) -> np.ndarray:
    try:
        import onnxruntime  # noqa: PLC0415  deferred: heavyweight optional dependency
    except ImportError as exc:
        raise BackboneError(
            "pretrained adapter requires the onnxruntime package (install extra 'onnx')"
        ) from exc
    try:
        session = _onnx_session(adapter.model_path, onnxruntime)
    except Exception as exc:
        raise BackboneError(f"could not load model {adapter.model_path!r}: {exc}") from exc

    tap = ONNX_OUTPUT_TAPS[mode]
    output_names = [out.name for out in session.get_outputs()]
    if tap not in output_names:
        raise BackboneError(
            f"model {adapter.model_path!r} has outputs {output_names}, missing tap {tap!r}"
        )
    input_name = session.get_inputs()[0].name

    rows = []
    batch = adapter.batch_size
    for start in range(0, len(tensors), batch):
        chunk = np.stack(
            [np.asarray(t, dtype=np.float32) for t in tensors[start : start + batch]]
        )
        (out,) = session.run([tap], {input_name: chunk})
        out = np.asarray(out, dtype=np.float32).reshape(len(chunk), -1)
        if out.shape[1] != dim:
            raise DimensionError(
                f"model tap {tap!r} produced dimension {out.shape[1]}, expected {dim}"
            )
        rows.append(out)
    return np.vstack(rows)


_session_cache: dict[str, object] = {}


def _onnx_session(model_path: str | None, onnxruntime) -> object:
    assert model_path is not None
    session = _session_cache.get(model_path)
    if session is None:
        session = onnxruntime.InferenceSession(
            model_path, providers=["CPUExecutionProvider"]
        )
        _session_cache[model_path] = session
    return session


def extract_for_manifest(
    manifest: ImageManifest, adapter: BackboneAdapter, mode: str
) -> tuple[list[str], np.ndarray]:
    """Extract one feature row per manifest image, in manifest order.

    The mock adapter hashes the raw file bytes (no decode); the
    pretrained adapter decodes and preprocesses each image first.
    """
    mode = canonical_mode(mode)
    ids = list(manifest.ids())
    if adapter.kind == "mock":
        rows = []
        for rec in manifest:
            payload = _read_bytes(rec.path)
            rows.append(mock_features(payload, mode, adapter.seed, image_id=rec.id).values)
        matrix = (
            np.vstack(rows) if rows else np.empty((0, mode_dim(mode)), dtype=np.float32)
        )
        return ids, matrix
    tensors = [
        preprocess(
            _read_bytes(rec.path),
            mode,
            means=adapter.means,
            target_size=adapter.input_size(mode),
        )
        for rec in manifest
    ]
    return ids, extract_features(tensors, adapter, mode)


def _read_bytes(path: str) -> bytes:
    try:
        with open(path, "rb") as fp:
            return fp.read()
    except OSError as exc:
        raise BackboneError(f"could not read image file {path!r}: {exc}") from exc
