"""
Training the classification head end to end
===========================================

Walks the image-classification loop: turn a directory of page images
into a manifest, extract feature vectors into a binary store, train
the two-layer head on labeled vectors, and score unseen images.

The offline mock backbone hashes image bytes into unit vectors, so it
exercises every pipeline joint without a model file. Because those
vectors carry no visual signal, the training half of the demo uses
synthetic separable features instead, which lets the head demonstrate
real held-out accuracy.
"""

import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from reviewlens.backbone import BackboneAdapter, extract_for_manifest
from reviewlens.feature_store import feature_store_read, feature_store_write
from reviewlens.head import TrainConfig, load_head, predict, save_head, train_head
from reviewlens.manifest import ImageManifest, ImageRecord, save_manifest

workdir = Path(tempfile.mkdtemp(prefix="reviewlens-classify-"))
print(f"working in {workdir}")

# --- 1. a small corpus of page images -------------------------------
rng = np.random.default_rng(7)
records = []
for i in range(12):
    pixels = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
    path = workdir / f"page-{i:02d}.png"
    Image.fromarray(pixels).save(path)
    records.append(ImageRecord(id=f"page-{i:02d}", path=str(path)))
manifest = ImageManifest(name="demo-pages", images=tuple(records))
save_manifest(manifest, workdir / "manifest.json")

# --- 2. extract features and persist them ---------------------------
adapter = BackboneAdapter(kind="mock", seed=0)
ids, matrix = extract_for_manifest(manifest, adapter, "conv8192")
store_path = workdir / "features.fvs"
feature_store_write(list(ids), matrix, store_path)
read_ids, read_matrix = feature_store_read(store_path)
print(f"stored {read_matrix.shape[0]} vectors of dimension {read_matrix.shape[1]}")
print(f"round trip intact: {read_ids == list(ids) and np.array_equal(read_matrix, matrix)}")

# --- 3. train the head on separable synthetic features --------------
# two Gaussian clouds, 8192-dim, one per class
train_pos = rng.normal(0.1, 0.05, size=(200, 8192))
train_neg = rng.normal(-0.1, 0.05, size=(200, 8192))
train_x = np.vstack([train_pos, train_neg])
train_y = np.concatenate([np.ones(200), np.zeros(200)])

config = TrainConfig(epochs=5, batch_size=32, seed=0)
params, history = train_head(train_x, train_y, config)
for epoch, stats in enumerate(history):
    print(f"epoch {epoch}: train loss {stats.train_loss:.6f}")

# --- 4. score held-out points ---------------------------------------
held_x = np.vstack([
    rng.normal(0.1, 0.05, size=(100, 8192)),
    rng.normal(-0.1, 0.05, size=(100, 8192)),
])
held_y = np.concatenate([np.ones(100), np.zeros(100)])
labels, probabilities = predict(params, held_x, cutoff=0.5)
accuracy = float(np.mean(labels == held_y.astype(np.int64)))
print(f"held-out accuracy: {accuracy:.3f}")

# --- 5. persist and reload the trained head -------------------------
model_path = workdir / "head.rlh"
save_head(model_path, params, config=config)
reloaded, envelope = load_head(model_path)
relabels, _ = predict(reloaded, held_x, cutoff=0.5)
print(f"reloaded head agrees on all held-out points: {bool(np.all(relabels == labels))}")
print(f"saved model config: epochs={envelope['config']['epochs']}, "
      f"optimizer={envelope['config']['optimizer']}")
