"""
Grouping images with k-means galleries
======================================

Builds a feature store whose vectors fall into three planted groups,
fits k-means with multiple restarts, and exports the cluster gallery a
reviewer would page through to exclude whole groups at once (stamps,
letterheads, blank scans) from a review population.
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from reviewlens.clustering import ClusterConfig, assign_points, export_cluster_gallery, kmeans_fit
from reviewlens.feature_store import feature_store_read, feature_store_write
from reviewlens.manifest import ImageManifest, ImageRecord

workdir = Path(tempfile.mkdtemp(prefix="reviewlens-cluster-"))
print(f"working in {workdir}")

# --- 1. three planted groups of feature vectors ---------------------
# each group scatters around its own random unit direction
rng = np.random.default_rng(3)
group_sizes = {"stamp": 8, "letterhead": 6, "blank": 10}
centers = {name: rng.standard_normal(512) for name in group_sizes}
ids, vectors = [], []
for name, size in group_sizes.items():
    center = centers[name] / np.linalg.norm(centers[name])
    for i in range(size):
        ids.append(f"{name}-{i:02d}")
        vectors.append(center + rng.normal(0.0, 0.02, size=512))
matrix = np.asarray(vectors)

store_path = workdir / "features.fvs"
feature_store_write(ids, matrix, store_path)
stored_ids, stored = feature_store_read(store_path)
print(f"stored {stored.shape[0]} vectors in {store_path.name}")

# --- 2. fit k-means with restarts -----------------------------------
config = ClusterConfig(k=3, restarts=10, seed=0)
model = kmeans_fit(stored.astype(np.float64), config, point_ids=stored_ids)
print(f"inertia {model.inertia:.6f} after {model.iterations_run} iterations "
      f"(best of {len(model.restart_inertias)} restarts)")
print(f"per-pass inertia: {[round(v, 4) for v in model.inertia_history]}")

# --- 3. export the reviewer-facing gallery --------------------------
manifest = ImageManifest(
    name="demo-groups",
    images=tuple(ImageRecord(id=image_id, path="") for image_id in stored_ids),
)
gallery = export_cluster_gallery(model, manifest)
gallery_path = workdir / "gallery.json"
gallery_path.write_text(json.dumps(gallery, indent=2) + "\n")
for cluster in gallery["clusters"]:
    nearest = [member["image_id"] for member in cluster["members"][:3]]
    print(f"cluster {cluster['index']}: {cluster['size']} images, "
          f"{cluster['inertia_share']:.1%} of inertia, nearest {nearest}")

# each planted group should land in exactly one cluster
for name in group_sizes:
    homes = set()
    for cluster in gallery["clusters"]:
        for member in cluster["members"]:
            if member["image_id"].startswith(name):
                homes.add(cluster["index"])
    print(f"group {name!r} occupies clusters {sorted(homes)}")

# --- 4. route a new image to its nearest cluster --------------------
probe = centers["stamp"] / np.linalg.norm(centers["stamp"]) + rng.normal(0.0, 0.02, size=512)
labels, distances = assign_points(model, probe[None, :])
print(f"new stamp-like vector lands in cluster {labels[0]} "
      f"at distance {distances[0]:.4f}")
